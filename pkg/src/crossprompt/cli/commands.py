"""
Pipeline stages behind the CLI subcommands.

Each command takes a validated RunConfig plus the parsed arguments and
returns an exit status. Failures propagate as exceptions; main() maps them
to exit codes.
"""

import argparse
import itertools
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from ..benchmark import (
    apply_task_order,
    ensure_prototype_margin,
    generate_from_config,
    load_benchmark,
    save_benchmark,
)
from ..encoders.backbone import BackboneWeights, load_backbone, save_backbone
from ..exceptions import ConfigError, ContractViolation, PretrainingFailure
from ..models.config import pool_config_hash
from ..models.dataset import TaskDataset
from ..pool.pool import PromptPool
from ..pool.storage import load_pool, save_pool
from ..training import (
    MatrixEvaluation,
    MetricsReport,
    TrainResult,
    compute_metrics,
    evaluate_predictions,
    pretrain_base,
    sequence_snapshots,
    train_sequence,
)
from . import reporting
from .settings import RunConfig

logger = logging.getLogger(__name__)

AXIS_ALIASES = {
    "depth": "prompt_depth",
    "plen": "prompt_length",
    "gamma": "threshold",
    "lr": "learning_rate",
    "mode": "prompt_mode",
}

SWEEP_METRICS = ("transfer", "avg", "avg_trained", "last", "backward_transfer", "zero_shot")


def cmd_gen(config: RunConfig, args: argparse.Namespace) -> int:
    """Generate the synthetic benchmark into the datasets directory."""
    base, domains = generate_from_config(config.benchmark_config(), config.encoder_config())
    save_benchmark(
        config.datasets_path,
        base,
        domains,
        extra={"seed": config.seed, "attempt": 0, "config_hash": config.config_hash()},
    )
    print(f"Wrote base set and {len(domains)} domains to {config.datasets_path}")
    return 0


def _load_base(config: RunConfig) -> TaskDataset:
    if (config.datasets_path / "manifest.json").is_file():
        base, _, _ = load_benchmark(config.datasets_path)
        return base
    logger.info("No benchmark at %s; generating one", config.datasets_path)
    base, _ = generate_from_config(config.benchmark_config(), config.encoder_config())
    return base


def cmd_pretrain(config: RunConfig, args: argparse.Namespace) -> int:
    """
    Pretrain the backbone on the base set, save it, then re-roll the domain
    tasks until their keys separate under the new backbone.
    """
    encoder = config.encoder_config()
    result = pretrain_base(config.pretrain_config(), _load_base(config), encoder=encoder)
    save_backbone(result.weights, config.backbone_file)

    train_config = config.train_config()
    base, domains, attempt, margin = ensure_prototype_margin(
        result.weights,
        config.benchmark_config(),
        encoder,
        threshold=train_config.threshold,
        template=train_config.class_template,
    )
    save_benchmark(
        config.datasets_path,
        base,
        domains,
        extra={
            "seed": config.seed,
            "attempt": attempt,
            "config_hash": config.config_hash(),
            "backbone_fingerprint": result.weights.fingerprint(),
            "key_margin": margin.model_dump(),
        },
    )
    reporting.write_json(
        config.output_dir / "pretrain.json",
        {
            "config_hash": config.config_hash(),
            "seed": config.seed,
            "config": config.provenance(),
            "initial_accuracy": result.initial_accuracy,
            "accuracy": result.accuracy,
            "iterations": result.iterations,
            "reached_target": result.reached_target,
            "backbone_fingerprint": result.weights.fingerprint(),
            "benchmark_attempt": attempt,
            "key_margin": margin.model_dump(),
            "loss_trace": result.loss_trace,
        },
    )
    print(
        f"Held-out base accuracy {result.initial_accuracy:.4f} -> {result.accuracy:.4f} "
        f"after {result.iterations} iterations; key margin {margin.margin:.4f}"
    )
    if not result.reached_target and config.strict_pretrain:
        raise PretrainingFailure(result.accuracy, config.target_accuracy, result.iterations)
    return 0


def _load_inputs(config: RunConfig) -> Tuple[BackboneWeights, List[TaskDataset]]:
    backbone = load_backbone(config.backbone_file)
    if backbone.config != config.encoder_config():
        raise ContractViolation(
            f"backbone at {config.backbone_file} was built for a different encoder config"
        )
    _, domains, _ = load_benchmark(config.datasets_path)
    return backbone, domains


def _evaluate(
    config: RunConfig,
    pool: PromptPool,
    backbone: BackboneWeights,
    datasets: Sequence[TaskDataset],
    output_dir: Path,
    plots: bool,
) -> Tuple[MatrixEvaluation, MetricsReport]:
    evaluation = evaluate_predictions(
        sequence_snapshots(pool), backbone, datasets, config.train_config()
    )
    report = compute_metrics(evaluation.matrix)
    reporting.write_metrics(
        output_dir,
        evaluation,
        report,
        config.provenance(),
        config.config_hash(),
        pool.config_hash,
    )
    if plots:
        reporting.plot_accuracy_matrix(evaluation.matrix, output_dir / "accuracy_matrix.html")
    return evaluation, report


def run_training(
    config: RunConfig,
    backbone: BackboneWeights,
    domains: Sequence[TaskDataset],
    output_dir: Path,
    pool_file: Path,
    plots: bool = False,
) -> Tuple[MatrixEvaluation, MetricsReport]:
    """Train the ordered tasks, save the pool and write all metrics artifacts."""
    datasets = apply_task_order(domains, config.task_permutation, config.seed)
    results: List[TrainResult] = []

    def on_task_done(index: int, result: TrainResult, pool: PromptPool) -> None:
        results.append(result)
        final = result.loss_trace[-1] if result.loss_trace else None
        logger.info(
            "Task %d/%d (%s) done, final loss %s", index + 1, len(datasets), result.task_id, final
        )

    pool = train_sequence(backbone, datasets, config.train_config(), on_task_done=on_task_done)
    save_pool(pool, pool_file)
    reporting.write_json(
        output_dir / "train_log.json",
        {
            "config_hash": config.config_hash(),
            "seed": config.seed,
            "tasks": [
                {
                    "task_id": result.task_id,
                    "iterations": result.iterations,
                    "loss_trace": result.loss_trace,
                }
                for result in results
            ],
        },
    )
    return _evaluate(config, pool, backbone, datasets, output_dir, plots)


def cmd_train(config: RunConfig, args: argparse.Namespace) -> int:
    backbone, domains = _load_inputs(config)
    evaluation, report = run_training(
        config, backbone, domains, config.output_dir, config.pool_file, config.plots
    )
    print(reporting.format_summary(evaluation.matrix, report))
    return 0


def cmd_eval(config: RunConfig, args: argparse.Namespace) -> int:
    """Re-evaluate a saved pool; tasks are taken in the pool's creation order."""
    backbone, domains = _load_inputs(config)
    train_config = config.train_config()
    expected = pool_config_hash(
        backbone.config, train_config.depth_for(backbone.config), train_config.prompt_length
    )
    pool = load_pool(config.pool_file, expected_hash=expected)
    by_id = {dataset.task_id: dataset for dataset in domains}
    missing = [task_id for task_id in pool.task_ids if task_id not in by_id]
    if missing:
        raise ContractViolation(f"pool tasks missing from the benchmark: {', '.join(missing)}")
    datasets = [by_id[task_id] for task_id in pool.task_ids]

    evaluation, report = _evaluate(
        config, pool, backbone, datasets, config.output_dir, config.plots
    )
    print(reporting.format_summary(evaluation.matrix, report))
    return 0


def parse_axes(items: Optional[Sequence[str]]) -> Dict[str, List[str]]:
    """
    Parse repeated `name=v1,v2` sweep axes, resolving short aliases.

    Raises:
        ConfigError: On malformed axes or unknown field names
    """
    axes: Dict[str, List[str]] = {}
    for item in items or ():
        name, sep, values = item.partition("=")
        name = AXIS_ALIASES.get(name.strip(), name.strip().replace("-", "_"))
        if not sep or not values.strip():
            raise ConfigError(f"sweep axis must look like name=v1,v2, got {item!r}", "axis")
        if name not in RunConfig.model_fields:
            raise ConfigError(f"unknown sweep field {name!r}", "axis")
        if name in axes:
            raise ConfigError(f"sweep field {name!r} given twice", "axis")
        axes[name] = [value.strip() for value in values.split(",")]
    return axes


def sweep_points(axes: Dict[str, List[str]]) -> List[Dict[str, str]]:
    """Cartesian grid over the axes, first axis slowest."""
    names = list(axes)
    return [dict(zip(names, values)) for values in itertools.product(*axes.values())]


def _point_slug(index: int, point: Dict[str, Any]) -> str:
    parts = [f"{name}-{value}" for name, value in point.items()]
    return "-".join([f"{index:03d}", *parts]).replace("/", "_")


def cmd_sweep(config: RunConfig, args: argparse.Namespace) -> int:
    """Train and evaluate once per grid point; one metrics row each."""
    axes = parse_axes(getattr(args, "axis", None))
    points = sweep_points(axes)
    configs = [config.with_updates(point) for point in points]
    backbone, domains = _load_inputs(config)

    rows: List[Dict[str, Any]] = []
    for index, (point, point_config) in enumerate(zip(points, configs)):
        logger.info("Sweep point %d/%d: %s", index + 1, len(points), point)
        point_dir = config.output_dir / "sweep" / _point_slug(index, point)
        _, report = run_training(
            point_config, backbone, domains, point_dir, point_dir / "pool.cpp"
        )
        row: Dict[str, Any] = dict(point)
        row["config_hash"] = point_config.config_hash()
        row.update({name: getattr(report, name) for name in SWEEP_METRICS})
        rows.append(row)

    frame = reporting.sweep_frame(rows)
    reporting.write_csv(config.output_dir / "sweep.csv", frame, index=False)
    reporting.write_json(
        config.output_dir / "sweep.json",
        {
            "config_hash": config.config_hash(),
            "seed": config.seed,
            "config": config.provenance(),
            "axes": axes,
            "rows": rows,
        },
    )
    with pd.option_context("display.width", 200):
        print(frame.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    return 0


def cmd_inspect_pool(config: RunConfig, args: argparse.Namespace) -> int:
    """Print pool entries and key similarities."""
    pool = load_pool(config.pool_file)
    if len(pool) == 0:
        print(f"Pool {config.pool_file} is empty")
        return 0
    print(reporting.pool_frame(pool).to_string(index=False))
    print()
    sims = pd.DataFrame(pool.key_similarity_matrix(), index=pool.task_ids, columns=pool.task_ids)
    print("Key similarity")
    print(sims.to_string(float_format=lambda v: f"{v:.4f}"))
    margin = pool.routing_margin()
    if margin is not None:
        print(f"\nRouting margin {margin:.4f} (threshold {config.threshold:.4f})")
    if config.plots:
        reporting.plot_pool_keys(pool, config.output_dir / "pool_keys.html")
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "pretrain": cmd_pretrain,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "inspect-pool": cmd_inspect_pool,
}
