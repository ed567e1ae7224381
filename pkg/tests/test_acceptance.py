"""End-to-end runs on the mini config: pretrain, train three domains, evaluate."""

import numpy as np
import pytest

from crossprompt.benchmark import ensure_prototype_margin, generate_from_config
from crossprompt.models import BenchmarkConfig, EncoderConfig, PretrainConfig, TrainConfig
from crossprompt.training import (
    compute_metrics,
    evaluate_predictions,
    pretrain_base,
    sequence_snapshots,
    train_sequence,
)

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)


class Run:
    def __init__(self, seed, train_config):
        encoder = EncoderConfig.mini()
        benchmark = BenchmarkConfig(seed=seed)
        base, _ = generate_from_config(benchmark, encoder)
        self.backbone = pretrain_base(PretrainConfig(seed=seed), base, encoder=encoder).weights
        _, self.domains, _, self.margin = ensure_prototype_margin(
            self.backbone, benchmark, encoder, threshold=train_config.threshold
        )
        pool = train_sequence(self.backbone, self.domains, train_config)
        self.evaluation = evaluate_predictions(
            sequence_snapshots(pool), self.backbone, self.domains, train_config
        )
        self.report = compute_metrics(self.evaluation.matrix)


@pytest.fixture(scope="module")
def runs():
    config = TrainConfig(iterations=300, batch_size=32, learning_rate=2e-3, temperature=0.01)
    return {seed: Run(seed, config.model_copy(update={"seed": seed})) for seed in SEEDS}


@pytest.fixture(scope="module")
def few_shot_runs():
    config = TrainConfig(few_shot=True, shots=5, batch_size=32, temperature=0.01)
    return {seed: Run(seed, config.model_copy(update={"seed": seed})) for seed in SEEDS}


def check_routing_properties(run):
    assert run.margin.passed
    evaluation = run.evaluation
    values = evaluation.matrix.values
    n = len(run.domains)
    for c, dataset in enumerate(run.domains):
        for r in range(1, n + 1):
            if r >= c + 1:
                assert evaluation.routes[r][c] == dataset.task_id
                assert values[r][c] == values[c + 1][c]
                assert (
                    evaluation.predictions[r][c].tobytes()
                    == evaluation.predictions[c + 1][c].tobytes()
                )
            else:
                assert evaluation.routes[r][c] is None
                assert values[r][c] == values[0][c]
                assert (
                    evaluation.predictions[r][c].tobytes() == evaluation.predictions[0][c].tobytes()
                )
    assert run.report.backward_transfer == 0.0
    assert run.report.transfer_delta == pytest.approx(0.0, abs=1e-15)


def mean_gain_per_domain(runs):
    gains = []
    for run in runs.values():
        matrix = run.evaluation.matrix.array
        gains.append(matrix[-1] - matrix[0])
    return np.mean(gains, axis=0)


def test_no_forgetting_and_untouched_zero_shot(runs):
    for run in runs.values():
        check_routing_properties(run)


def test_prompts_beat_zero_shot_on_shifted_domains(runs):
    assert np.all(mean_gain_per_domain(runs) >= 0.15)


def test_few_shot_runs(few_shot_runs):
    for run in few_shot_runs.values():
        check_routing_properties(run)
    assert np.all(mean_gain_per_domain(few_shot_runs) >= 0.08)
