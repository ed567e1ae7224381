"""
Run configuration using Pydantic Settings.

Values come from (highest priority first): CLI flags, environment
variables prefixed CROSSPROMPT_, the env-style file given with --config,
then the defaults below. Keys in the config file carry the prefix too,
e.g. CROSSPROMPT_PROMPT_LENGTH=4.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from ..exceptions import ConfigError
from ..models.config import (
    BenchmarkConfig,
    EncoderConfig,
    PretrainConfig,
    PromptMode,
    TrainConfig,
    TransferMode,
    canonical_hash,
)

# Fields that do not influence any computed artifact.
NON_SEMANTIC_FIELDS = {
    "output_dir",
    "dataset_dir",
    "backbone_path",
    "pool_path",
    "log_level",
    "log_every",
    "plots",
    "eval_workers",
}


def _parse_int_list(value: str, name: str) -> List[int]:
    value = value.strip()
    if not value:
        return []
    try:
        return [int(item.strip()) for item in value.split(",")]
    except ValueError:
        raise ValueError(f"{name} must be a comma-separated list of integers, got {value!r}")


class RunConfig(BaseSettings):
    """Every knob of a run, flattened for env files and CLI flags."""

    model_config = SettingsConfigDict(
        env_prefix="CROSSPROMPT_",
        env_file=None,
        extra="ignore",
        protected_namespaces=(),
    )

    # Encoder
    layers: int = 4
    text_width: int = 64
    vision_width: int = 64
    heads: int = 4
    max_text_tokens: int = 8
    patch_size: int = 4
    image_size: int = 16
    channels: int = 3
    vocab_size: int = 64
    joint_width: int = 32
    mlp_ratio: int = 4

    # Prompt tuning
    iterations: int = 2000
    few_shot_iterations: int = 500
    few_shot: bool = False
    shots: int = 5
    learning_rate: float = 2e-3
    batch_size: int = 64
    temperature: float = 0.01
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    prompt_depth: Optional[int] = None
    prompt_length: int = 2
    prompt_mode: PromptMode = PromptMode.CROSS_MODAL
    prompt_init_std: float = 0.02
    threshold: float = 0.8
    transfer_mode: TransferMode = TransferMode.THRESHOLD
    class_template: str = Field(default="", description="Comma-separated token ids")
    eval_workers: int = 1
    log_every: int = 100

    # Backbone pretraining
    pretrain_iterations: int = 5000
    pretrain_batch_size: int = 64
    pretrain_learning_rate: float = 1e-3
    pretrain_weight_decay: float = 0.01
    pretrain_temperature: float = 0.07
    target_accuracy: float = 0.85
    eval_every: int = 250
    init_std: float = 0.02
    strict_pretrain: bool = True

    # Benchmark
    n_domains: int = 3
    n_classes: int = 5
    samples_per_class: int = 40
    test_fraction: float = 0.25
    noise_std: float = 0.05
    min_margin: float = 0.1
    max_rerolls: int = 8

    seed: int = 0
    task_order: str = Field(default="", description='"", "random" or e.g. "2,0,1"')

    # Paths and output
    output_dir: Path = Path("runs/default")
    dataset_dir: Optional[Path] = None
    backbone_path: Optional[Path] = None
    pool_path: Optional[Path] = None
    plots: bool = False
    log_level: str = "INFO"

    @field_validator("prompt_depth", mode="before")
    @classmethod
    def parse_prompt_depth(cls, v: Any) -> Any:
        """Accept "none" or "all" (any case) for prompts at every layer."""
        if isinstance(v, str) and v.strip().lower() in ("", "none", "all"):
            return None
        return v

    @field_validator("class_template")
    @classmethod
    def parse_class_template(cls, v: str) -> str:
        """Check the template is a comma-separated token list."""
        _parse_int_list(v, "class_template")
        return v

    @field_validator("task_order")
    @classmethod
    def parse_task_order(cls, v: str) -> str:
        v = v.strip()
        if v not in ("", "random"):
            _parse_int_list(v, "task_order")
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level {v!r}")
        return level

    @property
    def template_tokens(self) -> Tuple[int, ...]:
        return tuple(_parse_int_list(self.class_template, "class_template"))

    @property
    def task_permutation(self):
        """None, "random" or an explicit index list."""
        if self.task_order == "":
            return None
        if self.task_order == "random":
            return "random"
        return _parse_int_list(self.task_order, "task_order")

    @property
    def datasets_path(self) -> Path:
        return self.dataset_dir or self.output_dir / "datasets"

    @property
    def backbone_file(self) -> Path:
        return self.backbone_path or self.output_dir / "backbone.cpbb"

    @property
    def pool_file(self) -> Path:
        return self.pool_path or self.output_dir / "pool.cpp"

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            **{name: getattr(self, name) for name in EncoderConfig.model_fields}
        )

    def train_config(self) -> TrainConfig:
        fields = {
            name: getattr(self, name)
            for name in TrainConfig.model_fields
            if name != "class_template"
        }
        return TrainConfig(**fields, class_template=self.template_tokens)

    def pretrain_config(self) -> PretrainConfig:
        return PretrainConfig(
            max_iterations=self.pretrain_iterations,
            batch_size=self.pretrain_batch_size,
            learning_rate=self.pretrain_learning_rate,
            weight_decay=self.pretrain_weight_decay,
            temperature=self.pretrain_temperature,
            target_accuracy=self.target_accuracy,
            eval_every=self.eval_every,
            init_std=self.init_std,
            seed=self.seed,
        )

    def benchmark_config(self) -> BenchmarkConfig:
        return BenchmarkConfig(
            **{name: getattr(self, name) for name in BenchmarkConfig.model_fields}
        )

    def provenance(self) -> Dict[str, Any]:
        """Config echo embedded in every artifact."""
        return {
            name: value
            for name, value in self.model_dump(mode="json").items()
            if name not in NON_SEMANTIC_FIELDS
        }

    def config_hash(self) -> str:
        return canonical_hash(self.provenance())

    def check(self) -> "RunConfig":
        """
        Build every derived config once so cross-field problems surface early.

        Raises:
            ConfigError: If a derived config is invalid
        """
        try:
            encoder = self.encoder_config()
            self.train_config().depth_for(encoder)
            self.pretrain_config()
            self.benchmark_config()
        except ValidationError as e:
            raise _config_error(e) from e
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return self

    def with_updates(self, updates: Dict[str, Any]) -> "RunConfig":
        """A validated copy with some fields replaced (no environment re-read)."""
        try:
            updated = RunConfig.model_validate({**self.model_dump(), **updates})
        except ValidationError as e:
            raise _config_error(e) from e
        return updated.check()


def _config_error(error: ValidationError) -> ConfigError:
    first = error.errors()[0]
    field = ".".join(str(part) for part in first.get("loc", ())) or None
    return ConfigError(first.get("msg", str(error)), field)


def load_run_config(
    config_file: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Build a RunConfig and check that all derived configs are valid.

    Raises:
        FileNotFoundError: If config_file does not exist
        ConfigError: If any value is invalid, naming the field
    """
    if config_file is not None and not Path(config_file).is_file():
        raise FileNotFoundError(f"Config file not found: {config_file}")
    try:
        config = RunConfig(_env_file=config_file, **(overrides or {}))
    except ValidationError as e:
        raise _config_error(e) from e
    return config.check()
