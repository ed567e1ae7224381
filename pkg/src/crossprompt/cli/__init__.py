"""Command-line interface: run configuration, pipeline commands and reports."""

from .commands import COMMANDS, parse_axes, run_training, sweep_points
from .main import build_parser, exit_code, main
from .settings import RunConfig, load_run_config

__all__ = [
    "COMMANDS",
    "RunConfig",
    "build_parser",
    "exit_code",
    "load_run_config",
    "main",
    "parse_axes",
    "run_training",
    "sweep_points",
]
