"""
Command-line entry point.

    crossprompt gen --seed 7
    crossprompt pretrain --config configs/mini.env
    crossprompt train --config configs/mini.env --iterations 300
    crossprompt eval --config configs/mini.env
    crossprompt sweep --config configs/mini.env --axis depth=0,2,4 --axis plen=1,2,4,8
    crossprompt inspect-pool --pool-path runs/default/pool.cpp

Every RunConfig field is also a flag (`--prompt-length 4`, `--few-shot`).
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from .. import __version__
from ..exceptions import (
    ConfigError,
    ContractViolation,
    CrossPromptError,
    DegenerateInputError,
    FormatError,
    PretrainingFailure,
)
from .commands import COMMANDS
from .settings import RunConfig, load_run_config

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_MISSING_FILE = 3
EXIT_FORMAT = 4
EXIT_CONTRACT = 5
EXIT_PRETRAINING = 6

COMMAND_HELP = {
    "gen": "generate the synthetic multi-domain benchmark",
    "pretrain": "pretrain the dual-encoder backbone on the base set",
    "train": "train the task sequence and write the pool and metrics",
    "eval": "re-evaluate a saved pool",
    "sweep": "train once per point of a hyperparameter grid",
    "inspect-pool": "print pool entries and key similarities",
}


def _config_parser() -> argparse.ArgumentParser:
    """Parent parser with --config and one flag per RunConfig field."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", type=Path, default=None, help="env-style config file")
    group = parser.add_argument_group("run configuration")
    for name, field in RunConfig.model_fields.items():
        flag = "--" + name.replace("_", "-")
        help_text = field.description or f"default: {field.default}"
        if field.annotation is bool:
            group.add_argument(
                flag,
                dest=name,
                action=argparse.BooleanOptionalAction,
                default=argparse.SUPPRESS,
                help=help_text,
            )
        else:
            group.add_argument(flag, dest=name, default=argparse.SUPPRESS, help=help_text)
    return parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossprompt",
        description="Cross-modal prompt continual learning on a frozen dual encoder",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _config_parser()
    for command, help_text in COMMAND_HELP.items():
        sub = subparsers.add_parser(command, parents=[common], help=help_text)
        if command == "sweep":
            sub.add_argument(
                "--axis",
                action="append",
                default=[],
                metavar="NAME=V1,V2",
                help="sweep axis; repeat for a grid (aliases: depth, plen, gamma, lr, mode)",
            )
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.getLogger().setLevel(getattr(logging, level, logging.INFO))


def exit_code(error: BaseException) -> int:
    """Exit status for an exception raised by a command."""
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, FileNotFoundError):
        return EXIT_MISSING_FILE
    if isinstance(error, FormatError):
        return EXIT_FORMAT
    if isinstance(error, PretrainingFailure):
        return EXIT_PRETRAINING
    if isinstance(error, (ContractViolation, DegenerateInputError)):
        return EXIT_CONTRACT
    return EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides: Dict[str, object] = {
        name: value for name, value in vars(args).items() if name in RunConfig.model_fields
    }

    try:
        config = load_run_config(args.config, overrides)
        configure_logging(config.log_level)
        logger.debug("Running %s with config hash %s", args.command, config.config_hash())
        return COMMANDS[args.command](config, args)
    except (CrossPromptError, FileNotFoundError) as e:
        code = exit_code(e)
        logger.error("%s failed: %s", args.command, e)
        return code


if __name__ == "__main__":
    sys.exit(main())
