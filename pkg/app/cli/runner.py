"""Entry point of the mtw command line."""

import argparse
import logging
import os
import sys
from collections.abc import Sequence

from dotenv import load_dotenv

from app.cli.commands import register_commands, resolve_run
from app.common.exceptions import MergeTreeError, UsageError
from app.config.config import config
from app.services import RunConfig

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so `run` owns the exit code."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mtw", description="Wasserstein distances, geodesics and barycenters of merge trees.")
    parser.add_argument(
        "--log-level",
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="override the configured log level",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command", required=True)
    register_commands(subparsers)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """
    Parse the arguments and run one subcommand.

    Returns:
        0 on success, 1 on a domain error, 2 on a usage error.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.log_level:
            logging.getLogger().setLevel(args.log_level)
        run_config = resolve_run(args, RunConfig.from_config())
        logger.debug(f"Running {run_config.command} with {run_config}")
        return args.handler(args, run_config)
    except UsageError as e:
        logger.error(str(e))
        parser.print_usage(sys.stderr)
        return 2
    except MergeTreeError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    except SystemExit as e:
        # --help
        return e.code if isinstance(e.code, int) else 0


def load_environment() -> None:
    """Load .env.local if it exists, otherwise .env."""
    env_file = ".env.local" if os.path.exists(".env.local") else ".env"
    if os.path.exists(env_file):
        load_dotenv(env_file)


def configure_logging() -> None:
    """Rich logging on stderr; stdout carries command results only."""
    level = config.get("LOG_LEVEL") or "WARNING"
    try:
        from rich.console import Console
        from rich.logging import RichHandler

        console = Console(stderr=True)
        logging.basicConfig(
            level=level,
            format="%(message)s",
            handlers=[RichHandler(console=console, rich_tracebacks=True, show_time=False, show_path=False)],
        )
    except ImportError:
        logging.basicConfig(level=level, format="%(levelname)s:%(name)s:%(message)s", stream=sys.stderr)


def main() -> None:
    load_environment()
    configure_logging()
    sys.exit(run(sys.argv[1:]))
