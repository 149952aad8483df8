import argparse
import logging
import sys
from typing import List, Optional

import structlog
from pydantic import ValidationError

from app.cli.commands import augment, blocks, blur, compare, comply, dataset, evaluate
from app.config import Settings, get_settings
from app.middleware.logging_middleware import CommandLoggingMiddleware
from app.utils.exceptions import GestureQCException

# Map string log levels to logging module constants
LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
    "CRITICAL": logging.CRITICAL,
}

COMMANDS = (blur, dataset, evaluate, compare, blocks, augment, comply)

logger = structlog.get_logger()


def configure_logging(settings: Settings) -> None:
    """Structured logs go to stderr; stdout stays free for command output."""
    structlog.configure(
        processors=[
            structlog.contextvars.merge_contextvars,
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.ConsoleRenderer() if settings.debug
            else structlog.processors.JSONRenderer()
        ],
        wrapper_class=structlog.make_filtering_bound_logger(
            LOG_LEVELS.get(settings.log_level.upper(), logging.INFO)
        ),
        context_class=dict,
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gestureqc",
        description="Blur QC, detection evaluation and protocol auditing for hand-gesture video frames.",
    )
    parser.add_argument("--version", action="version",
                        version=f"{settings.app_name} {settings.app_version}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse, dispatch and map failures to exit codes: 0 ok, 1 failed, 2 usage."""
    settings = get_settings()
    configure_logging(settings)
    parser = build_parser(settings)

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help/--version and 2 for bad usage
        return e.code if isinstance(e.code, int) else 2

    dispatch = CommandLoggingMiddleware(args.handler)
    try:
        return dispatch(args)
    except GestureQCException as e:
        print(f"error: {e.detail}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
