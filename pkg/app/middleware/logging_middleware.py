# app/middleware/logging_middleware.py
import argparse
import time
import uuid
from typing import Callable

import structlog

logger = structlog.get_logger()

Handler = Callable[[argparse.Namespace], int]


class CommandLoggingMiddleware:
    """Wraps command dispatch with run-scoped logging."""

    def __init__(self, call_next: Handler):
        self.call_next = call_next

    def __call__(self, args: argparse.Namespace) -> int:
        run_id = str(uuid.uuid4())[:8]
        start_time = time.time()

        # Bind run ID to logger
        structlog.contextvars.clear_contextvars()
        structlog.contextvars.bind_contextvars(run_id=run_id)

        logger.info("command_started", command=args.command,
                    subcommand=getattr(args, "action", None))

        try:
            exit_code = self.call_next(args)

            process_time = (time.time() - start_time) * 1000
            logger.info(
                "command_completed",
                command=args.command,
                exit_code=exit_code,
                duration_ms=round(process_time, 2),
            )
            return exit_code

        except Exception as e:
            process_time = (time.time() - start_time) * 1000
            logger.error(
                "command_failed",
                command=args.command,
                error=str(e),
                duration_ms=round(process_time, 2),
            )
            raise
