import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from cannav import __version__
from cannav.commands import ablate, cmi_report, demos, evaluate, plot, train
from cannav.core.config import settings
from cannav.core.errors import CanNavError
from cannav.numeric.tensor import set_default_dtype

# Configure logging
logging.basicConfig(
    level=getattr(logging, settings.log_level.upper()),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    stream=sys.stderr,
)

logger = logging.getLogger(__name__)

COMMANDS = (train, evaluate, ablate, cmi_report, demos, plot)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cannav",
        description="Causality-aware navigation: train, evaluate and analyze gridworld agents",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def _categorize(exc: Exception) -> dict:
    """Map an unexpected exception onto the error_code/message shape used by CanNavError."""
    if isinstance(exc, FileNotFoundError):
        return {"error_code": "RESOURCE_NOT_FOUND", "message": str(exc) or "The requested file was not found."}
    if isinstance(exc, (ValueError, TypeError)):
        return {"error_code": "INVALID_REQUEST", "message": f"Invalid request: {exc}"}
    if isinstance(exc, KeyError):
        return {"error_code": "MISSING_REQUIRED_FIELD", "message": f"Required field missing: {exc}"}
    if isinstance(exc, (PermissionError, OSError)):
        return {"error_code": "IO_ERROR", "message": str(exc)}
    return {"error_code": "INTERNAL_ERROR", "message": "An unexpected error occurred"}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        set_default_dtype(settings.float_dtype)
        return args.func(args)
    except CanNavError as exc:
        logger.error(f"{args.command} failed: {exc.error_code}: {exc.message}")
        print(json.dumps(exc.to_dict()), file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        logger.warning(f"{args.command} interrupted")
        return 1
    except Exception as exc:
        logger.error(f"Unhandled exception in {args.command}: {type(exc).__name__}: {exc}", exc_info=True)
        print(json.dumps(_categorize(exc)), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
