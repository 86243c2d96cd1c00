import argparse
import logging

from cannav.core.errors import UsageError
from cannav.services.plot_service import PlotService

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("plot", help="Render SR-vs-steps curves from training logs as SVG")
    parser.add_argument("--logs", required=True, help="Comma list of CSV logs")
    parser.add_argument("-o", "--output", required=True, help="SVG file")
    parser.add_argument("--title", default="Success rate during training")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    logs = [p.strip() for p in args.logs.split(",") if p.strip()]
    if not logs:
        raise UsageError("--logs needs at least one CSV file")
    path, curves = PlotService(args.title).plot(logs, args.output)
    skipped = sum(c.skipped for c in curves)
    if skipped:
        logger.warning(f"{skipped} malformed rows skipped across {len(curves)} logs")
    print(path)
    return 0
