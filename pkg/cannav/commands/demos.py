import argparse
import logging
from pathlib import Path

from cannav.core.errors import UsageError
from cannav.services.artifact_service import ArtifactService, stamp_for
from cannav.services.config_service import load_run_config
from cannav.services.demo_service import DemoService

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen-demos", help="Write oracle demonstrations as JSON lines")
    parser.add_argument("--config", required=True)
    parser.add_argument("-n", "--episodes", type=int, required=True, help="Number of demo episodes")
    parser.add_argument("--seed", type=int, help="Override the run seed")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("-o", "--output", help="Demo file (default: <output_dir>/demos.jsonl)")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    if args.episodes < 0:
        raise UsageError("--episodes must be non-negative")
    config = load_run_config(args.config, args.override, args.seed)
    path = Path(args.output) if args.output else Path(config.output_dir) / "demos.jsonl"
    service = DemoService(config)
    with ArtifactService(path.parent, stamp_for(config)) as artifacts:
        service.write(path, service.generate(args.episodes), artifacts.stamp)
    print(path)
    return 0
