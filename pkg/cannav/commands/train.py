import argparse
import json
import logging

from cannav.core.errors import UsageError
from cannav.services.config_service import load_run_config
from cannav.services.training_service import train

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train an agent (PPO or behavior cloning)")
    parser.add_argument("--config", help="Run configuration JSON")
    parser.add_argument("--seed", type=int, help="Override the run seed")
    parser.add_argument("--output", help="Override the output directory")
    parser.add_argument(
        "--override", action="append", default=[], metavar="KEY=VALUE",
        help="Dotted config override, e.g. ppo.alpha=0 (repeatable)",
    )
    parser.add_argument("--print-config", action="store_true", help="Print the validated config and exit")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, args.override, args.seed, args.output)
    if args.print_config:
        print(json.dumps(config.model_dump(mode="json"), indent=2, sort_keys=True))
        return 0
    if args.config is None:
        raise UsageError("train needs --config (or --print-config to see the defaults)")

    result = train(config)
    print(json.dumps(
        {
            "output_dir": str(result.output_dir),
            "step": result.final_step,
            "best_sr": result.best_sr,
            "sr": result.report.sr,
            "spl": result.report.spl,
            "gd": result.report.gd,
        },
        sort_keys=True,
    ))
    return 0
