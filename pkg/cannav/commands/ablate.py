import argparse
import logging
from pathlib import Path

from cannav.core.config import settings
from cannav.services.ablation_service import AblationService, parse_seeds, parse_variants
from cannav.services.config_service import load_run_config

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("ablate", help="Train every (variant, seed) pair and summarize")
    parser.add_argument("--config", required=True, help="Base run configuration JSON")
    parser.add_argument(
        "--variants", default="can,transformer_no_causal,causal_rnn,rnn_no_causal",
        help="Comma list from can, transformer_no_causal, causal_rnn, rnn_no_causal",
    )
    parser.add_argument("--seeds", default="0..4", help="Inclusive range `0..4` or comma list")
    parser.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    parser.add_argument("--output", help="Sweep directory (default: <output_root>/ablate_<config hash>)")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    variants = parse_variants(args.variants)
    seeds = parse_seeds(args.seeds)
    config = load_run_config(args.config, args.override)
    output_dir = Path(args.output) if args.output else Path(settings.output_root) / f"ablate_{config.config_hash()}"
    result = AblationService(config, variants, seeds, output_dir).run()
    logger.info(f"Ablation finished: {len(result.runs)} runs, summary at {result.summary_path}")
    print(result.summary_path)
    return 0
