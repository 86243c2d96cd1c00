import argparse
import json
import logging
from pathlib import Path

from cannav.models.agent import NavigationAgent
from cannav.services.artifact_service import ArtifactService, stamp_for
from cannav.services.cmi_service import CMIService

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("cmi-report", help="Estimate I(O_t; A_t-1 | O_t-1) for a checkpoint")
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--k", type=int, help="Mixture size (default: causal.cmi_k)")
    parser.add_argument("--rows", type=int, help="Evaluated rows (default: causal.cmi_rows)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--envs", type=int, help="Environments for the fresh rollout")
    parser.add_argument("--horizon", type=int, help="Rollout horizon for the fresh rollout")
    parser.add_argument("--output", help="Directory for cmi_report.csv (default: the checkpoint's directory)")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    checkpoint = Path(args.checkpoint)
    agent, _, _ = NavigationAgent.from_checkpoint(checkpoint)
    causal = agent.config.causal
    output_dir = Path(args.output) if args.output else checkpoint.parent
    with ArtifactService(output_dir, stamp_for(agent.config)) as artifacts:
        estimate, path = CMIService(agent).report(
            artifacts,
            checkpoint.name,
            args.k or causal.cmi_k,
            args.rows or causal.cmi_rows,
            args.seed,
            num_envs=args.envs,
            horizon=args.horizon,
        )
    print(json.dumps({**estimate.to_dict(), "report": str(path)}, sort_keys=True))
    return 0
