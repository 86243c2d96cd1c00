import argparse
import json
import logging
from pathlib import Path

from cannav.core.errors import ArtifactError
from cannav.core.seeding import EVAL_SEED_BASE, eval_seeds
from cannav.env.gridworld import generate
from cannav.env.serialization import world_to_dict
from cannav.models.agent import NavigationAgent
from cannav.schemas.artifact_schemas import ReportDocument
from cannav.services.artifact_service import ArtifactService, stamp_for
from cannav.services.evaluation_service import (
    evaluate,
    oracle_actor_factory,
    policy_actor_factory,
    random_actor_factory,
)

logger = logging.getLogger(__name__)

EVAL_LOG_COLUMNS = ["checkpoint", "step", "sr", "spl", "gd", "n"]


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Evaluate a checkpoint on held-out worlds")
    parser.add_argument("--checkpoint", required=True, help="Checkpoint JSON")
    parser.add_argument("--episodes", type=int, default=50, help="Number of evaluation worlds")
    parser.add_argument("--episodes-per-seed", type=int, default=1)
    parser.add_argument("--seed-start", type=int, default=EVAL_SEED_BASE)
    parser.add_argument("--sample", action="store_true", help="Sample actions instead of argmax")
    parser.add_argument("--actor", choices=["policy", "oracle", "random"], default="policy")
    parser.add_argument("--allow-seed-overlap", action="store_true")
    parser.add_argument("--output", help="Directory for eval_report.json (default: the checkpoint's directory)")
    parser.add_argument("--dump-worlds", action="store_true", help="Also write each evaluation world as JSON lines")
    parser.set_defaults(func=run)


def run(args: argparse.Namespace) -> int:
    checkpoint = Path(args.checkpoint)
    agent, _, document = NavigationAgent.from_checkpoint(checkpoint)
    config = agent.config
    if args.actor == "oracle":
        factory = oracle_actor_factory(config.env)
    elif args.actor == "random":
        factory = random_actor_factory()
    else:
        factory = policy_actor_factory(agent.policy, greedy=not args.sample)

    seeds = eval_seeds(args.episodes, args.seed_start)
    report, _ = evaluate(
        factory,
        config.env,
        seeds,
        episodes_per_seed=args.episodes_per_seed,
        allow_seed_overlap=args.allow_seed_overlap,
    )

    stamp = stamp_for(config)
    output_dir = Path(args.output) if args.output else checkpoint.parent
    document_out = ReportDocument.from_report(report, stamp, checkpoint=checkpoint.name, step=document.step)
    with ArtifactService(output_dir, stamp) as artifacts:
        artifacts.write_model("eval_report.json", document_out)
        artifacts.append_csv(
            "eval_log.csv",
            EVAL_LOG_COLUMNS,
            [checkpoint.name, document.step, report.sr, report.spl, report.gd, report.n_episodes],
        )
        if args.dump_worlds:
            _dump_worlds(artifacts, config.env, seeds, args.episodes_per_seed)
    print(json.dumps({"sr": report.sr, "spl": report.spl, "gd": report.gd, "n": report.n_episodes}, sort_keys=True))
    return 0


def _dump_worlds(artifacts: ArtifactService, env_config, seeds, episodes_per_seed: int) -> None:
    lines = []
    for seed in seeds:
        for k in range(episodes_per_seed):
            world, state, task = generate(seed, env_config, k)
            lines.append(json.dumps({"seed": seed, "episode_index": k, **world_to_dict(world, state, task)}, sort_keys=True))
    path = artifacts.path("eval_worlds.jsonl")
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"Failed to write {path}: {e}") from e
    logger.info(f"Wrote {len(lines)} evaluation worlds to {path}")
