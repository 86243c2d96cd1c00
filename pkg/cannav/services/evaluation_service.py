"""
Episode evaluation: SR, SPL and goal distance over held-out world seeds.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from cannav.core.config import settings
from cannav.core.errors import EmptyBatchError, SeedOverlapError
from cannav.core.seeding import EVAL, EVAL_SEED_BASE, stream
from cannav.env.gridworld import (
    NUM_ACTIONS,
    AgentState,
    GridWorld,
    Observation,
    Task,
    generate,
    goal_distance,
    observe,
    step,
)
from cannav.env.oracle import oracle_action, shortest_path_moves
from cannav.env.vec_env import EpisodeContext
from cannav.models.policy import NavigationPolicy
from cannav.schemas.config_schemas import EnvConfig
from cannav.schemas.metrics_schemas import EpisodeRecord, MetricsReport

logger = logging.getLogger(__name__)


class EpisodeActor(Protocol):
    def reset(self, world: GridWorld, state: AgentState, task: Task, observation: Observation) -> None:
        ...

    def choose(self, state: AgentState) -> int:
        ...

    def observe(self, action: int, observation: Observation) -> None:
        ...


class NetworkActor:
    """Acts from the policy's distribution over the episode context; argmax when greedy."""

    def __init__(self, policy: NavigationPolicy, greedy: bool = True, rng: Optional[np.random.Generator] = None):
        self.policy = policy
        self.greedy = greedy
        self.rng = rng or np.random.default_rng(0)
        self.context: Optional[EpisodeContext] = None

    def reset(self, world, state, task, observation) -> None:
        self.context = EpisodeContext.start(task, observation)

    def choose(self, state: AgentState) -> int:
        log_probs, _ = self.policy.act_step(self.context)
        if self.greedy:
            return int(np.argmax(log_probs))
        p = np.exp(log_probs)
        return int(self.rng.choice(NUM_ACTIONS, p=p / p.sum()))

    def observe(self, action: int, observation: Observation) -> None:
        self.context.extend(action, observation)


class OracleActor:
    def __init__(self, config: EnvConfig):
        self.config = config
        self.world: Optional[GridWorld] = None
        self.task: Optional[Task] = None

    def reset(self, world, state, task, observation) -> None:
        self.world, self.task = world, task

    def choose(self, state: AgentState) -> int:
        return int(oracle_action(self.world, state, self.task, self.config))

    def observe(self, action: int, observation: Observation) -> None:
        pass


class RandomActor:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def reset(self, world, state, task, observation) -> None:
        pass

    def choose(self, state: AgentState) -> int:
        return int(self.rng.integers(NUM_ACTIONS))

    def observe(self, action: int, observation: Observation) -> None:
        pass


ActorFactory = Callable[[int, int], EpisodeActor]


def spl(records: Sequence[EpisodeRecord]) -> float:
    """(1/N) sum S_i * l_i / max(p_i, l_i)."""
    if not records:
        raise EmptyBatchError("SPL of an empty episode set")
    total = 0.0
    for r in records:
        if r.success:
            total += r.shortest_path / max(r.path_length, r.shortest_path)
    return total / len(records)


def run_episode(actor: EpisodeActor, config: EnvConfig, seed: int, episode_index: int = 0) -> EpisodeRecord:
    world, state, task = generate(seed, config, episode_index)
    shortest = shortest_path_moves(world, state, task, config)
    observation = observe(world, state, task, config)
    actor.reset(world, state, task, observation)

    path_length = 0
    success = False
    while not state.done:
        action = actor.choose(state)
        previous = state.position
        state, result = step(world, state, task, action, config)
        path_length += int(state.position != previous)
        success = result.info.success
        actor.observe(action, result.observation)

    final = goal_distance(world, task, state.position)
    return EpisodeRecord(
        seed=seed,
        episode_index=episode_index,
        success=success,
        path_length=path_length,
        shortest_path=max(shortest, 1),
        final_geodesic=int(final) if final is not None else 0,
        steps=state.steps,
    )


def summarize(records: Sequence[EpisodeRecord]) -> MetricsReport:
    if not records:
        raise EmptyBatchError("Cannot summarize an empty episode set")
    per_seed: Dict[str, Dict[str, float]] = {}
    seeds = sorted({r.seed for r in records})
    for seed in seeds:
        subset = [r for r in records if r.seed == seed]
        per_seed[str(seed)] = {
            "sr": float(np.mean([r.success for r in subset])),
            "spl": spl(subset),
            "gd": float(np.mean([r.final_geodesic for r in subset])),
            "n": float(len(subset)),
        }
    sr = float(np.mean([r.success for r in records]))
    return MetricsReport(
        sr=sr,
        spl=spl(records),
        gd=float(np.mean([r.final_geodesic for r in records])),
        n_episodes=len(records),
        seeds=seeds,
        per_seed=per_seed,
    )


def check_seeds(seeds: Sequence[int], allow_seed_overlap: bool = False) -> None:
    overlap = [s for s in seeds if s < EVAL_SEED_BASE]
    if overlap and not allow_seed_overlap:
        raise SeedOverlapError(
            f"Evaluation seeds {overlap[:5]} fall in the training range (< {EVAL_SEED_BASE}); "
            "pass allow_seed_overlap to override"
        )
    if overlap:
        logger.warning(f"Evaluating on {len(overlap)} seeds from the training range")


def evaluate(
    actor_factory: ActorFactory,
    config: EnvConfig,
    seeds: Sequence[int],
    episodes_per_seed: int = 1,
    allow_seed_overlap: bool = False,
    workers: Optional[int] = None,
) -> Tuple[MetricsReport, List[EpisodeRecord]]:
    """
    Run `episodes_per_seed` episodes on every seed and aggregate.
    `actor_factory(seed, episode_index)` builds a fresh actor per episode.
    """
    if not seeds or episodes_per_seed < 1:
        raise EmptyBatchError("Evaluation needs at least one seed and one episode per seed")
    check_seeds(seeds, allow_seed_overlap)
    jobs = [(seed, k) for seed in seeds for k in range(episodes_per_seed)]
    workers = workers or settings.eval_workers

    def _run(job: Tuple[int, int]) -> EpisodeRecord:
        seed, k = job
        return run_episode(actor_factory(seed, k), config, seed, k)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run, jobs))
    else:
        records = [_run(job) for job in jobs]

    report = summarize(records)
    logger.info(
        f"Evaluated {report.n_episodes} episodes on {len(seeds)} seeds: "
        f"SR={report.sr:.3f} SPL={report.spl:.3f} GD={report.gd:.2f}"
    )
    return report, records


def policy_actor_factory(policy: NavigationPolicy, greedy: bool = True) -> ActorFactory:
    def factory(seed: int, episode_index: int) -> EpisodeActor:
        return NetworkActor(policy, greedy=greedy, rng=stream(seed, EVAL, episode_index))
    return factory


def oracle_actor_factory(config: EnvConfig) -> ActorFactory:
    return lambda seed, episode_index: OracleActor(config)


def random_actor_factory() -> ActorFactory:
    return lambda seed, episode_index: RandomActor(stream(seed, EVAL, episode_index))


def evaluate_policy(
    policy: NavigationPolicy,
    config: EnvConfig,
    seeds: Sequence[int],
    episodes_per_seed: int = 1,
    greedy: bool = True,
    allow_seed_overlap: bool = False,
) -> Tuple[MetricsReport, List[EpisodeRecord]]:
    return evaluate(
        policy_actor_factory(policy, greedy),
        config,
        seeds,
        episodes_per_seed=episodes_per_seed,
        allow_seed_overlap=allow_seed_overlap,
    )
