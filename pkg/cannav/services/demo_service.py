"""
Expert demonstrations as JSON lines: one header line, then one record per
step holding the observation seen and the expert action taken.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import ValidationError

from cannav.core.errors import ArtifactError, ConfigError, OracleError
from cannav.core.seeding import train_world_seed
from cannav.env.gridworld import NULL_ACTION, Observation, Task, generate, observe, step
from cannav.env.oracle import oracle_plan
from cannav.env.serialization import observation_from_dict, observation_to_dict
from cannav.env.vec_env import EpisodeContext
from cannav.schemas.artifact_schemas import ArtifactStamp, DemoHeader, DemoRecord
from cannav.schemas.config_schemas import EnvConfig, RunConfig

logger = logging.getLogger(__name__)


@dataclass
class DemoEpisode:
    world_seed: int
    episode_index: int
    task: Task
    observations: List[Observation]
    actions: List[int]

    def context(self) -> EpisodeContext:
        return EpisodeContext(
            task=self.task,
            observations=list(self.observations),
            prev_actions=[NULL_ACTION] + self.actions[:-1],
        )

    def __len__(self) -> int:
        return len(self.actions)


def expert_episode(world_seed: int, config: EnvConfig, episode_index: int = 0) -> DemoEpisode:
    world, state, task = generate(world_seed, config, episode_index)
    try:
        plan = oracle_plan(world, state, task, config)
    except OracleError as e:
        raise OracleError(f"{e.message} (world_seed={world_seed})") from e
    observations, actions = [], []
    observation = observe(world, state, task, config)
    for action in plan:
        observations.append(observation)
        actions.append(int(action))
        state, result = step(world, state, task, action, config)
        observation = result.observation
        if state.done:
            break
    return DemoEpisode(world_seed, episode_index, task, observations, actions)


class DemoService:
    """Generates, writes, loads and replays oracle demonstrations."""

    def __init__(self, config: RunConfig):
        self.config = config

    def generate(self, n_episodes: int) -> List[DemoEpisode]:
        # training-range seeds, so demos never overlap evaluation worlds
        return [
            expert_episode(train_world_seed(self.config.seed, 0, i), self.config.env)
            for i in range(n_episodes)
        ]

    def write(self, path: Union[str, Path], episodes: List[DemoEpisode], stamp: ArtifactStamp) -> Path:
        path = Path(path)
        header = DemoHeader(
            seed=self.config.seed,
            n_episodes=len(episodes),
            config=self.config.model_dump(mode="json"),
            stamp=stamp,
        )
        lines = [json.dumps(header.model_dump(mode="json"), sort_keys=True)]
        for e, episode in enumerate(episodes):
            for t, (obs, action) in enumerate(zip(episode.observations, episode.actions)):
                record = DemoRecord(
                    episode=e,
                    world_seed=episode.world_seed,
                    episode_index=episode.episode_index,
                    step=t,
                    action=action,
                    **observation_to_dict(obs),
                )
                lines.append(json.dumps(record.model_dump(mode="json"), sort_keys=True))
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as e:
            raise ArtifactError(f"Failed to write demos {path}: {e}") from e
        logger.info(f"Wrote {len(episodes)} demo episodes to {path}")
        return path


def load_demos(path: Union[str, Path], env_config: Optional[EnvConfig] = None) -> Tuple[DemoHeader, List[DemoEpisode]]:
    """Parse a demo file; tasks are regenerated from (world_seed, episode_index)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Demo file not found: {path}")
    lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    if not lines:
        raise ConfigError(f"Demo file {path} has no header")
    try:
        header = DemoHeader.model_validate_json(lines[0])
        records = [DemoRecord.model_validate_json(line) for line in lines[1:]]
        if env_config is None:
            env_config = RunConfig.model_validate(header.config).env
    except ValidationError as e:
        raise ConfigError(f"Demo file {path} is malformed: {e}") from e

    grouped: Dict[int, List[DemoRecord]] = {}
    for record in records:
        grouped.setdefault(record.episode, []).append(record)

    episodes = []
    for key in sorted(grouped):
        rows = sorted(grouped[key], key=lambda r: r.step)
        _, _, task = generate(rows[0].world_seed, env_config, rows[0].episode_index)
        observations = [observation_from_dict(r.model_dump(), env_config.num_categories) for r in rows]
        episodes.append(DemoEpisode(rows[0].world_seed, rows[0].episode_index, task, observations, [r.action for r in rows]))
    return header, episodes


def replay(episode: DemoEpisode, config: EnvConfig) -> bool:
    """Re-run the recorded actions through the simulator; True when the episode ends in success."""
    world, state, task = generate(episode.world_seed, config, episode.episode_index)
    success = False
    for action in episode.actions:
        state, result = step(world, state, task, action, config)
        success = result.info.success
        if state.done:
            break
    return success
