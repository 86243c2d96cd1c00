"""
A collection of independent environment slots with auto-reset.

Each slot owns its own world-seed counter and action-sampling generator,
both derived from (run seed, slot index).
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from cannav.core.errors import EnvironmentStepError
from cannav.core.seeding import ROLLOUT, stream, train_world_seed
from cannav.env.gridworld import (
    NULL_ACTION,
    AgentState,
    GridWorld,
    Observation,
    StepResult,
    Task,
    generate,
    observe,
    step,
)
from cannav.schemas.config_schemas import EnvConfig

logger = logging.getLogger(__name__)


@dataclass
class EpisodeContext:
    """Observations since episode start, aligned with the previous action of each step."""
    task: Task
    observations: List[Observation] = field(default_factory=list)
    prev_actions: List[int] = field(default_factory=list)

    @classmethod
    def start(cls, task: Task, observation: Observation) -> "EpisodeContext":
        return cls(task=task, observations=[observation], prev_actions=[NULL_ACTION])

    def extend(self, action: int, observation: Observation) -> None:
        self.observations.append(observation)
        self.prev_actions.append(int(action))

    def truncated(self, length: int) -> "EpisodeContext":
        return EpisodeContext(
            task=self.task,
            observations=self.observations[:length],
            prev_actions=self.prev_actions[:length],
        )

    def __len__(self) -> int:
        return len(self.observations)


@dataclass
class EnvSlot:
    index: int
    episode: int
    world_seed: int
    world: GridWorld
    state: AgentState
    task: Task
    context: EpisodeContext


class VecEnv:
    def __init__(self, config: EnvConfig, num_envs: int, master_seed: int):
        self.config = config
        self.master_seed = master_seed
        self.action_rngs: List[np.random.Generator] = [stream(master_seed, ROLLOUT, i) for i in range(num_envs)]
        self.slots: List[EnvSlot] = [self._new_episode(i, 0) for i in range(num_envs)]

    @property
    def num_envs(self) -> int:
        return len(self.slots)

    def _new_episode(self, index: int, episode: int) -> EnvSlot:
        world_seed = train_world_seed(self.master_seed, index, episode)
        world, state, task = generate(world_seed, self.config)
        observation = observe(world, state, task, self.config)
        return EnvSlot(
            index=index,
            episode=episode,
            world_seed=world_seed,
            world=world,
            state=state,
            task=task,
            context=EpisodeContext.start(task, observation),
        )

    def step(self, index: int, action: int) -> StepResult:
        """Advance slot `index`; a finished episode is replaced by a fresh one."""
        slot = self.slots[index]
        try:
            new_state, result = step(slot.world, slot.state, slot.task, action, self.config)
        except EnvironmentStepError as e:
            raise EnvironmentStepError(
                f"{e.message} (env={index}, episode={slot.episode}, world_seed={slot.world_seed})"
            ) from e
        if result.done:
            self.slots[index] = self._new_episode(index, slot.episode + 1)
        else:
            slot.state = new_state
            slot.context.extend(action, result.observation)
        return result
