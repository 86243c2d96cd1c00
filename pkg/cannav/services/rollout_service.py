"""
On-policy rollout collection and generalized advantage estimation.

A rollout is stored as episode segments: the steps one environment slot took
within one episode during this rollout, together with that episode's context
from its first step. A segment never spans an episode boundary, so causal
transitions built inside a segment are always within one episode.
"""
import logging
from dataclasses import dataclass, field
from typing import Iterator, List, Optional

import numpy as np

from cannav.core.errors import ContractError, EnvironmentStepError
from cannav.env.gridworld import NUM_ACTIONS
from cannav.env.vec_env import EpisodeContext, VecEnv
from cannav.models.policy import NavigationPolicy

logger = logging.getLogger(__name__)


@dataclass
class EpisodeSegment:
    env_index: int
    episode: int
    context: EpisodeContext  # observations from episode start through the segment's last step
    offset: int  # context index of the segment's first step
    actions: List[int] = field(default_factory=list)
    rewards: List[float] = field(default_factory=list)
    dones: List[bool] = field(default_factory=list)
    values: List[float] = field(default_factory=list)
    log_probs: List[float] = field(default_factory=list)
    bootstrap_value: float = 0.0
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def terminal(self) -> bool:
        return bool(self.dones) and self.dones[-1]

    @property
    def end(self) -> int:
        return self.offset + len(self.actions)

    def transition_positions(self) -> range:
        """Context indices t whose (t-1, t) pair forms a causal transition inside this segment."""
        return range(max(self.offset, 1), self.end)


@dataclass
class RolloutBuffer:
    num_envs: int
    horizon: int
    segments: List[EpisodeSegment] = field(default_factory=list)

    def __len__(self) -> int:
        return sum(len(s) for s in self.segments)

    def __iter__(self) -> Iterator[EpisodeSegment]:
        return iter(self.segments)

    def _column(self, name: str) -> np.ndarray:
        parts = [np.asarray(getattr(s, name), dtype=np.float64) for s in self.segments if len(s)]
        return np.concatenate(parts) if parts else np.zeros(0)

    @property
    def rewards(self) -> np.ndarray:
        return self._column("rewards")

    @property
    def values(self) -> np.ndarray:
        return self._column("values")

    @property
    def log_probs(self) -> np.ndarray:
        return self._column("log_probs")

    @property
    def actions(self) -> np.ndarray:
        return self._column("actions").astype(np.int64)

    @property
    def advantages(self) -> np.ndarray:
        if any(s.advantages is None for s in self.segments):
            raise ContractError("Advantages have not been computed for this buffer")
        return self._column("advantages")

    @property
    def returns(self) -> np.ndarray:
        if any(s.returns is None for s in self.segments):
            raise ContractError("Returns have not been computed for this buffer")
        return self._column("returns")

    @property
    def num_transitions(self) -> int:
        return sum(len(s.transition_positions()) for s in self.segments)


def _open_segment(envs: VecEnv, index: int) -> EpisodeSegment:
    slot = envs.slots[index]
    return EpisodeSegment(
        env_index=index,
        episode=slot.episode,
        context=slot.context,
        offset=len(slot.context) - 1,
    )


def collect_rollouts(
    policy: NavigationPolicy,
    envs: VecEnv,
    horizon: int,
    rng: Optional[np.random.Generator] = None,
) -> RolloutBuffer:
    """
    Sample `horizon` steps in every slot from the softmax policy.

    Actions come from each slot's own generator unless `rng` is given. Each
    step re-feeds the episode context from its start.
    """
    if horizon < 1:
        raise ContractError(f"Rollout horizon must be positive, got {horizon}")
    buffer = RolloutBuffer(num_envs=envs.num_envs, horizon=horizon)
    open_segments = [_open_segment(envs, i) for i in range(envs.num_envs)]

    for t in range(horizon):
        for i in range(envs.num_envs):
            segment = open_segments[i]
            log_probs, value = policy.act_step(envs.slots[i].context)
            sampler = rng if rng is not None else envs.action_rngs[i]
            action = int(sampler.choice(NUM_ACTIONS, p=np.exp(log_probs) / np.exp(log_probs).sum()))
            try:
                result = envs.step(i, action)
            except EnvironmentStepError as e:
                logger.error(f"Rollout failed at step {t} of env {i}: {e.message}", exc_info=True)
                raise

            segment.actions.append(action)
            segment.rewards.append(result.reward)
            segment.dones.append(result.done)
            segment.values.append(value)
            segment.log_probs.append(float(log_probs[action]))
            if result.done:
                segment.context = segment.context.truncated(segment.end)
                buffer.segments.append(segment)
                open_segments[i] = _open_segment(envs, i)

    for i, segment in enumerate(open_segments):
        if not len(segment):
            continue
        _, segment.bootstrap_value = policy.act_step(envs.slots[i].context)
        segment.context = segment.context.truncated(segment.end)
        buffer.segments.append(segment)

    buffer.segments.sort(key=lambda s: (s.env_index, s.episode))
    logger.debug(f"Collected {len(buffer)} steps in {len(buffer.segments)} segments")
    return buffer


def segment_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_value: float,
    gamma: float,
    lam: float,
) -> np.ndarray:
    advantages = np.zeros(len(rewards), dtype=np.float64)
    gae = 0.0
    next_value = bootstrap_value
    for t in reversed(range(len(rewards))):
        nonterminal = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * next_value * nonterminal - values[t]
        gae = delta + gamma * lam * nonterminal * gae
        advantages[t] = gae
        next_value = values[t]
    return advantages


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float) -> RolloutBuffer:
    """Fill advantages and returns (advantage + value) of every segment in place."""
    for segment in buffer.segments:
        values = np.asarray(segment.values, dtype=np.float64)
        segment.advantages = segment_gae(
            np.asarray(segment.rewards, dtype=np.float64),
            values,
            np.asarray(segment.dones, dtype=bool),
            0.0 if segment.terminal else segment.bootstrap_value,
            gamma,
            lam,
        )
        segment.returns = segment.advantages + values
    return buffer


def normalize(advantages: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    if advantages.size < 2:
        return advantages - advantages.mean() if advantages.size else advantages
    return (advantages - advantages.mean()) / (advantages.std() + eps)
