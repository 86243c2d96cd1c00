"""
PPO update with the causal auxiliary term.

Minimized loss per minibatch:
    -clipped_surrogate + value_coef * value_mse - entropy_coef * entropy + alpha * causal_loss
"""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from cannav.core.errors import EmptyBatchError, NonFiniteError
from cannav.models.agent import NavigationAgent
from cannav.models.causal import TransitionBatch
from cannav.models.policy import PolicyOutput, action_log_probs, entropy
from cannav.numeric.optim import Adam
from cannav.numeric.tensor import Tensor, concat, minimum
from cannav.schemas.config_schemas import CausalConfig, PPOConfig
from cannav.services.rollout_service import EpisodeSegment, RolloutBuffer, normalize

logger = logging.getLogger(__name__)


@dataclass
class PPOStats:
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    causal_loss: float = 0.0
    clip_fraction: float = 0.0
    surrogate: float = 0.0
    updates: int = 0

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def segment_transitions(
    output: PolicyOutput, positions: Sequence[int], detach_targets: bool
) -> Optional[TransitionBatch]:
    """(h_visual[t-1], h_action[t], h_visual[t]) for each context index t."""
    positions = np.asarray(list(positions), dtype=np.int64)
    if positions.size == 0:
        return None
    h_next = output.h_visual[positions]
    return TransitionBatch(
        h_o=output.h_visual[positions - 1],
        h_a=output.h_action[positions],
        h_next=h_next.detach() if detach_targets else h_next,
    )


def causal_term(
    agent: NavigationAgent, batches: List[Optional[TransitionBatch]], causal: CausalConfig
) -> Optional[Tensor]:
    batches = [b for b in batches if b is not None]
    if not batches:
        return None
    return agent.causal.loss(TransitionBatch.concat(batches), causal.objective)


def minibatch_loss(
    agent: NavigationAgent,
    segments: Sequence[EpisodeSegment],
    advantages: Sequence[np.ndarray],
    config: PPOConfig,
    causal: CausalConfig,
) -> Tuple[Tensor, PPOStats]:
    """Total loss over a group of segments; `advantages` aligns with `segments`."""
    if not segments:
        raise EmptyBatchError("PPO minibatch has no segments")

    log_probs, values, entropies, transitions = [], [], [], []
    for segment in segments:
        out = agent.policy(segment.context)
        rows = slice(segment.offset, segment.end)
        logits = out.logits[rows]
        log_probs.append(action_log_probs(logits, segment.actions))
        values.append(out.values[rows])
        entropies.append(entropy(logits))
        transitions.append(segment_transitions(out, segment.transition_positions(), causal.detach_targets))

    new_log_probs = concat(log_probs)
    old_log_probs = np.concatenate([np.asarray(s.log_probs) for s in segments])
    adv = np.concatenate([np.asarray(a, dtype=np.float64) for a in advantages])
    returns = np.concatenate([np.asarray(s.returns, dtype=np.float64) for s in segments])

    ratio = (new_log_probs - old_log_probs).exp()
    clipped = ratio.clip(1.0 - config.clip_eps, 1.0 + config.clip_eps)
    surrogate = minimum(ratio * adv, clipped * adv).mean()
    value_loss = ((concat(values) - returns) ** 2).mean()
    mean_entropy = concat(entropies).mean()

    total = -surrogate + value_loss * config.value_coef - mean_entropy * config.entropy_coef
    causal_loss = causal_term(agent, transitions, causal)
    if causal_loss is not None:
        total = total + causal_loss * config.alpha

    stats = PPOStats(
        policy_loss=-surrogate.item(),
        value_loss=value_loss.item(),
        entropy=mean_entropy.item(),
        causal_loss=causal_loss.item() if causal_loss is not None else 0.0,
        clip_fraction=float(np.mean(np.abs(ratio.data - 1.0) > config.clip_eps)),
        surrogate=surrogate.item(),
    )
    return total, stats


def minibatch_groups(num_segments: int, minibatches: int, rng: np.random.Generator) -> List[np.ndarray]:
    order = rng.permutation(num_segments)
    return [group for group in np.array_split(order, min(minibatches, num_segments)) if group.size]


def ppo_update(
    agent: NavigationAgent,
    buffer: RolloutBuffer,
    optimizer: Adam,
    config: PPOConfig,
    causal: CausalConfig,
    lr: float,
    rng: np.random.Generator,
) -> PPOStats:
    """`epochs` passes over shuffled segment groups, one Adam step per group."""
    if not buffer.segments:
        raise EmptyBatchError("PPO update on an empty rollout buffer")
    all_adv = buffer.advantages
    if config.normalize_advantages:
        all_adv = normalize(all_adv)
    bounds = np.cumsum([0] + [len(s) for s in buffer.segments])
    per_segment = [all_adv[bounds[i]:bounds[i + 1]] for i in range(len(buffer.segments))]

    totals = PPOStats()
    for epoch in range(config.epochs):
        for m, group in enumerate(minibatch_groups(len(buffer.segments), config.minibatches, rng)):
            segments = [buffer.segments[i] for i in group]
            try:
                loss, stats = minibatch_loss(agent, segments, [per_segment[i] for i in group], config, causal)
                optimizer.zero_grad()
                loss.backward()
                optimizer.step(lr)
            except NonFiniteError as e:
                logger.error(f"PPO update aborted at epoch {epoch}, minibatch {m}: {e.message}", exc_info=True)
                raise NonFiniteError(f"{e.message} (epoch={epoch}, minibatch={m}, lr={lr})") from e
            totals.policy_loss += stats.policy_loss
            totals.value_loss += stats.value_loss
            totals.entropy += stats.entropy
            totals.causal_loss += stats.causal_loss
            totals.clip_fraction += stats.clip_fraction
            totals.surrogate += stats.surrogate
            totals.updates += 1

    n = max(totals.updates, 1)
    result = PPOStats(
        policy_loss=totals.policy_loss / n,
        value_loss=totals.value_loss / n,
        entropy=totals.entropy / n,
        causal_loss=totals.causal_loss / n,
        clip_fraction=totals.clip_fraction / n,
        surrogate=totals.surrogate / n,
        updates=totals.updates,
    )
    logger.debug(f"PPO update: {result.to_dict()}")
    return result
