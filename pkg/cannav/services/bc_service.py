"""
Behavior cloning on oracle demonstrations with the causal auxiliary term:
cross-entropy to the expert action + alpha * causal loss.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from cannav.core.errors import EmptyBatchError, NonFiniteError
from cannav.models.agent import NavigationAgent
from cannav.models.policy import action_log_probs
from cannav.numeric.optim import Adam
from cannav.numeric.tensor import Tensor, concat
from cannav.schemas.config_schemas import CausalConfig
from cannav.services.demo_service import DemoEpisode
from cannav.services.ppo_service import causal_term, segment_transitions

logger = logging.getLogger(__name__)


@dataclass
class BCStats:
    loss: float = 0.0
    cross_entropy: float = 0.0
    causal_loss: float = 0.0

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def bc_loss(
    agent: NavigationAgent,
    demos: Sequence[DemoEpisode],
    alpha: float,
    causal: CausalConfig,
) -> Tuple[Tensor, BCStats]:
    if not demos or not any(len(d) for d in demos):
        raise EmptyBatchError("Behavior cloning needs at least one demonstration step")
    log_probs, transitions = [], []
    for demo in demos:
        if not len(demo):
            continue
        out = agent.policy(demo.context())
        log_probs.append(action_log_probs(out.logits, demo.actions))
        transitions.append(segment_transitions(out, range(1, len(demo)), causal.detach_targets))

    cross_entropy = -concat(log_probs).mean()
    total = cross_entropy
    causal_loss = causal_term(agent, transitions, causal)
    if causal_loss is not None:
        total = total + causal_loss * alpha
    stats = BCStats(
        loss=total.item(),
        cross_entropy=cross_entropy.item(),
        causal_loss=causal_loss.item() if causal_loss is not None else 0.0,
    )
    return total, stats


def bc_update(
    agent: NavigationAgent,
    demos: Sequence[DemoEpisode],
    optimizer: Adam,
    alpha: float,
    causal: CausalConfig,
    lr: float,
) -> BCStats:
    """One Adam step on the full demo batch; stats are measured before the step."""
    loss, stats = bc_loss(agent, demos, alpha, causal)
    if not np.isfinite(stats.loss):
        raise NonFiniteError(f"Behavior-cloning loss is not finite: {stats.to_dict()}")
    optimizer.zero_grad()
    loss.backward()
    optimizer.step(lr)
    logger.debug(f"BC update: {stats.to_dict()}")
    return stats


def sample_batch(demos: Sequence[DemoEpisode], batch_episodes: int, rng: np.random.Generator) -> Sequence[DemoEpisode]:
    if len(demos) <= batch_episodes:
        return demos
    picked = np.sort(rng.choice(len(demos), size=batch_episodes, replace=False))
    return [demos[i] for i in picked]
