"""
CMI diagnostic for a trained agent: collect fresh on-policy transitions, then
estimate I(O_t; A_{t-1} | O_{t-1}) with the causal module's predictions.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from cannav.core.errors import EmptyBatchError
from cannav.env.vec_env import VecEnv
from cannav.models.agent import NavigationAgent
from cannav.models.bounds import CMIEstimate, estimate_cmi
from cannav.numeric.tensor import no_grad
from cannav.services.artifact_service import ArtifactService
from cannav.services.ppo_service import segment_transitions
from cannav.services.rollout_service import RolloutBuffer, collect_rollouts

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ["checkpoint", "K", "eval_rows", "lower_mean", "mid_mean", "upper_mean", "seed"]
ROW_COLUMNS = ["row", "lower", "mid", "upper"]


@dataclass
class TransitionFeatures:
    h_o: np.ndarray
    h_a: np.ndarray
    h_next: np.ndarray

    def __len__(self) -> int:
        return self.h_o.shape[0]


def transition_features(agent: NavigationAgent, buffer: RolloutBuffer) -> TransitionFeatures:
    """Pre-encoder features of every within-episode transition in the buffer."""
    h_o, h_a, h_next = [], [], []
    with no_grad():
        for segment in buffer.segments:
            positions = segment.transition_positions()
            if not len(positions):
                continue
            batch = segment_transitions(agent.policy(segment.context), positions, detach_targets=True)
            h_o.append(batch.h_o.data)
            h_a.append(batch.h_a.data)
            h_next.append(batch.h_next.data)
    if not h_o:
        raise EmptyBatchError("Rollout produced no within-episode transitions")
    return TransitionFeatures(np.concatenate(h_o), np.concatenate(h_a), np.concatenate(h_next))


class CMIService:
    def __init__(self, agent: NavigationAgent):
        self.agent = agent

    def collect(self, seed: int, num_envs: Optional[int] = None, horizon: Optional[int] = None) -> TransitionFeatures:
        ppo = self.agent.config.ppo
        envs = VecEnv(self.agent.config.env, num_envs or ppo.num_envs, seed)
        buffer = collect_rollouts(self.agent.policy, envs, horizon or ppo.rollout_horizon)
        features = transition_features(self.agent, buffer)
        logger.info(f"Collected {len(features)} transitions for the CMI estimate")
        return features

    def estimate(self, features: TransitionFeatures, components: int, eval_rows: int, seed: int) -> CMIEstimate:
        return estimate_cmi(self.agent.causal, features.h_o, features.h_a, components, eval_rows, seed)

    def report(
        self,
        artifacts: ArtifactService,
        checkpoint: str,
        components: int,
        eval_rows: int,
        seed: int,
        num_envs: Optional[int] = None,
        horizon: Optional[int] = None,
    ) -> Tuple[CMIEstimate, Path]:
        estimate = self.estimate(self.collect(seed, num_envs, horizon), components, eval_rows, seed)
        path = artifacts.write_csv(
            "cmi_report.csv",
            REPORT_COLUMNS,
            [[checkpoint, components, estimate.rows, estimate.lower, estimate.mid, estimate.upper, seed]],
        )
        artifacts.write_csv(
            "cmi_rows.csv",
            ROW_COLUMNS,
            [[i, b.lower, b.mid, b.upper] for i, b in enumerate(estimate.per_row)],
        )
        logger.info(
            f"CMI K={components} rows={estimate.rows}: "
            f"lower={estimate.lower:.4f} mid={estimate.mid:.4f} upper={estimate.upper:.4f}"
        )
        return estimate, path
