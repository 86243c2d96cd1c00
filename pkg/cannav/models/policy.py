"""
Navigation policy: observation encoder, objective/action embeddings, causal
feature integration, interleaved sequence encoder (causal transformer or GRU),
actor and critic heads.

Per step the sequence holds [h_action[t], h_visual[t]], where h_action[t]
embeds the previous action (the null token at t = 0). The visual token of
step t therefore sees a_{t-1}, o_{t-1} and o_t, and never anything later.
"""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from cannav.core.errors import ContractError, DimensionError
from cannav.env.gridworld import NUM_ACTIONS, Observation, ObjectNavTask, Task
from cannav.env.vec_env import EpisodeContext
from cannav.numeric.layers import Embedding, GRUCell, LayerNorm, Linear, Module, TransformerBlock, sinusoidal_positions
from cannav.numeric.tensor import Tensor, concat, no_grad
from cannav.schemas.config_schemas import AgentConfig, EnvConfig

logger = logging.getLogger(__name__)


@dataclass
class PolicyOutput:
    logits: Tensor  # (T, |A|)
    values: Tensor  # (T,)
    h_visual: Tensor  # (T, d) pre-encoder h_{o_t}
    h_prime_visual: Tensor  # (T, d) post-encoder
    h_action: Tensor  # (T, d) embeddings of the previous actions
    h_prime_action: Tensor


class SequenceEncoder(Module):
    def __init__(self, config: AgentConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        self.variant = config.encoder_variant
        if self.variant == "transformer":
            self.blocks = [
                self.add_module(
                    f"block{i}",
                    TransformerBlock(config.d_model, config.heads, config.ff_multiplier * config.d_model, rng),
                )
                for i in range(config.layers)
            ]
            self.final_norm = self.add_module("final_norm", LayerNorm(config.d_model))
            self.positions = sinusoidal_positions(2 * config.max_episode_steps, config.d_model)
        else:
            self.gru = self.add_module("gru", GRUCell(config.d_model, config.d_model, rng))

    def __call__(self, h_visual: Tensor, h_action: Tensor) -> Tuple[Tensor, Tensor]:
        return encode_sequence(h_visual, h_action, self)


def interleave_order(length: int) -> np.ndarray:
    """Row order turning concat([actions; visuals]) into a_0, o_0, a_1, o_1, ..."""
    order = np.empty(2 * length, dtype=np.int64)
    order[0::2] = np.arange(length)
    order[1::2] = length + np.arange(length)
    return order


def encode_sequence(h_visual: Tensor, h_action: Tensor, encoder: SequenceEncoder) -> Tuple[Tensor, Tensor]:
    """Return (h'_visual, h'_action) for equal-length per-step feature sequences."""
    if h_visual.shape != h_action.shape:
        raise DimensionError(f"Visual {h_visual.shape} and action {h_action.shape} sequences differ")
    length = h_visual.shape[0]
    if length > encoder.config.max_episode_steps:
        raise ContractError(f"Sequence of {length} steps exceeds capacity {encoder.config.max_episode_steps}")

    if encoder.variant == "rnn":
        h = Tensor(np.zeros((1, encoder.config.d_model)))
        visual_out, action_out = [], []
        for t in range(length):
            h = encoder.gru(h_action[t:t + 1], h)
            action_out.append(h)
            h = encoder.gru(h_visual[t:t + 1], h)
            visual_out.append(h)
        return concat(visual_out, axis=0), concat(action_out, axis=0)

    tokens = concat([h_action, h_visual], axis=0)[interleave_order(length)]
    x = tokens + encoder.positions[: 2 * length]
    for block in encoder.blocks:
        x = block(x)
    x = encoder.final_norm(x)
    return x[1::2], x[0::2]


class NavigationPolicy(Module):
    def __init__(self, config: AgentConfig, env_config: EnvConfig, rng: np.random.Generator):
        super().__init__()
        self.config = config
        self.env_config = env_config
        self.window_shape = (env_config.window, env_config.window, env_config.channels)
        d = config.d_model
        self.goal_scale = 1.0 / float(env_config.width + env_config.height)

        self.encoder = self.add_module("encoder", Linear(int(np.prod(self.window_shape)), d, rng))
        if env_config.task_variant == "objectnav":
            self.objective = self.add_module("objective", Embedding(env_config.num_categories, d, rng))
        else:
            self.objective = self.add_module("objective", Linear(2, d, rng))
        self.action_embedding = self.add_module("action_embedding", Embedding(NUM_ACTIONS + 1, d, rng))
        self.integration = self.add_module("integration", Linear(2 * d, d, rng))
        self.sequence = self.add_module("sequence", SequenceEncoder(config, rng))
        self.actor = self.add_module("actor", Linear(d, NUM_ACTIONS, rng))
        self.critic = self.add_module("critic", Linear(d, 1, rng))

    # ---- per-stage operations ---------------------------------------------

    def encode_observation(self, observations: Sequence[Observation]) -> Tensor:
        """z_t = tanh(W · flatten(one_hot(window)) + b), one row per observation."""
        rows = []
        for obs in observations:
            one_hot = obs.one_hot()
            if one_hot.shape != self.window_shape:
                raise DimensionError(f"Observation window {one_hot.shape} does not match config {self.window_shape}")
            rows.append(one_hot.reshape(-1))
        return self.encoder(Tensor(np.stack(rows))).tanh()

    def embed_objective(self, task: Task, observations: Sequence[Observation]) -> Tensor:
        if isinstance(task, ObjectNavTask):
            return self.objective([task.category] * len(observations))
        goals = np.stack([obs.goal for obs in observations]) * np.array([self.goal_scale, 1.0 / np.pi])
        return self.objective(Tensor(goals))

    def embed_action(self, action_ids: Sequence[int]) -> Tensor:
        return self.action_embedding(action_ids)

    def integrate(self, z: Tensor, h_obj: Tensor) -> Tensor:
        """h_{o_t} = tanh(W [z_t; h_obj] + b)."""
        if z.shape != h_obj.shape:
            raise DimensionError(f"Visual {z.shape} and objective {h_obj.shape} features differ")
        return self.integration(concat([z, h_obj], axis=1)).tanh()

    def act(self, h_prime_visual: Tensor) -> Tensor:
        return self.actor(h_prime_visual)

    def value(self, h_prime_visual: Tensor) -> Tensor:
        return self.critic(h_prime_visual).reshape(-1)

    # ---- full pass ---------------------------------------------------------

    def features(self, context: EpisodeContext) -> Tuple[Tensor, Tensor]:
        """Pre-encoder (h_visual, h_action) for every step of the context."""
        if len(context.observations) != len(context.prev_actions):
            raise DimensionError(
                f"{len(context.observations)} observations but {len(context.prev_actions)} previous actions"
            )
        z = self.encode_observation(context.observations)
        h_visual = self.integrate(z, self.embed_objective(context.task, context.observations))
        return h_visual, self.embed_action(context.prev_actions)

    def forward(self, context: EpisodeContext) -> PolicyOutput:
        h_visual, h_action = self.features(context)
        h_prime_visual, h_prime_action = self.sequence(h_visual, h_action)
        return PolicyOutput(
            logits=self.act(h_prime_visual),
            values=self.value(h_prime_visual),
            h_visual=h_visual,
            h_prime_visual=h_prime_visual,
            h_action=h_action,
            h_prime_action=h_prime_action,
        )

    __call__ = forward

    def act_step(self, context: EpisodeContext) -> Tuple[np.ndarray, float]:
        """Action log-probabilities and value at the last step, without recording a graph."""
        with no_grad():
            out = self.forward(context)
            log_probs = out.logits[-1].log_softmax(axis=-1)
        return log_probs.data, float(out.values.data[-1])


def action_log_probs(logits: Tensor, actions: Sequence[int]) -> Tensor:
    rows = np.arange(len(actions))
    return logits.log_softmax(axis=-1)[rows, np.asarray(actions, dtype=np.int64)]


def entropy(logits: Tensor) -> Tensor:
    log_p = logits.log_softmax(axis=-1)
    return -(log_p.exp() * log_p).sum(axis=-1)
