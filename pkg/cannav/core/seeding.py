"""
Named random streams split from a single master seed.

Streams are addressed by a spawn key (stream id, index...), so adding rollout
workers or evaluation episodes never perturbs world generation.
"""
from typing import Tuple

import numpy as np

WORLD_GEN = 0
POLICY_INIT = 1
ROLLOUT = 2
CMI = 3
EVAL = 4
TRAINER = 5

STREAMS = {
    "world-gen": WORLD_GEN,
    "policy-init": POLICY_INIT,
    "rollout": ROLLOUT,
    "cmi": CMI,
    "eval": EVAL,
    "trainer": TRAINER,
}

# Training worlds live below this bound, evaluation worlds at or above it.
EVAL_SEED_BASE = 1_000_000


def seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(int(k) for k in key))


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the given spawn key."""
    return np.random.default_rng(seed_sequence(master_seed, *key))


def derive_int(master_seed: int, *key: int, modulo: int = EVAL_SEED_BASE) -> int:
    """Deterministic integer in [0, modulo) for the given spawn key."""
    state = seed_sequence(master_seed, *key).generate_state(2, dtype=np.uint64)
    return int(state[0] % np.uint64(modulo))


def train_world_seed(master_seed: int, env_index: int, episode: int) -> int:
    return derive_int(master_seed, WORLD_GEN, env_index, episode)


def eval_seeds(count: int, start: int = EVAL_SEED_BASE) -> Tuple[int, ...]:
    return tuple(range(start, start + count))
