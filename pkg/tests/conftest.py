import json
from pathlib import Path

import numpy as np
import pytest

from cannav.env.gridworld import GridWorld, parse_layout
from cannav.schemas.config_schemas import (
    AgentConfig,
    CausalConfig,
    EnvConfig,
    EvalConfig,
    PPOConfig,
    RunConfig,
)

OPEN_7X7 = [
    "#######",
    "#.....#",
    "#.....#",
    "#.....#",
    "#.....#",
    "#.....#",
    "#######",
]


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_env_config():
    return EnvConfig(width=7, height=7, obstacle_density=0.1, window=3, num_categories=2, max_steps=16)


@pytest.fixture
def small_agent_config():
    return AgentConfig(d_model=8, heads=2, max_episode_steps=16)


@pytest.fixture
def open_world():
    return GridWorld(cells=parse_layout(OPEN_7X7, 6), num_categories=6)


@pytest.fixture
def make_config(tmp_path):
    """Factory for tiny, fast run configurations; keyword sections are merged into the defaults."""

    def factory(**sections) -> RunConfig:
        doc = RunConfig(
            seed=0,
            output_dir=str(tmp_path / "run"),
            env=EnvConfig(width=7, height=7, obstacle_density=0.1, window=3, num_categories=2, max_steps=16),
            agent=AgentConfig(d_model=8, heads=2, max_episode_steps=16),
            causal=CausalConfig(cmi_k=4, cmi_rows=8),
            ppo=PPOConfig(num_envs=2, rollout_horizon=8, total_steps=32, epochs=1, minibatches=2, lr0=1e-3),
            eval=EvalConfig(interval=16, episodes=2),
        ).model_dump(mode="json")
        for key, value in sections.items():
            if isinstance(value, dict):
                doc[key].update(value)
            else:
                doc[key] = value
        return RunConfig.model_validate(doc)

    return factory


@pytest.fixture
def write_config(tmp_path):
    def writer(config: RunConfig, name: str = "config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(config.model_dump(mode="json"), indent=2), encoding="utf-8")
        return path

    return writer
