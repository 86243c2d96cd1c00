import hashlib
import json
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class EnvConfig(_StrictModel):
    width: int = Field(11, ge=7)
    height: int = Field(11, ge=7)
    obstacle_density: float = Field(0.2, ge=0.0, le=0.4)
    task_variant: Literal["pointnav", "objectnav"] = "pointnav"
    num_categories: int = Field(6, ge=1, le=26)
    objects_per_category: int = Field(1, ge=1)
    window: int = Field(5, ge=1)
    max_steps: int = Field(128, ge=1)
    shaping: float = 1.0
    step_penalty: float = 0.01
    success_reward: float = 10.0
    min_spawn_distance: int = Field(3, ge=1)
    generation_retries: int = Field(100, ge=1)
    # Fixed map as row strings ('#' wall, '.' empty, 'A'.. objects); replaces procedural walls.
    layout: Optional[List[str]] = None

    @field_validator("window")
    @classmethod
    def window_is_odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError("window must be odd so the cell ahead sits at its centre")
        return v

    @model_validator(mode="after")
    def layout_is_rectangular(self) -> "EnvConfig":
        if self.layout is not None:
            if not self.layout or len({len(row) for row in self.layout}) != 1:
                raise ValueError("layout rows must be non-empty and of equal length")
        return self

    @property
    def channels(self) -> int:
        return 2 + self.num_categories


class AgentConfig(_StrictModel):
    d_model: int = Field(128, ge=2)
    heads: int = Field(4, ge=1)
    layers: int = Field(1, ge=1)
    encoder_variant: Literal["transformer", "rnn"] = "transformer"
    ff_multiplier: int = Field(4, ge=1)
    max_episode_steps: int = Field(128, ge=1)

    @model_validator(mode="after")
    def heads_divide_width(self) -> "AgentConfig":
        if self.d_model % self.heads != 0:
            raise ValueError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        return self

    @classmethod
    def full_scale(cls, **overrides) -> "AgentConfig":
        """Single layer, 4 heads of 392 (total width 1568)."""
        return cls(**{"d_model": 1568, "heads": 4, "layers": 1, **overrides})


class CausalConfig(_StrictModel):
    objective: Literal["mse", "nll"] = "mse"
    detach_targets: bool = True
    cmi_k: int = Field(16, ge=1)
    cmi_rows: int = Field(256, ge=1)


class PPOConfig(_StrictModel):
    gamma: float = Field(0.99, ge=0.0, lt=1.0)
    gae_lambda: float = Field(0.95, ge=0.0, le=1.0)
    clip_eps: float = Field(0.2, gt=0.0)
    epochs: int = Field(4, ge=1)
    minibatches: int = Field(4, ge=1)
    value_coef: float = 0.5
    entropy_coef: float = 0.01
    alpha: float = Field(1.0, ge=0.0)
    rollout_horizon: int = Field(128, ge=1)
    num_envs: int = Field(8, ge=1)
    total_steps: int = Field(1_000_000, ge=0)
    lr0: float = Field(1e-4, ge=0.0)
    normalize_advantages: bool = True


class BCConfig(_StrictModel):
    demos_path: Optional[str] = None
    updates: int = Field(200, ge=0)
    batch_episodes: int = Field(16, ge=1)
    alpha: float = Field(1.0, ge=0.0)
    lr0: float = Field(1e-4, ge=0.0)


class EvalConfig(_StrictModel):
    interval: int = Field(20_000, ge=1)
    episodes: int = Field(50, ge=1)
    seed_start: int = Field(1_000_000, ge=0)
    greedy: bool = True
    allow_seed_overlap: bool = False


class RunConfig(_StrictModel):
    trainer: Literal["ppo", "bc"] = "ppo"
    seed: int = 0
    output_dir: str = "runs/default"
    env: EnvConfig = Field(default_factory=EnvConfig)
    agent: AgentConfig = Field(default_factory=AgentConfig)
    causal: CausalConfig = Field(default_factory=CausalConfig)
    ppo: PPOConfig = Field(default_factory=PPOConfig)
    bc: BCConfig = Field(default_factory=BCConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @model_validator(mode="after")
    def episode_fits_context(self) -> "RunConfig":
        if self.env.max_steps > self.agent.max_episode_steps:
            raise ValueError(
                f"env.max_steps={self.env.max_steps} exceeds agent.max_episode_steps={self.agent.max_episode_steps}"
            )
        return self

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:16]
