from typing import Dict, List, Optional

from pydantic import BaseModel, Field, model_validator


class EpisodeRecord(BaseModel):
    seed: int
    episode_index: int = 0
    success: bool
    path_length: int = Field(..., ge=0)  # MoveAhead actions that changed the cell
    shortest_path: int = Field(..., ge=1)
    final_geodesic: int = Field(..., ge=0)
    steps: int = Field(..., ge=0)


class MetricsReport(BaseModel):
    sr: float = Field(..., ge=0.0, le=1.0)
    spl: float = Field(..., ge=0.0, le=1.0)
    gd: float = Field(..., ge=0.0)
    n_episodes: int = Field(..., ge=1)
    seeds: List[int]
    per_seed: Dict[str, Dict[str, float]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def spl_bounded_by_sr(self) -> "MetricsReport":
        if self.spl > self.sr + 1e-12:
            raise ValueError(f"spl={self.spl} exceeds sr={self.sr}")
        return self


class TrainingLogRow(BaseModel):
    step: int
    sr: float
    spl: float
    gd: float
    policy_loss: float
    value_loss: float
    entropy: float
    causal_loss: float
    lr: float
    wall_time: float = 0.0


class AblationRun(BaseModel):
    variant: str
    seed: int
    sr: float
    spl: float
    gd: float
    log_path: Optional[str] = None
