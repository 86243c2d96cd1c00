from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from cannav.schemas.metrics_schemas import MetricsReport


class ArrayPayload(BaseModel):
    shape: List[int]
    data: List[float]


class OptimizerPayload(BaseModel):
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: Dict[str, ArrayPayload] = Field(default_factory=dict)
    v: Dict[str, ArrayPayload] = Field(default_factory=dict)


class ArtifactStamp(BaseModel):
    """Identity triple embedded in every artifact."""
    config_hash: str
    seed: int
    code_version: str


class CheckpointDocument(BaseModel):
    format_version: int
    parameters: Dict[str, ArrayPayload]
    optimizer: Optional[OptimizerPayload] = None
    stamp: Optional[ArtifactStamp] = None
    step: int = 0
    config: Optional[Dict[str, Any]] = None


class DemoHeader(BaseModel):
    kind: str = "demo-header"
    seed: int
    n_episodes: int
    config: Dict[str, Any]
    stamp: ArtifactStamp


class DemoRecord(BaseModel):
    episode: int
    world_seed: int
    episode_index: int
    step: int
    window: List[List[int]]
    goal: List[float]
    category: Optional[int] = None
    action: int


class ReportDocument(BaseModel):
    sr: float
    spl: float
    gd: float
    n: int
    seeds: List[int]
    checkpoint: Optional[str] = None
    step: Optional[int] = None
    config_hash: str
    seed: int
    code_version: str
    per_seed: Dict[str, Dict[str, float]] = Field(default_factory=dict)

    @classmethod
    def from_report(
        cls, report: MetricsReport, stamp: ArtifactStamp, checkpoint: Optional[str] = None, step: Optional[int] = None
    ) -> "ReportDocument":
        return cls(
            sr=report.sr,
            spl=report.spl,
            gd=report.gd,
            n=report.n_episodes,
            seeds=list(report.seeds),
            checkpoint=checkpoint,
            step=step,
            config_hash=stamp.config_hash,
            seed=stamp.seed,
            code_version=stamp.code_version,
            per_seed=report.per_seed,
        )
