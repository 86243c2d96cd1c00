"""
Ablation sweeps over encoder variant and causal weight.

Each (variant, seed) pair is a full training run in its own directory. The
sweep writes `summary.csv` (final metrics per run, then mean and std rows per
variant), `curve_<variant>.csv` (SR per evaluation step across seeds) and
`curves.svg`.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from cannav.core.errors import UsageError
from cannav.schemas.config_schemas import RunConfig
from cannav.schemas.metrics_schemas import AblationRun
from cannav.services.artifact_service import ArtifactService, read_csv, stamp_for
from cannav.services.plot_service import PlotService, load_curve
from cannav.services.training_service import train

logger = logging.getLogger(__name__)

# variant -> (encoder, keeps the causal term)
VARIANTS: Dict[str, Tuple[str, bool]] = {
    "can": ("transformer", True),
    "transformer_no_causal": ("transformer", False),
    "causal_rnn": ("rnn", True),
    "rnn_no_causal": ("rnn", False),
}

SUMMARY_COLUMNS = ["variant", "seed", "sr", "spl", "gd"]
CURVE_COLUMNS = ["step", "sr", "sr_std", "runs"]


def variant_config(base: RunConfig, variant: str, seed: int, output_dir: Path) -> RunConfig:
    if variant not in VARIANTS:
        raise UsageError(f"Unknown ablation variant '{variant}'; choose from {sorted(VARIANTS)}")
    encoder, causal = VARIANTS[variant]
    doc = base.model_dump(mode="json")
    doc["seed"] = seed
    doc["output_dir"] = str(output_dir)
    doc["agent"]["encoder_variant"] = encoder
    if not causal:
        doc["ppo"]["alpha"] = 0.0
        doc["bc"]["alpha"] = 0.0
    return RunConfig.model_validate(doc)


def parse_variants(text: str) -> List[str]:
    variants = [v.strip() for v in text.split(",") if v.strip()]
    unknown = [v for v in variants if v not in VARIANTS]
    if not variants or unknown:
        raise UsageError(f"Unknown ablation variants {unknown}; choose from {sorted(VARIANTS)}")
    return variants


def parse_seeds(text: str) -> List[int]:
    """`0..4` (inclusive range) or a comma list `0,3,7`."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            seeds = list(range(int(lo), int(hi) + 1))
        else:
            seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise UsageError(f"Cannot parse seeds '{text}'") from e
    if not seeds:
        raise UsageError(f"No seeds in '{text}'")
    return seeds


def final_row(log_path: Path) -> Dict[str, float]:
    _, rows = read_csv(log_path)
    if not rows:
        return {}
    return {k: float(rows[-1][k]) for k in ("sr", "spl", "gd")}


@dataclass
class AblationResult:
    runs: List[AblationRun]
    summary_path: Path
    curve_paths: Dict[str, Path]


class AblationService:
    def __init__(self, config: RunConfig, variants: Sequence[str], seeds: Sequence[int], output_dir: Path):
        for v in variants:
            if v not in VARIANTS:
                raise UsageError(f"Unknown ablation variant '{v}'; choose from {sorted(VARIANTS)}")
        self.config = config
        self.variants = list(variants)
        self.seeds = list(seeds)
        self.output_dir = Path(output_dir)
        self.artifacts = ArtifactService(self.output_dir, stamp_for(config))

    def run(self) -> AblationResult:
        runs: List[AblationRun] = []
        with self.artifacts:
            for variant in self.variants:
                for seed in self.seeds:
                    runs.append(self._run_one(variant, seed))
            summary = self.artifacts.write_csv("summary.csv", SUMMARY_COLUMNS, self._summary_rows(runs))
            curves = {variant: self._write_curve(variant, runs) for variant in self.variants}
            PlotService("Success rate by variant").plot(list(curves.values()), self.output_dir / "curves.svg")
        return AblationResult(runs, summary, curves)

    def _run_one(self, variant: str, seed: int) -> AblationRun:
        run_dir = self.output_dir / f"{variant}_seed{seed}"
        logger.info(f"Ablation run {variant} seed={seed} -> {run_dir}")
        result = train(variant_config(self.config, variant, seed, run_dir))
        metrics = final_row(result.log_path) or {
            "sr": result.final_report.sr,
            "spl": result.final_report.spl,
            "gd": result.final_report.gd,
        }
        return AblationRun(variant=variant, seed=seed, log_path=str(result.log_path), **metrics)

    def _summary_rows(self, runs: List[AblationRun]) -> List[list]:
        rows = [[r.variant, r.seed, r.sr, r.spl, r.gd] for r in runs]
        for variant in self.variants:
            subset = [r for r in runs if r.variant == variant]
            metrics = np.array([[r.sr, r.spl, r.gd] for r in subset], dtype=np.float64)
            rows.append([variant, "mean", *[float(v) for v in metrics.mean(axis=0)]])
            rows.append([variant, "std", *[float(v) for v in metrics.std(axis=0)]])
        return rows

    def _write_curve(self, variant: str, runs: List[AblationRun]) -> Path:
        by_step: Dict[float, List[float]] = {}
        for run in runs:
            if run.variant != variant:
                continue
            curve = load_curve(run.log_path)
            for step, sr in zip(curve.steps, curve.sr):
                by_step.setdefault(step, []).append(sr)
        rows = [
            [int(step), float(np.mean(values)), float(np.std(values)), len(values)]
            for step, values in sorted(by_step.items())
        ]
        return self.artifacts.write_csv(f"curve_{variant}.csv", CURVE_COLUMNS, rows)
