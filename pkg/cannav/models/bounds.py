"""
Closed-form Gaussian KL, mixture KL bounds and the conditional mutual
information estimate between the next observation and the previous action.
"""
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.special import logsumexp

from cannav.core.errors import ContractError, DimensionError, EmptyBatchError
from cannav.core.seeding import CMI, stream
from cannav.models.causal import CausalUnderstandingModule, GaussianPrediction, MixturePrediction

logger = logging.getLogger(__name__)

BOUND_TOLERANCE = 1e-9


def diagonal_kl(p_mu, p_log_var, q_mu, q_log_var) -> np.ndarray:
    """KL(p || q) for diagonal Gaussians, summed over the last axis; leading axes broadcast."""
    p_mu, p_log_var, q_mu, q_log_var = (np.asarray(a, dtype=np.float64) for a in (p_mu, p_log_var, q_mu, q_log_var))
    if p_mu.shape[-1] != q_mu.shape[-1]:
        raise DimensionError(f"Gaussian dimensions differ: {p_mu.shape[-1]} vs {q_mu.shape[-1]}")
    p_var = np.exp(p_log_var)
    q_var = np.exp(q_log_var)
    terms = q_log_var - p_log_var + (p_var + (p_mu - q_mu) ** 2) / q_var - 1.0
    return 0.5 * terms.sum(axis=-1)


def gaussian_kl(p: GaussianPrediction, q: GaussianPrediction):
    """KL(p || q); a float for single predictions, one value per row otherwise."""
    kl = diagonal_kl(p.mu, p.log_var, q.mu, q.log_var)
    return float(kl) if np.ndim(kl) == 0 else kl


def gaussian_entropy(log_var: np.ndarray) -> np.ndarray:
    log_var = np.asarray(log_var, dtype=np.float64)
    return 0.5 * (np.log(2.0 * np.pi * np.e) + log_var).sum(axis=-1)


@dataclass(frozen=True)
class KLBounds:
    lower: float
    mid: float
    upper: float


def kl_bounds(f: GaussianPrediction, g: MixturePrediction) -> KLBounds:
    """
    Bounds on KL(f || g) for a single Gaussian f and a uniform mixture g.

    upper: -log mean_k exp(-KL(f || g_k))
    lower: -H(f) - log mean_k N(mu_f; mu_k, S_f + S_k)
    """
    f_mu = np.asarray(f.mu, dtype=np.float64).reshape(-1)
    f_log_var = np.asarray(f.log_var, dtype=np.float64).reshape(-1)
    if f_mu.shape[0] != g.mu.shape[1]:
        raise DimensionError(f"Prediction dim {f_mu.shape[0]} does not match mixture dim {g.mu.shape[1]}")
    log_k = np.log(g.components)

    kl_k = diagonal_kl(f_mu[None, :], f_log_var[None, :], g.mu, g.log_var)
    upper = -(logsumexp(-kl_k) - log_k)

    total_var = np.exp(f_log_var)[None, :] + g.var
    log_overlap = -0.5 * (np.log(2.0 * np.pi * total_var) + (f_mu[None, :] - g.mu) ** 2 / total_var).sum(axis=-1)
    lower = -gaussian_entropy(f_log_var) - (logsumexp(log_overlap) - log_k)

    lower, upper = float(lower), float(upper)
    if lower > upper + BOUND_TOLERANCE * max(1.0, abs(upper)):
        raise ContractError(f"KL lower bound {lower} exceeds upper bound {upper}")
    # rounding can cross the bounds when both are near zero
    lower = min(lower, upper)
    return KLBounds(lower=lower, mid=0.5 * (lower + upper), upper=upper)


@dataclass(frozen=True)
class CMIEstimate:
    lower: float
    mid: float
    upper: float
    rows: int
    components: int
    seed: int
    per_row: Tuple[KLBounds, ...] = field(default=(), repr=False)

    @property
    def value(self) -> float:
        return self.mid

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "mid": self.mid,
            "upper": self.upper,
            "rows": self.rows,
            "components": self.components,
            "seed": self.seed,
        }


def estimate_cmi(
    module: CausalUnderstandingModule,
    h_o: np.ndarray,
    h_a: np.ndarray,
    components: int = 16,
    eval_rows: int = 256,
    seed: int = 0,
) -> CMIEstimate:
    """
    I(O_t; A_{t-1} | O_{t-1}) averaged over sampled rows.

    For each evaluated row the prediction f uses its own action; the mixture g
    replaces the action with K actions drawn without replacement from the
    dataset while keeping the row's h_o.
    """
    h_o = np.asarray(h_o, dtype=np.float64)
    h_a = np.asarray(h_a, dtype=np.float64)
    if h_o.ndim != 2 or h_o.shape != h_a.shape:
        raise DimensionError(f"Expected matching (N, d) feature arrays, got {h_o.shape} and {h_a.shape}")
    n = h_o.shape[0]
    if n == 0:
        raise EmptyBatchError("CMI estimate over an empty dataset")
    if components < 1 or components > n:
        raise ContractError(f"Mixture size {components} must lie in [1, {n}]")
    if eval_rows < 1:
        raise ContractError(f"eval_rows must be positive, got {eval_rows}")

    rng = stream(seed, CMI)
    rows = rng.choice(n, size=eval_rows, replace=eval_rows > n)
    per_row = []
    for i in rows:
        f = module.predict(h_o[i], h_a[i]).row(0)
        sampled = rng.choice(n, size=components, replace=False)
        g_pred = module.predict(np.repeat(h_o[i][None, :], components, axis=0), h_a[sampled])
        bounds = kl_bounds(f, MixturePrediction(g_pred.mu, g_pred.log_var))
        per_row.append(bounds)

    estimate = CMIEstimate(
        lower=float(np.mean([b.lower for b in per_row])),
        mid=float(np.mean([b.mid for b in per_row])),
        upper=float(np.mean([b.upper for b in per_row])),
        rows=len(rows),
        components=components,
        seed=seed,
        per_row=tuple(per_row),
    )
    logger.debug(f"CMI estimate over {estimate.rows} rows, K={components}: {estimate.mid:.6f}")
    return estimate
