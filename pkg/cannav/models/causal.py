"""
Causal understanding module: a diagonal-Gaussian predictor of the next visual
feature from (h_{o_{t-1}}, h_{a_{t-1}}).
"""
import logging
from dataclasses import dataclass

import numpy as np

from cannav.core.errors import DimensionError, EmptyBatchError
from cannav.numeric.layers import Linear, Module
from cannav.numeric.tensor import Tensor, concat, no_grad

logger = logging.getLogger(__name__)

LOG_VAR_MIN = -10.0
LOG_VAR_MAX = 10.0


@dataclass(frozen=True)
class GaussianPrediction:
    """Diagonal Gaussian; rows index independent predictions."""
    mu: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        if self.mu.shape != self.log_var.shape:
            raise DimensionError(f"Mean {self.mu.shape} and log-variance {self.log_var.shape} differ")

    @property
    def var(self) -> np.ndarray:
        return np.exp(self.log_var)

    @property
    def dim(self) -> int:
        return self.mu.shape[-1]

    def row(self, i: int) -> "GaussianPrediction":
        return GaussianPrediction(self.mu[i], self.log_var[i])


@dataclass(frozen=True)
class MixturePrediction:
    """Uniform mixture over K diagonal-Gaussian components, shapes (K, d)."""
    mu: np.ndarray
    log_var: np.ndarray

    def __post_init__(self):
        if self.mu.ndim != 2 or self.mu.shape != self.log_var.shape:
            raise DimensionError(f"Mixture needs matching (K, d) arrays, got {self.mu.shape} and {self.log_var.shape}")
        if self.mu.shape[0] < 1:
            raise EmptyBatchError("Mixture needs at least one component")

    @property
    def components(self) -> int:
        return self.mu.shape[0]

    @property
    def var(self) -> np.ndarray:
        return np.exp(self.log_var)


@dataclass
class TransitionBatch:
    h_o: Tensor  # (N, d) visual feature at t-1
    h_a: Tensor  # (N, d) embedding of a_{t-1}
    h_next: Tensor  # (N, d) visual feature at t

    def __post_init__(self):
        if len(self.h_o.shape) != 2 or not (self.h_o.shape == self.h_a.shape == self.h_next.shape):
            raise DimensionError(
                f"Transition features must share an (N, d) shape: {self.h_o.shape}, {self.h_a.shape}, {self.h_next.shape}"
            )

    def __len__(self) -> int:
        return self.h_o.shape[0]

    @staticmethod
    def concat(batches) -> "TransitionBatch":
        batches = [b for b in batches if len(b)]
        if not batches:
            raise EmptyBatchError("No transitions to concatenate")
        return TransitionBatch(
            h_o=concat([b.h_o for b in batches], axis=0),
            h_a=concat([b.h_a for b in batches], axis=0),
            h_next=concat([b.h_next for b in batches], axis=0),
        )


class CausalUnderstandingModule(Module):
    def __init__(self, dim: int, rng: np.random.Generator):
        super().__init__()
        self.dim = dim
        self.predictor = self.add_module("predictor", Linear(2 * dim, 2 * dim, rng))
        # variance head starts at unit variance; only the likelihood objective moves it
        self.predictor.weight.data[:, dim:] = 0.0

    def forward(self, h_o: Tensor, h_a: Tensor) -> tuple:
        """Return (mu, log_var) tensors; log_var is clamped to [-10, 10]."""
        if h_o.shape != h_a.shape or h_o.shape[-1] != self.dim:
            raise DimensionError(f"Expected two (N, {self.dim}) inputs, got {h_o.shape} and {h_a.shape}")
        out = self.predictor(concat([h_o, h_a], axis=-1))
        mu = out[:, : self.dim]
        log_var = out[:, self.dim:].clip(LOG_VAR_MIN, LOG_VAR_MAX)
        return mu, log_var

    __call__ = forward

    def predict(self, h_o: np.ndarray, h_a: np.ndarray) -> GaussianPrediction:
        with no_grad():
            mu, log_var = self.forward(Tensor(np.atleast_2d(h_o)), Tensor(np.atleast_2d(h_a)))
        return GaussianPrediction(mu.data, log_var.data)

    def causal_loss(self, batch: TransitionBatch) -> Tensor:
        """Mean squared error between predicted mean and the next visual feature, over rows and dimensions."""
        if len(batch) == 0:
            raise EmptyBatchError("Causal loss over an empty batch")
        mu, _ = self.forward(batch.h_o, batch.h_a)
        return ((mu - batch.h_next) ** 2).mean()

    def nll_loss(self, batch: TransitionBatch) -> Tensor:
        """Gaussian negative log-likelihood of the next visual feature."""
        if len(batch) == 0:
            raise EmptyBatchError("Likelihood loss over an empty batch")
        mu, log_var = self.forward(batch.h_o, batch.h_a)
        squared = (batch.h_next - mu) ** 2
        per_dim = (log_var + squared * (-log_var).exp() + np.log(2.0 * np.pi)) * 0.5
        return per_dim.sum(axis=-1).mean()

    def loss(self, batch: TransitionBatch, objective: str = "mse") -> Tensor:
        return self.nll_loss(batch) if objective == "nll" else self.causal_loss(batch)
