import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from cannav.core.errors import ContractError, DimensionError, NonFiniteError
from cannav.numeric.tensor import Tensor

logger = logging.getLogger(__name__)

_lr_clamp_warned = False


@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, Optional[np.ndarray]],
    state: AdamState,
    lr: float,
) -> None:
    """Bias-corrected Adam update applied in place; advances `state.step` by one."""
    if lr < 0:
        raise ContractError(f"Learning rate must be non-negative, got {lr}")
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        if grad.shape != param.shape:
            raise DimensionError(f"Gradient for '{name}' has shape {grad.shape}, parameter has {param.shape}")
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(f"Non-finite gradient for parameter '{name}'")

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1 ** t
    correction2 = 1.0 - b2 ** t
    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            continue
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad * grad
        state.m[name] = m
        state.v[name] = v
        m_hat = m / correction1
        v_hat = v / correction2
        param.data = param.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """Adam over a fixed, named parameter set."""

    def __init__(self, params: Mapping[str, Tensor], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.state = AdamState(beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.grad = None

    def step(self, lr: float) -> None:
        adam_step(self.params, {name: p.grad for name, p in self.params.items()}, self.state, lr)


def linear_lr(step: int, total_steps: int, lr0: float) -> float:
    """lr0 decayed linearly to 0 at `total_steps`; clamps at 0 past the end."""
    global _lr_clamp_warned
    if total_steps <= 0:
        return lr0 if step <= 0 else 0.0
    if step > total_steps:
        if not _lr_clamp_warned:
            logger.warning(f"Learning-rate step {step} exceeds total {total_steps}; clamping to 0")
            _lr_clamp_warned = True
        return 0.0
    return lr0 * (1.0 - step / total_steps)
