from typing import Callable, Sequence

import numpy as np

from cannav.numeric.tensor import Tensor


def numerical_grad(fn: Callable[[], Tensor], target: Tensor, eps: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar fn() with respect to every entry of target."""
    target.data = np.ascontiguousarray(target.data)
    grad = np.zeros_like(target.data)
    flat = target.data.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        plus = fn().item()
        flat[i] = original - eps
        minus = fn().item()
        flat[i] = original
        grad.reshape(-1)[i] = (plus - minus) / (2 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-4) -> float:
    scale = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / scale)) if analytic.size else 0.0


def gradcheck(fn: Callable[[], Tensor], inputs: Sequence[Tensor], eps: float = 1e-5) -> float:
    """Max relative error between backward() gradients and central differences."""
    for t in inputs:
        t.grad = None
    fn().backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]
    worst = 0.0
    for t, a in zip(inputs, analytic):
        worst = max(worst, relative_error(a, numerical_grad(fn, t, eps)))
    return worst
