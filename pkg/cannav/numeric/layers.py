"""
Neural layers built on the autodiff Tensor.

Parameter names are dotted paths (`module.layer.tensor`) and double as the
checkpoint keys.
"""
import math
from typing import Dict, Iterator, Mapping, Optional, Sequence, Tuple

import numpy as np

from cannav.core.errors import CheckpointError, ConfigurationError, DimensionError, VocabularyError
from cannav.numeric.tensor import Tensor, concat, get_default_dtype


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape: Tuple[int, ...]) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Container of named parameters and child modules."""

    def __init__(self):
        self._parameters: Dict[str, Tensor] = {}
        self._modules: Dict[str, "Module"] = {}

    def add_parameter(self, name: str, value: np.ndarray) -> Tensor:
        param = Tensor(value, requires_grad=True, name=name)
        self._parameters[name] = param
        return param

    def add_module(self, name: str, module: "Module") -> "Module":
        self._modules[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Dict[str, Tensor]:
        out: Dict[str, Tensor] = {}
        for name, param in self._parameters.items():
            out[f"{prefix}{name}"] = param
        for name, module in self._modules.items():
            out.update(module.named_parameters(f"{prefix}{name}."))
        return out

    def parameters(self) -> Iterator[Tensor]:
        return iter(self.named_parameters().values())

    def state_arrays(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}

    def load_state_arrays(self, arrays: Mapping[str, np.ndarray], prefix: str = "") -> None:
        for name, param in self.named_parameters(prefix).items():
            if name not in arrays:
                raise CheckpointError(f"Missing parameter '{name}' in checkpoint")
            value = np.asarray(arrays[name], dtype=param.data.dtype)
            if value.shape != param.shape:
                raise CheckpointError(f"Parameter '{name}' has shape {value.shape}, expected {param.shape}")
            param.data = value.copy()

    def zero_grad(self) -> None:
        for param in self.parameters():
            param.grad = None


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = self.add_parameter(
            "weight", glorot_uniform(rng, in_features, out_features, (in_features, out_features))
        )
        self.bias = self.add_parameter("bias", np.zeros(out_features)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise DimensionError(f"Linear expects last dimension {self.in_features}, got shape {x.shape}")
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class Embedding(Module):
    def __init__(self, num_embeddings: int, dim: int, rng: np.random.Generator):
        super().__init__()
        self.num_embeddings = num_embeddings
        self.table = self.add_parameter("table", rng.normal(0.0, 0.02, size=(num_embeddings, dim)))

    def __call__(self, ids: Sequence[int]) -> Tensor:
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        if ids.size and (ids.min() < 0 or ids.max() >= self.num_embeddings):
            raise VocabularyError(f"Embedding ids {ids.tolist()} outside vocabulary of size {self.num_embeddings}")
        return self.table[ids]


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gain = self.add_parameter("gain", np.ones(dim))
        self.bias = self.add_parameter("bias", np.zeros(dim))

    def __call__(self, x: Tensor) -> Tensor:
        centred = x - x.mean(axis=-1, keepdims=True)
        var = (centred * centred).mean(axis=-1, keepdims=True)
        return centred / (var + self.eps) ** 0.5 * self.gain + self.bias


class FeedForward(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.up = self.add_module("up", Linear(dim, hidden, rng))
        self.down = self.add_module("down", Linear(hidden, dim, rng))

    def __call__(self, x: Tensor) -> Tensor:
        return self.down(self.up(x).relu())


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    positions = np.arange(length)[:, None]
    rates = np.exp(-math.log(10000.0) * (2 * (np.arange(dim) // 2)) / dim)
    angles = positions * rates[None, :]
    table = np.where(np.arange(dim) % 2 == 0, np.sin(angles), np.cos(angles))
    return table.astype(get_default_dtype())


def causal_self_attention(x: Tensor, heads: int, params: Mapping[str, Tensor]) -> Tensor:
    """Multi-head attention where row t attends only to rows <= t."""
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionError(f"causal_self_attention expects a non-empty T x d matrix, got {x.shape}")
    length, dim = x.shape
    if heads < 1 or dim % heads != 0:
        raise ConfigurationError(f"d={dim} is not divisible by heads={heads}")
    head_dim = dim // heads
    scale = 1.0 / math.sqrt(head_dim)
    allowed = np.tril(np.ones((length, length), dtype=bool))

    q = x @ params["wq"]
    k = x @ params["wk"]
    v = x @ params["wv"]
    outputs = []
    for h in range(heads):
        cols = slice(h * head_dim, (h + 1) * head_dim)
        scores = (q[:, cols] @ k[:, cols].T) * scale
        outputs.append(scores.masked_softmax(allowed) @ v[:, cols])
    return concat(outputs, axis=1) @ params["wo"]


class CausalSelfAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        super().__init__()
        if dim % heads != 0:
            raise ConfigurationError(f"d={dim} is not divisible by heads={heads}")
        self.heads = heads
        for name in ("wq", "wk", "wv", "wo"):
            self.add_parameter(name, glorot_uniform(rng, dim, dim, (dim, dim)))

    def __call__(self, x: Tensor) -> Tensor:
        return causal_self_attention(x, self.heads, self._parameters)


class TransformerBlock(Module):
    """Pre-norm block: x + attn(ln(x)), then x + ff(ln(x))."""

    def __init__(self, dim: int, heads: int, ff_hidden: int, rng: np.random.Generator):
        super().__init__()
        self.ln_attn = self.add_module("ln_attn", LayerNorm(dim))
        self.attn = self.add_module("attn", CausalSelfAttention(dim, heads, rng))
        self.ln_ff = self.add_module("ln_ff", LayerNorm(dim))
        self.ff = self.add_module("ff", FeedForward(dim, ff_hidden, rng))

    def __call__(self, x: Tensor) -> Tensor:
        x = x + self.attn(self.ln_attn(x))
        return x + self.ff(self.ln_ff(x))


def gru_step(x: Tensor, h: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """One GRU update: reset gate r, update gate z, candidate n, h' = (1-z)*n + z*h."""
    w_x, w_h, b_x, b_h = params["w_x"], params["w_h"], params["b_x"], params["b_h"]
    hidden = w_h.shape[0]
    if x.shape[-1] != w_x.shape[0] or h.shape[-1] != hidden:
        raise DimensionError(
            f"gru_step dimension mismatch: x {x.shape}, h {h.shape}, w_x {w_x.shape}, w_h {w_h.shape}"
        )
    vector = x.ndim == 1
    if vector:
        x, h = x.reshape(1, -1), h.reshape(1, -1)

    gx = x @ w_x + b_x
    gh = h @ w_h + b_h
    r = (gx[:, :hidden] + gh[:, :hidden]).sigmoid()
    z = (gx[:, hidden:2 * hidden] + gh[:, hidden:2 * hidden]).sigmoid()
    n = (gx[:, 2 * hidden:] + r * gh[:, 2 * hidden:]).tanh()
    out = (1.0 - z) * n + z * h
    return out.reshape(-1) if vector else out


class GRUCell(Module):
    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        super().__init__()
        self.hidden_dim = hidden_dim
        self.add_parameter("w_x", glorot_uniform(rng, input_dim, 3 * hidden_dim, (input_dim, 3 * hidden_dim)))
        self.add_parameter("w_h", glorot_uniform(rng, hidden_dim, 3 * hidden_dim, (hidden_dim, 3 * hidden_dim)))
        self.add_parameter("b_x", np.zeros(3 * hidden_dim))
        self.add_parameter("b_h", np.zeros(3 * hidden_dim))

    def __call__(self, x: Tensor, h: Optional[Tensor] = None) -> Tensor:
        if h is None:
            h = Tensor(np.zeros((1, self.hidden_dim)) if x.ndim == 2 else np.zeros(self.hidden_dim))
        return gru_step(x, h, self._parameters)
