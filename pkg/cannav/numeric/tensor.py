"""
Dense tensors with reverse-mode automatic differentiation.

Every differentiable operation records a TapeNode holding its inputs, the
activations its backward rule needs and the rule itself. Nodes are numbered
at creation, so sorting reachable nodes by that number gives a topological
order of the tape.
"""
import itertools
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from cannav.core.errors import ContractError, DimensionError, NonFiniteError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]

_DEFAULT_DTYPE = np.float64
_node_counter = itertools.count()
_grad_state = threading.local()


def set_default_dtype(name: str) -> None:
    global _DEFAULT_DTYPE
    if name not in ("float64", "float32"):
        raise ValueError(f"Unsupported dtype {name}")
    _DEFAULT_DTYPE = np.dtype(name).type


def get_default_dtype():
    return _DEFAULT_DTYPE


def is_grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording for the current thread."""
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous


@dataclass
class TapeNode:
    op: str
    inputs: Tuple["Tensor", ...]
    backward: Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]
    saved: dict = field(default_factory=dict)
    order: int = field(default_factory=lambda: next(_node_counter))


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_node")
    __array_priority__ = 100
    __array_ufunc__ = None  # ndarray (op) Tensor defers to the reflected Tensor operator

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        self.data = np.asarray(data, dtype=_DEFAULT_DTYPE)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._node: Optional[TapeNode] = None

    # ---- basic properties -------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f", name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    def __len__(self) -> int:
        return self.data.shape[0]

    # ---- graph construction ----------------------------------------------

    @staticmethod
    def _lift(value: ArrayLike) -> "Tensor":
        return value if isinstance(value, Tensor) else Tensor(value)

    @staticmethod
    def _make(
        data: np.ndarray,
        op: str,
        inputs: Tuple["Tensor", ...],
        backward: Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]],
        **saved,
    ) -> "Tensor":
        if not np.all(np.isfinite(data)):
            raise NonFiniteError(f"Operation '{op}' produced non-finite values")
        needs_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
        out = Tensor(data, requires_grad=needs_grad)
        if needs_grad:
            out._node = TapeNode(op=op, inputs=inputs, backward=backward, saved=saved)
        return out

    # ---- element-wise algebra ----------------------------------------------

    def __add__(self, other: ArrayLike) -> "Tensor":
        other = Tensor._lift(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor._make(
            self.data + other.data, "add", (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)),
        )

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        return Tensor._make(-self.data, "neg", (self,), lambda g: (-g,))

    def __sub__(self, other: ArrayLike) -> "Tensor":
        other = Tensor._lift(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor._make(
            self.data - other.data, "sub", (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)),
        )

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return Tensor._lift(other) - self

    def __mul__(self, other: ArrayLike) -> "Tensor":
        other = Tensor._lift(other)
        a, b = self.data, other.data
        return Tensor._make(
            a * b, "mul", (self, other),
            lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        other = Tensor._lift(other)
        a, b = self.data, other.data
        return Tensor._make(
            a / b, "div", (self, other),
            lambda g: (_unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)),
        )

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return Tensor._lift(other) / self

    def __pow__(self, exponent: float) -> "Tensor":
        if isinstance(exponent, Tensor):
            raise ContractError("Only constant exponents are supported")
        a = self.data
        return Tensor._make(
            a ** exponent, f"pow{exponent}", (self,),
            lambda g: (g * exponent * a ** (exponent - 1),),
        )

    # ---- linear algebra ----------------------------------------------------

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def transpose(self) -> "Tensor":
        if self.ndim != 2:
            raise DimensionError(f"transpose expects a matrix, got shape {self.shape}")
        return Tensor._make(self.data.T, "transpose", (self,), lambda g: (g.T,))

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        return Tensor._make(
            self.data.reshape(shape), "reshape", (self,),
            lambda g: (g.reshape(original),),
        )

    def __getitem__(self, index) -> "Tensor":
        if isinstance(index, Tensor):
            index = index.data.astype(np.int64)
        original = self.shape
        dtype = self.data.dtype

        def backward(g):
            full = np.zeros(original, dtype=dtype)
            np.add.at(full, index, g)
            return (full,)

        return Tensor._make(np.array(self.data[index]), "getitem", (self,), backward)

    # ---- reductions --------------------------------------------------------

    def sum(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        original = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, original).copy(),)

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), "sum", (self,), backward)

    def mean(self, axis: Optional[int] = None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(count)

    # ---- unary functions ---------------------------------------------------

    def exp(self) -> "Tensor":
        out = np.exp(self.data)
        return Tensor._make(out, "exp", (self,), lambda g: (g * out,))

    def log(self) -> "Tensor":
        a = self.data
        if np.any(a <= 0):
            raise NonFiniteError("Operation 'log' received non-positive input")
        return Tensor._make(np.log(a), "log", (self,), lambda g: (g / a,))

    def tanh(self) -> "Tensor":
        out = np.tanh(self.data)
        return Tensor._make(out, "tanh", (self,), lambda g: (g * (1.0 - out * out),))

    def sigmoid(self) -> "Tensor":
        out = 0.5 * (1.0 + np.tanh(0.5 * self.data))
        return Tensor._make(out, "sigmoid", (self,), lambda g: (g * out * (1.0 - out),))

    def relu(self) -> "Tensor":
        mask = self.data > 0
        return Tensor._make(self.data * mask, "relu", (self,), lambda g: (g * mask,))

    def clip(self, low: float, high: float) -> "Tensor":
        inside = (self.data >= low) & (self.data <= high)
        return Tensor._make(np.clip(self.data, low, high), "clip", (self,), lambda g: (g * inside,))

    def softmax(self, axis: int = -1) -> "Tensor":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out = e / e.sum(axis=axis, keepdims=True)

        def backward(g):
            return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

        return Tensor._make(out, "softmax", (self,), backward)

    def log_softmax(self, axis: int = -1) -> "Tensor":
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        probs = np.exp(out)

        def backward(g):
            return (g - probs * g.sum(axis=axis, keepdims=True),)

        return Tensor._make(out, "log_softmax", (self,), backward)

    def masked_softmax(self, allowed: np.ndarray) -> "Tensor":
        """Softmax over the last axis where disallowed entries act as -inf."""
        allowed = np.broadcast_to(np.asarray(allowed, dtype=bool), self.shape)
        if not np.all(allowed.any(axis=-1)):
            raise ContractError("masked_softmax requires at least one allowed entry per row")
        scores = np.where(allowed, self.data, -np.inf)
        shifted = scores - scores.max(axis=-1, keepdims=True)
        e = np.where(allowed, np.exp(shifted), 0.0)
        out = e / e.sum(axis=-1, keepdims=True)

        def backward(g):
            return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

        return Tensor._make(out, "masked_softmax", (self,), backward)

    # ---- backward pass -----------------------------------------------------

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Populate `.grad` of every requires_grad tensor reachable from this scalar."""
        if grad is None:
            if self.data.size != 1:
                raise ContractError(f"backward() needs a scalar loss, got shape {self.shape}")
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            return

        pending = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        nodes: List[Tensor] = []
        seen = set()
        stack = [self]
        while stack:
            t = stack.pop()
            if id(t) in seen:
                continue
            seen.add(id(t))
            nodes.append(t)
            if t._node is not None:
                stack.extend(t._node.inputs)
        # later nodes first; leaves (no node) last
        nodes.sort(key=lambda t: t._node.order if t._node is not None else -1, reverse=True)

        for t in nodes:
            g = pending.pop(id(t), None)
            if g is None or not t.requires_grad:
                continue
            t.grad = g if t.grad is None else t.grad + g
            if t._node is None:
                continue
            input_grads = t._node.backward(g)
            for inp, ig in zip(t._node.inputs, input_grads):
                if ig is None or not inp.requires_grad:
                    continue
                key = id(inp)
                pending[key] = ig if key not in pending else pending[key] + ig


# ---- functional forms ------------------------------------------------------

def tensor(data, requires_grad: bool = False, name: Optional[str] = None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = Tensor._lift(a), Tensor._lift(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    x, y = a.data, b.data
    return Tensor._make(x @ y, "matmul", (a, b), lambda g: (g @ y.T, x.T @ g))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = tuple(Tensor._lift(t) for t in tensors)
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat shape mismatch: {[t.shape for t in tensors]}") from exc
    return Tensor._make(data, "concat", tensors, backward)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Element-wise minimum; ties send the gradient to `a`."""
    a, b = Tensor._lift(a), Tensor._lift(b)
    pick_a = a.data <= b.data
    a_shape, b_shape = a.shape, b.shape
    return Tensor._make(
        np.where(pick_a, a.data, b.data), "minimum", (a, b),
        lambda g: (_unbroadcast(g * pick_a, a_shape), _unbroadcast(g * ~pick_a, b_shape)),
    )
