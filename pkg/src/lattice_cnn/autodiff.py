"""A small numpy-backed tensor type with reverse-mode differentiation.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to parent gradients. Calling
``backward()`` on a scalar walks the graph in reverse topological order
and accumulates into ``.grad`` of leaf tensors (usually
:class:`Parameter` objects).

Only what the layers in this package need is provided: dense 2-D algebra,
elementwise nonlinearities, row gathers and segment reductions (the
latter are how per-node and per-sentence pooling is batched).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ShapeError

DTYPE = np.float64


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None,
                 _parents: tuple = (), _backward: Callable | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if requires_grad and not _parents else None
        self.name = name
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self, grad=None) -> None:
        """Accumulate d(self)/d(leaf) into every leaf reachable from here."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError(f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = _topo(self)
        grads = {id(self): np.asarray(grad, dtype=DTYPE)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                if node.grad is None:
                    node.grad = np.zeros_like(node.data)
                node.grad += g
                frozen = getattr(node, "frozen_rows", None)
                if frozen:
                    node.grad[list(frozen)] = 0.0
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


class Parameter(Tensor):
    """Trainable leaf tensor carrying two optimizer accumulators."""

    __slots__ = ("acc_grad", "acc_delta", "frozen_rows")

    def __init__(self, data, name: str | None = None, frozen_rows: Sequence[int] = ()):
        super().__init__(data, requires_grad=True, name=name)
        self.acc_grad = np.zeros_like(self.data)
        self.acc_delta = np.zeros_like(self.data)
        self.frozen_rows = tuple(frozen_rows)

    def __repr__(self) -> str:
        return f"Parameter(shape={self.shape}, name={self.name!r})"


def _topo(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents: Sequence[Tensor], backward: Callable) -> Tensor:
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _backward=backward)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------------------
# Elementwise and linear algebra
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        if b.ndim == 1:
            return np.outer(g, b.data), a.data.T @ g
        return g @ b.data.T, a.data.T @ g

    return _make(a.data @ b.data, (a, b), backward)


def maximum(a, b) -> Tensor:
    """Elementwise max; ties route the gradient to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"maximum: incompatible shapes {a.shape} and {b.shape}")
    pick_a = a.data >= b.data
    return _make(np.where(pick_a, a.data, b.data), (a, b),
                 lambda g: (g * pick_a, g * ~pick_a))


def elementwise_mean(tensors: Sequence[Tensor]) -> Tensor:
    if not tensors:
        raise ShapeError("elementwise_mean of no tensors")
    out = tensors[0]
    for t in tensors[1:]:
        if t.shape != out.shape:
            raise ShapeError(f"elementwise_mean: incompatible shapes {out.shape} and {t.shape}")
        out = add(out, t)
    return mul(out, 1.0 / len(tensors))


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return _make(x.data * mask, (x,), lambda g: (g * mask,))


def identity(x) -> Tensor:
    return as_tensor(x)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = np.empty_like(x.data)
    pos = x.data >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ez = np.exp(x.data[~pos])
    out[~pos] = ez / (1.0 + ez)
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),))


def log(x) -> Tensor:
    x = as_tensor(x)
    return _make(np.log(x.data), (x,), lambda g: (g / x.data,))


def clip(x, lo: float, hi: float) -> Tensor:
    x = as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return _make(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,))


def softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _make(y, (x,), backward)


def dropout(x, rate: float, train: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: kept units are scaled by ``1 / (1 - rate)``."""
    x = as_tensor(x)
    if not train or rate <= 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    rng = rng if rng is not None else np.random.default_rng()
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _make(x.data * mask, (x,), lambda g: (g * mask,))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat: incompatible shapes " +
                         ", ".join(str(t.shape) for t in tensors)) from None
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _make(data, tensors, lambda g: tuple(np.split(g, sizes, axis=axis)))


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    old = x.shape
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def sum(x, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy naming
    x = as_tensor(x)
    shape = x.shape

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _make(x.data.sum(axis=axis), (x,), backward)


def mean(x, axis=None) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis), 1.0 / n)


# ---------------------------------------------------------------------------
# Gathers and segment reductions
# ---------------------------------------------------------------------------


def take_rows(x, index, pad: int | None = None) -> Tensor:
    """Gather ``x[index]`` along axis 0; entries equal to ``pad`` give zeros."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    if pad is not None:
        valid = index != pad
        safe = np.where(valid, index, 0)
    else:
        valid = None
        safe = index
    if safe.size and (safe.min() < 0 or safe.max() >= x.shape[0]):
        raise ShapeError(f"take_rows: index out of range for shape {x.shape}")
    data = x.data[safe]
    if valid is not None:
        data = data * valid[(...,) + (None,) * (x.ndim - 1)]

    def backward(g):
        gx = np.zeros_like(x.data)
        if valid is not None:
            g = g * valid[(...,) + (None,) * (x.ndim - 1)]
        np.add.at(gx, safe.reshape(-1), g.reshape((-1,) + x.shape[1:]))
        return (gx,)

    return _make(data, (x,), backward)


def _check_segments(op: str, x: Tensor, seg: np.ndarray, n: int) -> np.ndarray:
    seg = np.asarray(seg, dtype=np.int64)
    if seg.shape != (x.shape[0],):
        raise ShapeError(f"{op}: segment ids shape {seg.shape} does not match rows of {x.shape}")
    if seg.size and (seg.min() < 0 or seg.max() >= n):
        raise ShapeError(f"{op}: segment id out of range [0, {n})")
    return seg


def segment_sum(x, seg, n: int) -> Tensor:
    x = as_tensor(x)
    seg = _check_segments("segment_sum", x, seg, n)
    out = np.zeros((n,) + x.shape[1:], dtype=DTYPE)
    np.add.at(out, seg, x.data)
    return _make(out, (x,), lambda g: (g[seg],))


def segment_mean(x, seg, n: int) -> Tensor:
    x = as_tensor(x)
    seg = _check_segments("segment_mean", x, seg, n)
    counts = np.bincount(seg, minlength=n).astype(DTYPE)
    if np.any(counts == 0):
        raise ShapeError("segment_mean: empty segment")
    scale = (1.0 / counts)[(...,) + (None,) * (x.ndim - 1)]
    return mul(segment_sum(x, seg, n), scale)


def segment_max(x, seg, n: int) -> Tensor:
    """Per-segment elementwise max; ties route the gradient to the first row."""
    x = as_tensor(x)
    seg = _check_segments("segment_max", x, seg, n)
    if np.any(np.bincount(seg, minlength=n) == 0):
        raise ShapeError("segment_max: empty segment")
    order = np.argsort(seg, kind="stable")
    xs = x.data[order]
    starts = np.searchsorted(seg[order], np.arange(n))
    out = np.maximum.reduceat(xs, starts, axis=0)
    is_max = xs == out[seg[order]]
    rows = np.broadcast_to(np.arange(len(order))[(...,) + (None,) * (x.ndim - 1)], xs.shape)
    first = np.minimum.reduceat(np.where(is_max, rows, len(order)), starts, axis=0)
    winner = order[first]  # original row index of the max, per (segment, column)

    def backward(g):
        gx = np.zeros_like(x.data)
        cols = np.indices(winner.shape)[1:]
        np.add.at(gx, (winner,) + tuple(cols), g)
        return (gx,)

    return _make(out, (x,), backward)


def segment_softmax(scores, seg, n: int) -> Tensor:
    """Softmax over each segment of a 1-D score vector."""
    scores = as_tensor(scores)
    if scores.ndim != 1:
        raise ShapeError(f"segment_softmax expects a vector, got shape {scores.shape}")
    seg = _check_segments("segment_softmax", scores, seg, n)
    smax = np.full(n, -np.inf)
    np.maximum.at(smax, seg, scores.data)
    e = np.exp(scores.data - smax[seg])
    denom = np.zeros(n)
    np.add.at(denom, seg, e)
    y = e / denom[seg]

    def backward(g):
        dot = np.zeros(n)
        np.add.at(dot, seg, g * y)
        return (y * (g - dot[seg]),)

    return _make(y, (scores,), backward)


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    errors: dict[str, float] = field(default_factory=dict)
    tol: float = 1e-3

    @property
    def failures(self) -> list[str]:
        return [k for k, v in self.errors.items() if not v < self.tol]

    @property
    def passed(self) -> bool:
        return not self.failures


def grad_check(fn: Callable[[], Tensor], params: Iterable[Tensor], eps: float = 1e-4,
               tol: float = 1e-3, floor: float = 1e-8) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar ``fn()`` with central differences.

    The error for one tensor is ``|g_rev - g_fd| / max(|g_rev|, |g_fd|, floor)``
    in the Euclidean norm; the report's ``max_rel_error`` is the worst one.
    ``fn`` must be deterministic (no dropout).
    """
    params = list(params)
    for p in params:
        p.grad = np.zeros_like(p.data)
    out = fn()
    if out.data.size != 1:
        raise ShapeError(f"grad_check needs a scalar function, got shape {out.shape}")
    if out.requires_grad:
        out.backward()
    analytic = [p.grad.copy() for p in params]

    errors: dict[str, float] = {}
    for k, (p, ga) in enumerate(zip(params, analytic)):
        gn = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = gn.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = fn().item()
            flat[i] = orig - eps
            down = fn().item()
            flat[i] = orig
            gflat[i] = (up - down) / (2 * eps)
        frozen = getattr(p, "frozen_rows", None)
        if frozen:
            gn[list(frozen)] = 0.0
        denom = max(np.linalg.norm(ga), np.linalg.norm(gn), floor)
        name = p.name or f"param{k}"
        if name in errors:
            name = f"{name}#{k}"
        errors[name] = float(np.linalg.norm(ga - gn) / denom)
    worst = max(errors.values(), default=0.0)
    return GradCheckReport(max_rel_error=worst, errors=errors, tol=tol)
