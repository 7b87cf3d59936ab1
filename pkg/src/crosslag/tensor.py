"""Minimal reverse-mode autodiff over float64 numpy arrays.

Deliberately closed-world: only the operations the forecaster needs are
implemented (matmul, elementwise arithmetic, concat/slice/reshape, causal
1-d convolution, masked softmax, sigmoid/gelu, dropout, reductions and the
two per-timestep attention kernels). No general broadcasting framework, no
graph optimization, CPU only.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np
from scipy.special import erf, expit

from .errors import ConfigError, DimensionError, NumericError

__all__ = [
    "Tensor",
    "as_tensor",
    "no_grad",
    "concat",
    "matmul",
    "conv1d_causal",
    "masked_softmax",
    "sigmoid",
    "gelu",
    "dropout",
    "per_step_scores",
    "per_step_mix",
    "reset_score_evals",
    "score_evals",
]

_GRAD_ENABLED = True

# cumulative count of query-key dot products evaluated by per_step_scores;
# used to verify the T*L*F-per-forward complexity contract
_SCORE_EVALS = 0


def reset_score_evals() -> None:
    global _SCORE_EVALS
    _SCORE_EVALS = 0


def score_evals() -> int:
    return _SCORE_EVALS


@contextmanager
def no_grad():
    """Disable graph construction inside the block (pure inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _check_finite(arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NumericError("tensor contains non-finite values")


class Tensor:
    """Immutable dense float64 array plus an optional backward closure.

    Values are finite by contract; constructing a tensor with NaN/Inf raises
    NumericError. Treat ``data`` as read-only after construction.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        _check_finite(arr)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None

    @classmethod
    def _from_op(cls, data: np.ndarray, parents, backward) -> "Tensor":
        out = cls.__new__(cls)
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr)
        out.data = arr
        out.grad = None
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self) -> None:
        """Reverse-mode pass from a scalar output, accumulating into .grad."""
        if self.data.size != 1:
            raise DimensionError("backward() requires a scalar tensor")
        if not self.requires_grad:
            return
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # interior activations: free the graph reference eagerly
                if node is not self:
                    node.grad = None if node._parents else node.grad

    # -- elementwise arithmetic (numpy broadcasting, gradient un-broadcast) --

    def __add__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.data.shape))

        return Tensor._from_op(a.data + b.data, (a, b), backward)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(-_unbroadcast(g, b.data.shape))

        return Tensor._from_op(a.data - b.data, (a, b), backward)

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.data.shape))

        return Tensor._from_op(a.data * b.data, (a, b), backward)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __truediv__(self, other):
        if isinstance(other, Tensor) or not np.isscalar(other):
            raise DimensionError("tensor division supports scalar divisors only")
        return self * (1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    # -- structure --

    def __getitem__(self, key):
        src = self
        out_data = src.data[key]

        def backward(g):
            if src.requires_grad:
                buf = np.zeros_like(src.data)
                buf[key] += g
                src._accumulate(buf)

        return Tensor._from_op(out_data, (src,), backward)

    def reshape(self, shape) -> "Tensor":
        src = self
        old_shape = src.data.shape

        def backward(g):
            if src.requires_grad:
                src._accumulate(g.reshape(old_shape))

        return Tensor._from_op(src.data.reshape(shape), (src,), backward)

    def moveaxis(self, source: int, destination: int) -> "Tensor":
        src = self

        def backward(g):
            if src.requires_grad:
                src._accumulate(np.moveaxis(g, destination, source))

        return Tensor._from_op(np.moveaxis(src.data, source, destination), (src,), backward)

    def transpose_last(self) -> "Tensor":
        """Swap the last two axes."""
        return self.moveaxis(-1, -2)

    # -- reductions --

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        src = self

        def backward(g):
            if not src.requires_grad:
                return
            if axis is None:
                src._accumulate(np.broadcast_to(g, src.data.shape).copy())
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                src._accumulate(np.broadcast_to(gg, src.data.shape).copy())

        return Tensor._from_op(src.data.sum(axis=axis, keepdims=keepdims), (src,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / n

    def __repr__(self):
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


def as_tensor(x) -> Tensor:
    """Wrap arrays/scalars as constant tensors; pass tensors through."""
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Stacked matrix product over the last two axes."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError("matmul operands must have ndim >= 2")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(
            f"matmul inner dimensions differ: {a.data.shape} @ {b.data.shape}"
        )

    def backward(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a._accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b._accumulate(_unbroadcast(gb, b.data.shape))

    return Tensor._from_op(np.matmul(a.data, b.data), (a, b), backward)


def concat(tensors, axis: int = -1) -> Tensor:
    """Concatenate tensors along an axis."""
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise DimensionError("concat of zero tensors")
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    return Tensor._from_op(np.concatenate([t.data for t in ts], axis=axis), ts, backward)


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    y = expit(x.data)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * y * (1.0 - y))

    return Tensor._from_op(y, (x,), backward)


_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def gelu(x: Tensor) -> Tensor:
    """Exact (erf-based) gaussian error linear unit."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))

    def backward(g):
        if x.requires_grad:
            pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
            x._accumulate(g * (cdf + x.data * pdf))

    return Tensor._from_op(x.data * cdf, (x,), backward)


def conv1d_causal(x: Tensor, weights: Tensor) -> Tensor:
    """Causal 1-d convolution along the last axis with left zero padding.

    out[..., t] = sum_i weights[i] * x[..., t - i], x treated as 0 before the
    first sample, so out[..., t] never depends on x[..., t+1:].
    """
    x = as_tensor(x)
    weights = as_tensor(weights)
    if weights.ndim != 1 or weights.size == 0:
        raise ConfigError("conv1d_causal needs a non-empty 1-d weight vector")
    n = weights.size
    t_len = x.data.shape[-1]
    out = np.zeros_like(x.data)
    for i in range(min(n, t_len)):
        if i == 0:
            out += weights.data[0] * x.data
        else:
            out[..., i:] += weights.data[i] * x.data[..., :-i]

    def backward(g):
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            for i in range(min(n, t_len)):
                if i == 0:
                    gx += weights.data[0] * g
                else:
                    gx[..., :-i] += weights.data[i] * g[..., i:]
            x._accumulate(gx)
        if weights.requires_grad:
            gw = np.zeros(n)
            for i in range(min(n, t_len)):
                if i == 0:
                    gw[0] = np.sum(g * x.data)
                else:
                    gw[i] = np.sum(g[..., i:] * x.data[..., :-i])
            weights._accumulate(gw)

    return Tensor._from_op(out, (x, weights), backward)


def masked_softmax(scores: Tensor, valid: np.ndarray) -> Tensor:
    """Softmax over the last axis restricted to positions where valid is True.

    Invalid positions come out exactly 0. Rows with no valid position come out
    all zero. The per-row max over valid entries is subtracted before
    exponentiation for overflow safety.
    """
    scores = as_tensor(scores)
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != scores.data.shape:
        try:
            valid = np.broadcast_to(valid, scores.data.shape)
        except ValueError:
            raise DimensionError(
                f"mask shape {valid.shape} incompatible with scores {scores.data.shape}"
            ) from None

    masked = np.where(valid, scores.data, -np.inf)
    row_max = masked.max(axis=-1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    # exp(-inf) underflows to an exact 0 at invalid positions, warning-free
    e = np.exp(np.where(valid, scores.data - row_max, -np.inf))
    denom = e.sum(axis=-1, keepdims=True)
    safe = np.where(denom > 0.0, denom, 1.0)
    out = e / safe

    def backward(g):
        if scores.requires_grad:
            inner = (g * out).sum(axis=-1, keepdims=True)
            scores._accumulate(out * (g - inner))

    return Tensor._from_op(out, (scores,), backward)


def dropout(x: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout: scales kept units by 1/(1-p). p=0 is the identity."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    x = as_tensor(x)
    if p == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout with p > 0 requires a random generator")
    keep = (rng.random(x.data.shape) >= p) / (1.0 - p)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g * keep)

    return Tensor._from_op(x.data * keep, (x,), backward)


def per_step_scores(queries: Tensor, keys: Tensor) -> Tensor:
    """Dot products between each timestep's query and that timestep's own keys.

    queries: (..., T, d), keys: (..., T, J, d) -> (..., T, J). Each output
    element is one query-key dot product; the number evaluated per call is
    tracked by the module-level score counter.
    """
    global _SCORE_EVALS
    q = as_tensor(queries)
    k = as_tensor(keys)
    if q.ndim + 1 != k.ndim or q.data.shape[-1] != k.data.shape[-1] \
            or q.data.shape[:-1] != k.data.shape[:-2]:
        raise DimensionError(
            f"per_step_scores shapes incompatible: {q.data.shape} vs {k.data.shape}"
        )
    out = np.einsum("...td,...tjd->...tj", q.data, k.data)
    _SCORE_EVALS += out.size

    def backward(g):
        if q.requires_grad:
            q._accumulate(np.einsum("...tj,...tjd->...td", g, k.data))
        if k.requires_grad:
            k._accumulate(np.einsum("...tj,...td->...tjd", g, q.data))

    return Tensor._from_op(out, (q, k), backward)


def per_step_mix(weights: Tensor, values: Tensor) -> Tensor:
    """Combine each timestep's values by that timestep's attention weights.

    weights: (..., T, J), values: (..., T, J, d) -> (..., T, d).
    """
    a = as_tensor(weights)
    v = as_tensor(values)
    if a.ndim + 1 != v.ndim or a.data.shape != v.data.shape[:-1]:
        raise DimensionError(
            f"per_step_mix shapes incompatible: {a.data.shape} vs {v.data.shape}"
        )
    out = np.einsum("...tj,...tjd->...td", a.data, v.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(np.einsum("...td,...tjd->...tj", g, v.data))
        if v.requires_grad:
            v._accumulate(np.einsum("...tj,...td->...tjd", a.data, g))

    return Tensor._from_op(out, (a, v), backward)
