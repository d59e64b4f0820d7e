"""Dense 2-D tensors with reverse-mode differentiation.

Every operation returns a new :class:`Tensor`. When any input participates
in differentiation the output remembers its inputs and a closure mapping the
output gradient to input gradients; :func:`backward` orders those records
into a :class:`Tape` and replays it in reverse.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import DataError, DimensionError, ParameterError, UsageError
from .sparse import SparseMatrix

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """A float64 matrix that may take part in gradient computation.

    Leaves created with ``requires_grad=True`` start with an all-zero
    ``grad`` so parameters unreachable from a loss still read as zero.
    Gradients accumulate into leaves; call :meth:`zero_grad` between steps.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise DimensionError(f"tensors are 2-D, got {arr.ndim}-D data")
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = "leaf"
        self._consumed = False

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple["Tensor", ...], backward: BackwardFn, op: str) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out._op = op
        out._consumed = False
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.shape != (1, 1):
            raise UsageError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self._op}{flag})"


class Tape:
    """Operations reachable from an output, in topological order.

    Each non-leaf appears after every tensor it consumes.
    """

    def __init__(self, ops: list[Tensor]):
        self.ops = ops

    @classmethod
    def from_output(cls, out: Tensor) -> "Tape":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(out, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            if node._consumed:
                raise UsageError("graph was already released by a previous backward(); re-run the forward pass")
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return cls(order)

    def __len__(self) -> int:
        return len(self.ops)


def backward(loss: Tensor) -> Tape:
    """Populate ``grad`` of every leaf reachable from the scalar ``loss``.

    The recorded graph is released afterwards, so a second call on the same
    loss raises :class:`UsageError`.
    """
    if loss.shape != (1, 1):
        raise UsageError(f"backward() needs a scalar (1x1) loss, got shape {loss.shape}")
    if loss._consumed:
        raise UsageError("backward() already called on this loss; re-run the forward pass")
    if not loss.requires_grad:
        raise UsageError("loss does not depend on any tensor with requires_grad=True")
    tape = Tape.from_output(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones((1, 1))}
    for node in reversed(tape.ops):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg
    for node in tape.ops:
        if not node.is_leaf:
            node._parents = ()
            node._backward = None
            node._consumed = True
    return tape


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.cols != b.rows:
        raise DimensionError(f"matmul: {a.shape} @ {b.shape} (inner dimensions {a.cols} != {b.rows})")
    ad, bd = a.data, b.data

    def back(g):
        return (g @ bd.T if a.requires_grad else None, ad.T @ g if b.requires_grad else None)

    return Tensor._from_op(ad @ bd, (a, b), back, "matmul")


def spmm(s: SparseMatrix, d: Tensor) -> Tensor:
    """Sparse-dense product; the sparse operand is never trainable."""
    d = _as_tensor(d)
    if s.dim != d.rows:
        raise DimensionError(f"spmm: sparse {s.shape} @ dense {d.shape}")

    def back(g):
        return (s.transpose().dot(g),)

    return Tensor._from_op(s.dot(d.data), (d,), back, "spmm")


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    if not parts:
        raise DimensionError("concat_cols needs at least one tensor")
    rows = parts[0].rows
    for p in parts[1:]:
        if p.rows != rows:
            raise DimensionError(f"concat_cols: row counts differ ({rows} vs {p.rows})")
    if len(parts) == 1:
        return parts[0]
    bounds = np.cumsum([0] + [p.cols for p in parts])

    def back(g):
        return tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(parts)))

    return Tensor._from_op(np.concatenate([p.data for p in parts], axis=1), tuple(parts), back, "concat")


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} differ")
    return Tensor._from_op(a.data + b.data, (a, b), lambda g: (g, g), "add")


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a 1 x cols row vector to every row of ``x``."""
    x, bias = _as_tensor(x), _as_tensor(bias)
    if bias.shape != (1, x.cols):
        raise DimensionError(f"add_bias: bias {bias.shape} does not match {x.shape}")
    return Tensor._from_op(x.data + bias.data, (x, bias), lambda g: (g, g.sum(axis=0, keepdims=True)), "add_bias")


def tensor_sum(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    shape = x.shape
    return Tensor._from_op(np.array([[x.data.sum()]]), (x,), lambda g: (np.full(shape, g[0, 0]),), "sum")


def relu(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    mask = x.data > 0
    return Tensor._from_op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def tanh(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    y = np.tanh(x.data)
    return Tensor._from_op(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def identity(x: Tensor) -> Tensor:
    return _as_tensor(x)


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {"relu": relu, "tanh": tanh, "identity": identity}


def dropout(x: Tensor, p: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-p) so inference is the identity."""
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout probability must lie in [0, 1), got {p}")
    x = _as_tensor(x)
    if not training or p == 0.0:
        return x
    if rng is None:
        raise UsageError("training-mode dropout needs a seeded generator")
    scale = np.where(rng.random(x.shape) >= p, 1.0 / (1.0 - p), 0.0)
    return Tensor._from_op(x.data * scale, (x,), lambda g: (g * scale,), "dropout")


def softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def masked_softmax_cross_entropy(logits: Tensor, labels, mask=None) -> Tensor:
    """Mean of -log softmax(logits)[label] over the rows in ``mask``.

    ``labels`` holds one class index per logits row; ``mask`` is a sequence
    of row indices (all rows when omitted).
    """
    logits = _as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise DataError(f"expected {n} labels, got shape {labels.shape}")
    idx = np.arange(n) if mask is None else np.asarray(mask, dtype=np.int64).ravel()
    if idx.size == 0:
        raise ParameterError("loss mask is empty")
    if idx.min() < 0 or idx.max() >= n:
        raise DataError(f"mask index outside [0, {n})")
    y = labels[idx]
    if y.min() < 0 or y.max() >= k:
        raise DataError(f"label outside [0, {k})")
    z = logits.data[idx]
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(idx.size)
    loss = float(np.mean(log_norm - shifted[rows, y]))

    def back(g):
        probs = np.exp(shifted - log_norm[:, None])
        probs[rows, y] -= 1.0
        full = np.zeros((n, k))
        np.add.at(full, idx, probs * (g[0, 0] / idx.size))
        return (full,)

    return Tensor._from_op(np.array([[loss]]), (logits,), back, "softmax_xent")


def _check_segments(x: Tensor, offsets: np.ndarray) -> np.ndarray:
    offsets = np.asarray(offsets, dtype=np.int64)
    if offsets.ndim != 1 or offsets.size < 2 or offsets[0] != 0 or offsets[-1] != x.rows:
        raise DimensionError(f"segment offsets must run from 0 to {x.rows}")
    if np.any(np.diff(offsets) <= 0):
        raise DataError("empty graph segment in readout")
    return offsets


def segment_mean(x: Tensor, offsets) -> Tensor:
    """Column means of consecutive row blocks ``x[offsets[i]:offsets[i+1]]``."""
    x = _as_tensor(x)
    offsets = _check_segments(x, offsets)
    counts = np.diff(offsets).astype(np.float64)[:, None]
    out = np.add.reduceat(x.data, offsets[:-1], axis=0) / counts
    reps = np.diff(offsets)
    return Tensor._from_op(out, (x,), lambda g: (np.repeat(g / counts, reps, axis=0),), "segment_mean")


def segment_max(x: Tensor, offsets) -> Tensor:
    """Column maxima of consecutive row blocks; ties send gradient to the first row."""
    x = _as_tensor(x)
    offsets = _check_segments(x, offsets)
    out = np.maximum.reduceat(x.data, offsets[:-1], axis=0)
    reps = np.diff(offsets)
    seg = np.repeat(np.arange(reps.size), reps)
    hit = x.data == out[seg]
    # keep only the first maximal row per (segment, column)
    cum = np.cumsum(hit, axis=0)
    start = np.vstack([np.zeros((1, x.cols)), cum])[offsets[:-1]]
    first = hit & ((cum - start[seg]) == 1)

    def back(g):
        return (np.where(first, g[seg], 0.0),)

    return Tensor._from_op(out, (x,), back, "segment_max")


def parameters_finite(tensors: Iterable[Tensor]) -> bool:
    return all(np.all(np.isfinite(t.data)) for t in tensors)
