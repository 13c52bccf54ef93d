"""Tape-based reverse-mode automatic differentiation over float64 numpy arrays.

Operations are recorded on the active :class:`Tape` (one per thread) only when
at least one input requires a gradient; outside a tape the same functions just
compute values, which is what evaluation and ODE sampling use.

    >>> w = Tensor([3.0], requires_grad=True)
    >>> with Tape() as tape:
    ...     loss = sum_(w * w)
    ...     grads = tape.backward(loss)
    >>> float(grads[w][0])
    6.0
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "ShapeError",
    "NonFiniteError",
    "add",
    "sub",
    "mul",
    "matmul",
    "scale",
    "sum_",
    "mean",
    "tanh",
    "square_norm_rows",
    "exp",
    "log",
    "logsumexp_mean",
    "backward",
    "active_tape",
]


class ShapeError(ValueError):
    """Raised when a primitive receives non-conforming argument shapes."""

    def __init__(self, primitive: str, *shapes: tuple) -> None:
        self.primitive = primitive
        self.shapes = shapes
        joined = " and ".join(str(s) for s in shapes)
        super().__init__(f"{primitive}: incompatible shapes {joined}")


class NonFiniteError(FloatingPointError):
    """Raised in checked mode when a primitive produces NaN or Inf."""


_local = threading.local()


def active_tape() -> "Tape | None":
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Tensor:
    """Dense float64 array with an optional gradient accumulator."""

    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "tape_id", "__weakref__")

    def __init__(self, data, requires_grad: bool = False) -> None:
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.tape_id: int | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Ordered record of primitive applications.

    Nodes are appended as they are created, so the list is already in
    topological order; :meth:`backward` replays it in reverse.
    """

    def __init__(self, check_finite: bool = False) -> None:
        self.nodes: list[Tensor] = []
        self.check_finite = check_finite

    def __enter__(self) -> "Tape":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _local.stack.pop()

    def record(self, out: Tensor) -> None:
        out.tape_id = id(self)
        self.nodes.append(out)

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        """Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``.

        Returns a map from leaf tensor to the gradient contributed by this call.
        """
        if loss.data.shape != () and loss.data.size != 1:
            raise ShapeError("backward (loss must be scalar)", loss.shape)
        leaf_grads: dict[Tensor, np.ndarray] = {}
        if loss.backward_fn is None:
            # Loss is itself a leaf or detached.
            if loss.requires_grad:
                leaf_grads[loss] = np.ones_like(loss.data)
                _accumulate(loss, leaf_grads[loss])
            return leaf_grads
        if loss.tape_id != id(self):
            raise ValueError("loss was not recorded on this tape")

        pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        for node in reversed(self.nodes):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if parent.backward_fn is None:
                    if parent in leaf_grads:
                        leaf_grads[parent] = leaf_grads[parent] + pg
                    else:
                        leaf_grads[parent] = pg
                else:
                    key = id(parent)
                    pending[key] = pending[key] + pg if key in pending else pg
        for leaf, g in leaf_grads.items():
            _accumulate(leaf, g)
        return leaf_grads


def _accumulate(leaf: Tensor, g: np.ndarray) -> None:
    g = np.asarray(g, dtype=np.float64).reshape(leaf.shape)
    leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def backward(loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Run the backward pass on the tape that recorded ``loss``."""
    tape = active_tape()
    if tape is None:
        if loss.backward_fn is None:
            # A detached scalar: nothing reachable.
            return {}
        raise RuntimeError("no active tape; call tape.backward(loss) on the recording tape")
    return tape.backward(loss)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(name: str, value: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    tape = active_tape()
    out = Tensor(value)
    if tape is not None and tape.check_finite and not np.all(np.isfinite(value)):
        raise NonFiniteError(f"{name}: non-finite output")
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = parents
        out.backward_fn = backward_fn
        tape.record(out)
    return out


def add(a, b) -> Tensor:
    """Elementwise sum; ``b`` may also be a row vector added to every row of a matrix."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape == b.shape:
        return _make("add", a.data + b.data, (a, b), lambda g: (g, g))
    if a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        return _make("add", a.data + b.data, (a, b), lambda g: (g, g.sum(axis=0)))
    raise ShapeError("add", a.shape, b.shape)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError("sub", a.shape, b.shape)
    return _make("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError("mul", a.shape, b.shape)
    av, bv = a.data, b.data
    return _make("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)
    av, bv = a.data, b.data
    need_a, need_b = a.requires_grad, b.requires_grad

    def grads(g):
        return (g @ bv.T if need_a else None, av.T @ g if need_b else None)

    return _make("matmul", av @ bv, (a, b), grads)


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)
    return _make("scale", a.data * c, (a,), lambda g: (g * c,))


def sum_(a) -> Tensor:
    a = _as_tensor(a)
    shape = a.shape
    return _make("sum", np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, shape),))


def mean(a) -> Tensor:
    a = _as_tensor(a)
    if a.data.size == 0:
        raise ShapeError("mean (empty)", a.shape)
    shape, n = a.shape, a.data.size
    return _make("mean", np.asarray(a.data.mean()), (a,), lambda g: (np.broadcast_to(g / n, shape),))


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    y = np.tanh(a.data)
    return _make("tanh", y, (a,), lambda g: (g * (1.0 - y * y),))


def square_norm_rows(a) -> Tensor:
    """Row-wise squared Euclidean norm of a (B, d) matrix, giving a length-B vector."""
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError("square_norm_rows", a.shape)
    av = a.data
    return _make("square_norm_rows", np.einsum("ij,ij->i", av, av), (a,), lambda g: (2.0 * g[:, None] * av,))


def exp(a) -> Tensor:
    a = _as_tensor(a)
    y = np.exp(a.data)
    return _make("exp", y, (a,), lambda g: (g * y,))


def log(a) -> Tensor:
    a = _as_tensor(a)
    av = a.data
    return _make("log", np.log(av), (a,), lambda g: (g / av,))


def logsumexp_mean(v) -> Tensor:
    """Stabilized ``log(mean(exp(v)))`` of a length-B vector.

    The gradient is ``softmax(v)``.
    """
    v = _as_tensor(v)
    if v.data.ndim != 1:
        raise ShapeError("logsumexp_mean", v.shape)
    if v.data.size == 0:
        raise ShapeError("logsumexp_mean (empty batch)", v.shape)
    m = v.data.max()
    e = np.exp(v.data - m)
    s = e.sum()
    value = m + np.log(s / v.data.size)
    weights = e / s
    return _make("logsumexp_mean", np.asarray(value), (v,), lambda g: (g * weights,))
