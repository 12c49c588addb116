"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations only record onto a :class:`Tape` while one is active, so plain
forward evaluation (sampling, metrics) carries no graph overhead.  Every
backward rule is itself written in terms of recorded operations, which makes
second-order quantities (the R1 penalty's gradient with respect to the
discriminator weights) available by calling :func:`backprop` with
``create_graph=True`` inside the tape and then once more on the result.
"""
from __future__ import annotations

import contextlib
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import ContractError, NumericsError, ShapeError

_state = threading.local()


def _active_tape() -> "Tape | None":
    return getattr(_state, "tape", None)


class Tape:
    """Ordered record of executed differentiable operations.

    Use as a context manager; nodes are appended in execution order, so the
    reversed list is always a valid topological order for backprop.
    """

    def __init__(self):
        self.nodes: list[Tensor] = []
        self._outer = None

    def __enter__(self):
        self._outer = _active_tape()
        _state.tape = self
        return self

    def __exit__(self, *exc):
        _state.tape = self._outer
        return False

    def __len__(self):
        return len(self.nodes)


@contextlib.contextmanager
def no_record():
    """Temporarily suspend recording on the active tape."""
    outer = _active_tape()
    _state.tape = None
    try:
        yield
    finally:
        _state.tape = outer


def _frozen(arr: np.ndarray) -> np.ndarray:
    if arr.dtype != np.float64:
        arr = arr.astype(np.float64)
    if arr.flags.writeable:
        arr.flags.writeable = False
    return arr


class Tensor:
    """Immutable float64 array plus autodiff bookkeeping."""

    __slots__ = ("data", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = _frozen(np.array(data, dtype=np.float64))
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None
        self.name = name

    @classmethod
    def _make(cls, arr, parents: tuple = (), backward: Callable | None = None) -> "Tensor":
        out = cls.__new__(cls)
        out.data = _frozen(np.asarray(arr, dtype=np.float64))
        out.name = None
        tape = _active_tape()
        if backward is not None and tape is not None and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
            tape.nodes.append(out)
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    # -- metadata ---------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def detach(self) -> "Tensor":
        return Tensor._make(self.data)

    def __repr__(self):
        rg = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{rg})"

    def __len__(self):
        return self.shape[0]

    # -- operators ----------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    @property
    def T(self):
        return swapaxes(self, -1, -2)


def as_tensor(x) -> Tensor:
    """Wrap ``x`` as a constant tensor unless it already is one."""
    return x if isinstance(x, Tensor) else Tensor._make(np.asarray(x, dtype=np.float64))


def check_finite(t: Tensor | np.ndarray, what: str = "tensor") -> None:
    arr = t.data if isinstance(t, Tensor) else np.asarray(t)
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite values in {what}")


# ---------------------------------------------------------------------------
# backprop
# ---------------------------------------------------------------------------
class Gradients:
    """Gradient map keyed by tensor identity; unreached tensors map to zero."""

    def __init__(self):
        self._store: dict[int, tuple[Tensor, Tensor]] = {}

    def _set(self, t: Tensor, g: Tensor):
        self._store[id(t)] = (t, g)

    def __getitem__(self, t: Tensor) -> Tensor:
        hit = self._store.get(id(t))
        if hit is None:
            return Tensor._make(np.zeros(t.shape))
        return hit[1]

    def __contains__(self, t: Tensor) -> bool:
        return id(t) in self._store

    def __len__(self):
        return len(self._store)

    def items(self):
        return [(t, g) for t, g in self._store.values()]


def backprop(tape: Tape, loss: Tensor, wrt: Iterable[Tensor] | None = None,
             create_graph: bool = False) -> Gradients:
    """Replay ``tape`` in reverse from the scalar ``loss``.

    Every leaf with ``requires_grad`` that the loss depends on receives a
    gradient; tensors listed in ``wrt`` (leaves or intermediates) are always
    present in the result, as zeros when unreached.  With ``create_graph``
    the backward computation is itself recorded on the active tape.
    """
    if loss.size != 1:
        raise ContractError(f"loss must be scalar, got shape {loss.shape}")
    wrt = list(wrt) if wrt is not None else []
    keep = {id(t) for t in wrt}
    result = Gradients()

    ctx = contextlib.nullcontext() if create_graph else no_record()
    with ctx:
        seed = Tensor._make(np.ones(loss.shape))
        grads: dict[int, Tensor] = {id(loss): seed}
        if loss.requires_grad and loss.is_leaf:
            result._set(loss, seed)
        if loss.requires_grad and not loss.is_leaf:
            nodes = list(tape.nodes)
            for node in reversed(nodes):
                key = id(node)
                g = grads.get(key) if key in keep else grads.pop(key, None)
                if g is None:
                    continue
                pgrads = node._backward(g)
                for p, gp in zip(node._parents, pgrads):
                    if gp is None or not p.requires_grad:
                        continue
                    pk = id(p)
                    prev = grads.get(pk)
                    grads[pk] = gp if prev is None else add(prev, gp)
                    if p.is_leaf:
                        result._set(p, grads[pk])
        for t in wrt:
            g = grads.get(id(t))
            if g is not None:
                result._set(t, g)
    return result


# ---------------------------------------------------------------------------
# broadcasting helpers
# ---------------------------------------------------------------------------
def _broadcast_shape(a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"incompatible shapes {a.shape} and {b.shape}") from None


def sum_to(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    """Reduce a broadcast result back to ``shape``."""
    shape = tuple(shape)
    if x.shape == shape:
        return x
    lead = x.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, s in enumerate(shape) if s == 1 and x.shape[i + lead] != 1)
    arr = x.data.sum(axis=axes, keepdims=True)
    if lead:
        arr = arr.reshape(arr.shape[lead:])

    def bw(g):
        return (broadcast_to(g, x.shape),)

    return Tensor._make(arr.reshape(shape), (x,), bw)


def broadcast_to(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    shape = tuple(shape)
    if x.shape == shape:
        return x
    try:
        arr = np.broadcast_to(x.data, shape)
    except ValueError:
        raise ShapeError(f"cannot broadcast {x.shape} to {shape}") from None

    def bw(g):
        return (sum_to(g, x.shape),)

    return Tensor._make(np.ascontiguousarray(arr), (x,), bw)


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return Tensor._make(a.data + b.data, (a, b),
                        lambda g: (sum_to(g, a.shape), sum_to(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)
    return Tensor._make(a.data - b.data, (a, b),
                        lambda g: (sum_to(g, a.shape), sum_to(neg(g), b.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(-a.data, (a,), lambda g: (neg(g),))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)

    def bw(g):
        ga = sum_to(mul(g, b), a.shape) if a.requires_grad else None
        gb = sum_to(mul(g, a), b.shape) if b.requires_grad else None
        return ga, gb

    return Tensor._make(a.data * b.data, (a, b), bw)


def scale(a, c: float) -> Tensor:
    """Multiply by a python scalar."""
    a = as_tensor(a)
    c = float(c)
    return Tensor._make(a.data * c, (a,), lambda g: (scale(g, c),))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a, b)

    def bw(g):
        ga = sum_to(div(g, b), a.shape) if a.requires_grad else None
        gb = sum_to(neg(div(mul(g, a), mul(b, b))), b.shape) if b.requires_grad else None
        return ga, gb

    return Tensor._make(a.data / b.data, (a, b), bw)


def sin(x) -> Tensor:
    x = as_tensor(x)
    return Tensor._make(np.sin(x.data), (x,), lambda g: (mul(g, cos(x)),))


def cos(x) -> Tensor:
    x = as_tensor(x)
    return Tensor._make(np.cos(x.data), (x,), lambda g: (neg(mul(g, sin(x))),))


def square(x) -> Tensor:
    x = as_tensor(x)
    return Tensor._make(x.data * x.data, (x,), lambda g: (scale(mul(g, x), 2.0),))


def sqrt(x) -> Tensor:
    x = as_tensor(x)
    out_holder: list[Tensor] = []

    def bw(g):
        return (div(scale(g, 0.5), out_holder[0]),)

    out = Tensor._make(np.sqrt(x.data), (x,), bw)
    out_holder.append(out)
    return out


def leaky_relu(x, slope: float = 0.2) -> Tensor:
    x = as_tensor(x)
    mask = np.where(x.data > 0, 1.0, slope)

    def bw(g):
        return (mul(g, Tensor._make(mask)),)

    return Tensor._make(x.data * mask, (x,), bw)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out_holder: list[Tensor] = []

    def bw(g):
        s = out_holder[0]
        return (mul(g, mul(s, sub(1.0, s))),)

    out = Tensor._make(0.5 * (1.0 + np.tanh(0.5 * x.data)), (x,), bw)
    out_holder.append(out)
    return out


def softplus(x) -> Tensor:
    x = as_tensor(x)
    return Tensor._make(np.logaddexp(0.0, x.data), (x,), lambda g: (mul(g, sigmoid(x)),))


# ---------------------------------------------------------------------------
# reductions and shape manipulation
# ---------------------------------------------------------------------------
def _norm_axes(axis, ndim) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _norm_axes(axis, x.ndim)
    arr = x.data.sum(axis=axes, keepdims=keepdims)
    kept = tuple(1 if i in axes else s for i, s in enumerate(x.shape))

    def bw(g):
        return (broadcast_to(reshape(g, kept), x.shape),)

    return Tensor._make(arr, (x,), bw)


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    axes = _norm_axes(axis, x.ndim)
    n = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return scale(sum_(x, axis, keepdims), 1.0 / n)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    shape = tuple(int(s) for s in shape)
    try:
        arr = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"cannot reshape {x.shape} to {shape}") from None
    if arr.shape == x.shape:
        return x
    return Tensor._make(arr, (x,), lambda g: (reshape(g, x.shape),))


def transpose(x, axes: Sequence[int]) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return Tensor._make(np.transpose(x.data, axes), (x,), lambda g: (transpose(g, inv),))


def swapaxes(x, a1: int, a2: int) -> Tensor:
    x = as_tensor(x)
    axes = list(range(x.ndim))
    axes[a1], axes[a2] = axes[a2], axes[a1]
    return transpose(x, axes)


def slice_axis(x, axis: int, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    axis = axis % x.ndim
    n = x.shape[axis]
    if not 0 <= start <= stop <= n:
        raise ShapeError(f"slice [{start}:{stop}] out of range for extent {n}")
    sl = [slice(None)] * x.ndim
    sl[axis] = slice(start, stop)
    return Tensor._make(np.ascontiguousarray(x.data[tuple(sl)]), (x,),
                        lambda g: (pad_axis(g, axis, start, n - stop),))


def pad_axis(x, axis: int, before: int, after: int) -> Tensor:
    """Zero-pad along one axis."""
    x = as_tensor(x)
    axis = axis % x.ndim
    widths = [(0, 0)] * x.ndim
    widths[axis] = (before, after)
    n = x.shape[axis]
    return Tensor._make(np.pad(x.data, widths), (x,),
                        lambda g: (slice_axis(g, axis, before, before + n),))


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat of empty sequence")
    axis = axis % ts[0].ndim
    try:
        arr = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def bw(g):
        return tuple(slice_axis(g, axis, int(bounds[i]), int(bounds[i + 1]))
                     if ts[i].requires_grad else None for i in range(len(ts)))

    return Tensor._make(arr, tuple(ts), bw)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    axis = axis % (ts[0].ndim + 1)
    expanded = [reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in ts]
    return concat(expanded, axis)


def getitem(x, key) -> Tensor:
    """Basic integer/slice indexing, lowered onto gather."""
    x = as_tensor(x)
    idx = np.arange(x.size).reshape(x.shape)[key]
    if not isinstance(idx, np.ndarray):
        idx = np.asarray(idx)
    return gather(x, idx)


def gather(x, idx: np.ndarray) -> Tensor:
    """Pick flat elements of ``x``; index ``x.size`` stands for a zero entry."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)
    flat = np.append(x.data.reshape(-1), 0.0)
    out = flat[idx]

    def bw(g):
        return (scatter(g, idx, x.shape),)

    return Tensor._make(out, (x,), bw)


def scatter(g, idx: np.ndarray, shape: tuple[int, ...]) -> Tensor:
    """Adjoint of :func:`gather`: sum entries of ``g`` into a zero array."""
    g = as_tensor(g)
    if g.shape != idx.shape:
        raise ShapeError(f"scatter values {g.shape} vs index {idx.shape}")
    size = int(np.prod(shape))
    acc = np.bincount(idx.reshape(-1), weights=g.data.reshape(-1), minlength=size + 1)
    return Tensor._make(acc[:size].reshape(shape), (g,), lambda gg: (gather(gg, idx),))


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------
def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes, batch axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError("matmul needs at least 2-D operands")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    try:
        arr = np.matmul(a.data, b.data)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None

    def bw(g):
        ga = sum_to(matmul(g, swapaxes(b, -1, -2)), a.shape) if a.requires_grad else None
        gb = sum_to(matmul(swapaxes(a, -1, -2), g), b.shape) if b.requires_grad else None
        return ga, gb

    return Tensor._make(arr, (a, b), bw)
