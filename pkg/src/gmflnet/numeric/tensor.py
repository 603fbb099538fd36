"""Reverse-mode differentiation over 2-D float64 arrays.

Every value in the network is a :class:`Tensor` wrapping a row-major
``(rows, cols)`` array.  Operations record their parents and a closure that
pushes the output gradient back to them; :meth:`Tensor.backward` walks the
recorded graph in reverse topological order.

Frames are batched by stacking their point rows, so "pool over points" is a
pool over consecutive groups of rows (see :func:`pool_rows`).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when operand shapes violate an operation's contract."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(data, dtype=DTYPE)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ShapeError(f"Tensor must be 2-D, got shape {arr.shape}")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape  # type: ignore[return-value]

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable leaf's ``grad``."""
        if grad is None:
            if self.data.size != 1:
                raise ShapeError("backward() without a seed needs a scalar tensor")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        grads: dict[int, np.ndarray] = {id(self): np.asarray(grad, dtype=DTYPE)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg

    # operator sugar
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """A trainable leaf tensor with a label."""

    def __init__(self, data, name: str = ""):
        super().__init__(np.array(data, dtype=DTYPE, copy=True), requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)

    @property
    def value(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    for n, m in zip(a.shape, b.shape):
        if n != m and n != 1 and m != 1:
            raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}")


# elementwise binary ops (numpy broadcasting along size-1 axes)

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / bd, ad.shape),
                            _unbroadcast(-g * out / bd, bd.shape)))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.cols != b.rows:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        ga = g @ bd.T if a.requires_grad else None
        gb = ad.T @ g if b.requires_grad else None
        return ga, gb

    return _make(ad @ bd, (a, b), backward)


# elementwise unary ops

def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return _make(out, (x,), lambda g: (g * (1.0 - out * out),))


def square(x: Tensor) -> Tensor:
    xd = x.data
    return _make(xd * xd, (x,), lambda g: (2.0 * g * xd,))


def sqrt(x: Tensor) -> Tensor:
    """Square root of a nonnegative tensor; the derivative at exactly 0 is taken as 0."""
    if np.any(x.data < 0):
        raise ValueError("sqrt received a negative input")
    out = np.sqrt(x.data)
    pos = out > 0
    safe = np.where(pos, out, 1.0)
    return _make(out, (x,), lambda g: (np.where(pos, 0.5 * g / safe, 0.0),))


# structural ops

def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    rows = parts[0].rows
    for p in parts:
        if p.rows != rows:
            raise ShapeError(f"concat_cols: row mismatch {[q.shape for q in parts]}")
    bounds = np.cumsum([0] + [p.cols for p in parts])

    def backward(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _make(np.concatenate([p.data for p in parts], axis=1), parts, backward)


def take_rows(x: Tensor, index: np.ndarray) -> Tensor:
    """Gather rows ``x[index]``; repeated indices accumulate gradient."""
    index = np.asarray(index, dtype=np.intp).ravel()
    n = x.rows

    def backward(g):
        out = np.zeros((n, g.shape[1]), dtype=DTYPE)
        np.add.at(out, index, g)
        return (out,)

    return _make(x.data[index], (x,), backward)


def repeat_rows(x: Tensor, times: int) -> Tensor:
    """Repeat every row ``times`` times consecutively (row i -> rows i*times .. i*times+times-1)."""
    rows, cols = x.shape
    return _make(np.repeat(x.data, times, axis=0), (x,),
                 lambda g: (g.reshape(rows, times, cols).sum(axis=1),))


def pool_rows(x: Tensor, group: int, kind: str = "max") -> Tensor:
    """Pool consecutive groups of ``group`` rows into one row each.

    With ``kind="max"`` the gradient flows to the first maximal row of each
    group; with ``"avg"`` it is spread uniformly.
    """
    rows, cols = x.shape
    if group < 1 or rows == 0 or rows % group:
        raise ShapeError(f"pool_rows: {rows} rows not divisible into groups of {group}")
    v = x.data.reshape(rows // group, group, cols)
    if kind == "max":
        arg = v.argmax(axis=1)
        out = np.take_along_axis(v, arg[:, None, :], axis=1)[:, 0, :]

        def backward(g):
            full = np.zeros_like(v)
            np.put_along_axis(full, arg[:, None, :], g[:, None, :], axis=1)
            return (full.reshape(rows, cols),)
    elif kind == "avg":
        out = v.mean(axis=1)

        def backward(g):
            return (np.repeat(g / group, group, axis=0),)
    else:
        raise ValueError(f"unknown pool kind {kind!r}")
    return _make(out, (x,), backward)


def pool_cols(x: Tensor, kind: str = "max") -> Tensor:
    """Pool each row across its columns into a single column."""
    rows, cols = x.shape
    if cols == 0:
        raise ShapeError("pool_cols: empty channel axis")
    if kind == "max":
        arg = x.data.argmax(axis=1)
        out = x.data[np.arange(rows), arg][:, None]

        def backward(g):
            full = np.zeros_like(x.data)
            full[np.arange(rows), arg] = g[:, 0]
            return (full,)
    elif kind == "avg":
        out = x.data.mean(axis=1, keepdims=True)

        def backward(g):
            return (np.broadcast_to(g / cols, (rows, cols)).copy(),)
    else:
        raise ValueError(f"unknown pool kind {kind!r}")
    return _make(out, (x,), backward)


def pool(x: Tensor, axis: str, kind: str) -> Tensor:
    """Collapse one axis of a single-frame array: ``points`` (rows) or ``channels`` (cols)."""
    if axis == "points":
        return pool_rows(x, x.rows, kind)
    if axis == "channels":
        return pool_cols(x, kind)
    raise ValueError(f"unknown pool axis {axis!r}")


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return _make(np.array([[x.data.sum()]]), (x,),
                 lambda g: (np.full(shape, g[0, 0]),))


def mean_all(x: Tensor) -> Tensor:
    shape = x.shape
    n = x.data.size
    return _make(np.array([[x.data.mean()]]), (x,),
                 lambda g: (np.full(shape, g[0, 0] / n),))


def sum_cols(x: Tensor) -> Tensor:
    """Row-wise sum -> (rows, 1)."""
    cols = x.cols
    return _make(x.data.sum(axis=1, keepdims=True), (x,),
                 lambda g: (np.repeat(g, cols, axis=1),))
