"""Reverse-mode automatic differentiation over dense 1-D/2-D float64 arrays.

Values are computed eagerly as operations are recorded on a :class:`Tape`;
``backward`` then walks the tape in reverse. Every op function also accepts
plain numpy arrays and returns plain numpy results, so the same model code
runs with or without gradient tracking.

    >>> tape = Tape()
    >>> x = tape.leaf(np.array([[1.0, 2.0, 3.0]]))
    >>> loss = sum(x * x)
    >>> float(loss.value)
    14.0
    >>> backward(tape, loss)[x.index]
    array([[2., 4., 6.]])
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_FLOOR = 1e-8


class Node:
    """One recorded value on a tape."""

    __slots__ = ("tape", "index", "op", "parents", "value", "grad", "_backward")

    # make numpy defer to our reflected operators (ndarray @ Node etc.)
    __array_ufunc__ = None

    def __init__(self, tape, index, op, parents, value, backward_fn):
        self.tape = tape
        self.index = index
        self.op = op
        self.parents = parents
        self.value = value
        self.grad = None
        self._backward = backward_fn

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Node({self.op}#{self.index}, shape={self.value.shape})"

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

    def __truediv__(self, other):
        if isinstance(other, Node):
            raise TypeError("division is only supported by constants")
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, key):
        return take(self, key)


class Tape:
    """Ordered record of nodes. Parents always precede their children."""

    def __init__(self):
        self.nodes: list[Node] = []

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value) -> Node:
        value = _as_array(value)
        _check_finite(value, "leaf")
        return self._record("leaf", value, (), None)

    def leaves(self, arrays) -> list[Node]:
        return [self.leaf(a) for a in arrays]

    def forward(self, root: Node) -> np.ndarray:
        if root.tape is not self:
            raise ValueError("node belongs to a different tape")
        return root.value

    def _record(self, op, value, parents, backward_fn) -> Node:
        node = Node(self, len(self.nodes), op, parents, value, backward_fn)
        self.nodes.append(node)
        return node


def _as_array(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim > 2:
        raise ValueError(f"arrays are limited to 2 dimensions, got shape {a.shape}")
    return a


def _check_finite(value, op):
    # NaN/inf propagate into the sum; cheaper than an elementwise mask
    if not np.isfinite(np.sum(value)):
        raise FloatingPointError(f"non-finite value produced by {op}")


def _tape_of(*xs):
    tape = None
    for x in xs:
        if isinstance(x, Node):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise ValueError("operands live on different tapes")
    return tape


def value_of(x):
    return x.value if isinstance(x, Node) else x


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _emit(op, value, inputs, grad_fns):
    """Record ``value`` on the tape shared by ``inputs``.

    ``grad_fns[k](g)`` maps the output gradient to the gradient of
    ``inputs[k]``; it is only called for inputs that are nodes.
    """
    tape = _tape_of(*inputs)
    _check_finite(value, op)
    pairs = [(x, fn) for x, fn in zip(inputs, grad_fns) if isinstance(x, Node)]
    parents = tuple(x for x, _ in pairs)
    fns = tuple(fn for _, fn in pairs)

    def backward_fn(g):
        return tuple(fn(g) for fn in fns)

    return tape._record(op, value, parents, backward_fn)


# ---------------------------------------------------------------- elementwise


def add(a, b):
    if not (isinstance(a, Node) or isinstance(b, Node)):
        return np.add(a, b)
    av, bv = value_of(a), value_of(b)
    sa, sb = np.shape(av), np.shape(bv)
    return _emit("add", av + bv, (a, b), (lambda g: _unbroadcast(g, sa), lambda g: _unbroadcast(g, sb)))


def sub(a, b):
    if not (isinstance(a, Node) or isinstance(b, Node)):
        return np.subtract(a, b)
    av, bv = value_of(a), value_of(b)
    sa, sb = np.shape(av), np.shape(bv)
    return _emit("sub", av - bv, (a, b), (lambda g: _unbroadcast(g, sa), lambda g: _unbroadcast(-g, sb)))


def mul(a, b):
    if not (isinstance(a, Node) or isinstance(b, Node)):
        return np.multiply(a, b)
    av, bv = value_of(a), value_of(b)
    sa, sb = np.shape(av), np.shape(bv)
    return _emit(
        "mul",
        av * bv,
        (a, b),
        (lambda g: _unbroadcast(g * bv, sa), lambda g: _unbroadcast(g * av, sb)),
    )


def square(x):
    if not isinstance(x, Node):
        return np.square(x)
    xv = x.value
    return _emit("square", xv * xv, (x,), (lambda g: 2.0 * xv * g,))


def tanh(x):
    if not isinstance(x, Node):
        return np.tanh(x)
    y = np.tanh(x.value)

    def local(g):
        d = y * y
        np.subtract(1.0, d, out=d)
        d *= g
        return d

    return _emit("tanh", y, (x,), (local,))


def exp(x):
    if not isinstance(x, Node):
        return np.exp(x)
    y = np.exp(x.value)
    return _emit("exp", y, (x,), (lambda g: g * y,))


def log(x):
    """Natural log with the argument floored at ``LOG_FLOOR``."""
    if not isinstance(x, Node):
        return np.log(np.maximum(x, LOG_FLOOR))
    xv = x.value
    floored = np.maximum(xv, LOG_FLOOR)
    live = xv >= LOG_FLOOR
    return _emit("log", np.log(floored), (x,), (lambda g: np.where(live, g / floored, 0.0),))


def clip(x, lo, hi):
    """Clamp to [lo, hi]; gradient passes inside the interval, zero outside."""
    if not isinstance(x, Node):
        return np.clip(x, lo, hi)
    xv = x.value
    inside = (xv >= lo) & (xv <= hi)
    return _emit("clip", np.clip(xv, lo, hi), (x,), (lambda g: np.where(inside, g, 0.0),))


def minimum(a, b):
    """Elementwise min; ties route the gradient to ``a``."""
    if not (isinstance(a, Node) or isinstance(b, Node)):
        return np.minimum(a, b)
    av, bv = value_of(a), value_of(b)
    sa, sb = np.shape(av), np.shape(bv)
    pick_a = av <= bv
    return _emit(
        "minimum",
        np.where(pick_a, av, bv),
        (a, b),
        (
            lambda g: _unbroadcast(np.where(pick_a, g, 0.0), sa),
            lambda g: _unbroadcast(np.where(pick_a, 0.0, g), sb),
        ),
    )


# ------------------------------------------------------------------ linalg


def matmul(a, b):
    if not (isinstance(a, Node) or isinstance(b, Node)):
        return np.matmul(a, b)
    av, bv = value_of(a), value_of(b)
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ValueError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
    return _emit("matmul", av @ bv, (a, b), (lambda g: g @ bv.T, lambda g: av.T @ g))


def softmax(x):
    """Row-wise softmax over the last axis."""
    xv = value_of(x)
    z = np.exp(xv - xv.max(axis=-1, keepdims=True))
    y = z / z.sum(axis=-1, keepdims=True)
    if not isinstance(x, Node):
        return y

    def local(g):
        return y * (g - (g * y).sum(axis=-1, keepdims=True))

    return _emit("softmax", y, (x,), (local,))


# ---------------------------------------------------------------- reductions


def sum(x, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy naming
    if not isinstance(x, Node):
        return np.sum(x, axis=axis, keepdims=keepdims)
    xv = x.value
    y = np.sum(xv, axis=axis, keepdims=keepdims)

    def local(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, xv.shape)

    return _emit("sum", np.asarray(y, dtype=np.float64), (x,), (local,))


def mean(x, axis=None, keepdims=False):
    n = value_of(x).size if axis is None else value_of(x).shape[axis]
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


# ---------------------------------------------------------------- structure


def take(x, key):
    """Basic (slice/int) indexing."""
    if not isinstance(x, Node):
        return x[key]
    xv = x.value
    y = xv[key]
    if not np.shares_memory(y, xv) and y.size:
        raise IndexError("only basic slicing is supported on tape nodes")

    def local(g):
        out = np.zeros_like(xv)
        out[key] = g
        return out

    return _emit("slice", np.array(y), (x,), (local,))


def concat(xs, axis=1):
    if not any(isinstance(x, Node) for x in xs):
        return np.concatenate(xs, axis=axis)
    vals = [value_of(x) for x in xs]
    bounds = np.cumsum([0] + [v.shape[axis] for v in vals])

    def piece(lo, hi):
        def fn(g):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            return g[tuple(idx)]

        return fn

    fns = [piece(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
    return _emit("concat", np.concatenate(vals, axis=axis), tuple(xs), fns)


# ------------------------------------------------------------------ backward


def backward(tape: Tape, root: Node) -> dict[int, np.ndarray]:
    """Gradients of scalar ``root`` for every leaf on ``tape``.

    Leaves that ``root`` does not depend on receive zeros. Each node's
    ``grad`` attribute is filled in as a side effect.
    """
    if root.tape is not tape:
        raise ValueError("root belongs to a different tape")
    if root.value.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.value.shape}")
    for node in tape.nodes:
        node.grad = None
    root.grad = np.ones_like(root.value)
    for node in reversed(tape.nodes[: root.index + 1]):
        if node.grad is None or node._backward is None:
            continue
        for parent, g in zip(node.parents, node._backward(node.grad)):
            # grads are never mutated in place, so aliasing is safe
            if parent.grad is None:
                parent.grad = g
            else:
                parent.grad = parent.grad + g
    out = {}
    for node in tape.nodes:
        if node.op == "leaf":
            out[node.index] = np.array(node.grad) if node.grad is not None else np.zeros_like(node.value)
    return out


def grads_for(grad_map: dict[int, np.ndarray], nodes) -> list[np.ndarray]:
    return [grad_map[n.index] for n in nodes]


# --------------------------------------------------------------------- adam


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, **hyper) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **hyper,
        )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> list[np.ndarray]:
    """Bias-corrected Adam, updating ``params`` in place."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch in adam_step: param {p.shape}, grad {g.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
