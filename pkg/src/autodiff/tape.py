"""
Reverse-Mode Automatic Differentiation

A Wengert-list tape over numpy arrays. Every primitive appends one node holding its
forward value, the indices of its parents and one vector-Jacobian closure per parent.
`Tape.backward` walks the list once in reverse creation order.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

DIV_EPSILON = 1e-300

ArrayLike = Union[float, int, np.ndarray]
VJP = Callable[[np.ndarray], np.ndarray]


class TapeDomainError(ValueError):
    """Raised when a primitive is applied outside its domain (division by ~0, log2 of x <= 0)."""


@dataclass(frozen=True)
class TapeNode:
    """One entry of the tape."""
    value: np.ndarray
    op: str
    parents: Tuple[int, ...] = ()
    vjps: Tuple[VJP, ...] = ()
    requires_grad: bool = False


class Tape:
    """Single-writer recording of primitive applications."""

    def __init__(self):
        self.nodes: List[TapeNode] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def _append(self, node: TapeNode) -> "Variable":
        self.nodes.append(node)
        return Variable(self, len(self.nodes) - 1)

    def parameter(self, value: ArrayLike) -> "Variable":
        """A leaf whose gradient is wanted."""
        return self._append(TapeNode(np.array(value, dtype=float), 'param', requires_grad=True))

    def constant(self, value: ArrayLike) -> "Variable":
        """A leaf treated as constant by backward."""
        return self._append(TapeNode(np.array(value, dtype=float), 'const'))

    def lift(self, value: Union["Variable", ArrayLike]) -> "Variable":
        if isinstance(value, Variable):
            if value.tape is not self:
                raise ValueError("Variable belongs to a different tape")
            return value
        return self.constant(value)

    def record(self, value: np.ndarray, op: str, parents: Sequence["Variable"],
               vjps: Sequence[VJP]) -> "Variable":
        """Append the result of a primitive."""
        tracked = [(p.index, f) for p, f in zip(parents, vjps) if self.nodes[p.index].requires_grad]
        return self._append(TapeNode(
            value=np.asarray(value, dtype=float),
            op=op,
            parents=tuple(i for i, _ in tracked),
            vjps=tuple(f for _, f in tracked),
            requires_grad=bool(tracked),
        ))

    def backward(self, loss: "Variable", wrt: Sequence["Variable"]) -> List[np.ndarray]:
        """
        Reverse accumulation from a scalar loss.

        Args:
            loss: Scalar Variable on this tape
            wrt: Variables whose gradients are returned

        Returns:
            One gradient array per entry of `wrt` (zeros where no path exists)
        """
        if loss.tape is not self:
            raise ValueError("loss belongs to a different tape")
        if loss.value.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.value.shape}")

        grads: Dict[int, np.ndarray] = {loss.index: np.ones_like(loss.value)}
        for index in range(loss.index, -1, -1):
            grad = grads.get(index)
            node = self.nodes[index]
            if grad is None or not node.parents:
                continue
            for parent, vjp in zip(node.parents, node.vjps):
                contribution = vjp(grad)
                if parent in grads:
                    grads[parent] = grads[parent] + contribution
                else:
                    grads[parent] = contribution

        result = []
        for v in wrt:
            g = grads.get(v.index)
            result.append(np.zeros_like(v.value) if g is None else np.array(g, dtype=float))
        return result


class Variable:
    """Handle to a tape node; valid only on the tape that created it."""

    __slots__ = ('tape', 'index')

    def __init__(self, tape: Tape, index: int):
        self.tape = tape
        self.index = index

    @property
    def value(self) -> np.ndarray:
        return self.tape.nodes[self.index].value

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        return f"Variable(op={self.tape.nodes[self.index].op!r}, value={self.value!r})"

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


def _tape_of(*operands) -> Tape:
    for x in operands:
        if isinstance(x, Variable):
            return x.tape
    raise ValueError("At least one operand must be a Variable")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Variable:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    return tape.record(a.value + b.value, 'add', [a, b], [
        lambda g, s=a.shape: _unbroadcast(g, s),
        lambda g, s=b.shape: _unbroadcast(g, s),
    ])


def sub(a, b) -> Variable:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    return tape.record(a.value - b.value, 'sub', [a, b], [
        lambda g, s=a.shape: _unbroadcast(g, s),
        lambda g, s=b.shape: -_unbroadcast(g, s),
    ])


def mul(a, b) -> Variable:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    av, bv = a.value, b.value
    return tape.record(av * bv, 'mul', [a, b], [
        lambda g: _unbroadcast(g * bv, av.shape),
        lambda g: _unbroadcast(g * av, bv.shape),
    ])


def div(a, b) -> Variable:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    av, bv = a.value, b.value
    if np.any(np.abs(bv) < DIV_EPSILON):
        raise TapeDomainError("Division by a denominator with magnitude below 1e-300")
    out = av / bv
    return tape.record(out, 'div', [a, b], [
        lambda g: _unbroadcast(g / bv, av.shape),
        lambda g: _unbroadcast(-g * out / bv, bv.shape),
    ])


def neg(a: Variable) -> Variable:
    return a.tape.record(-a.value, 'neg', [a], [lambda g: -g])


def exp(a: Variable) -> Variable:
    out = np.exp(a.value)
    return a.tape.record(out, 'exp', [a], [lambda g: g * out])


def log2(a: Variable) -> Variable:
    av = a.value
    if np.any(av <= 0):
        raise TapeDomainError("log2 of a non-positive argument")
    return a.tape.record(np.log2(av), 'log2', [a], [lambda g: g / (av * np.log(2.0))])


def relu(a: Variable) -> Variable:
    # relu'(0) = 0
    mask = a.value > 0
    return a.tape.record(np.where(mask, a.value, 0.0), 'relu', [a], [lambda g: g * mask])


def min2(a, b) -> Variable:
    """Elementwise minimum; ties send the gradient to the first argument."""
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    pick_a = a.value <= b.value
    return tape.record(np.where(pick_a, a.value, b.value), 'min2', [a, b], [
        lambda g: _unbroadcast(np.where(pick_a, g, 0.0), a.shape),
        lambda g: _unbroadcast(np.where(pick_a, 0.0, g), b.shape),
    ])


def affine(a: Variable, scale: float, shift: float = 0.0) -> Variable:
    """scale * a + shift for Python scalars scale and shift."""
    return a.tape.record(scale * a.value + shift, 'affine', [a], [lambda g: g * scale])


def matvec(w: Variable, x: Variable) -> Variable:
    """W @ x for a matrix W (out, in) and vector x (in,)."""
    tape = _tape_of(w, x)
    w, x = tape.lift(w), tape.lift(x)
    wv, xv = w.value, x.value
    if wv.ndim != 2 or xv.ndim != 1 or wv.shape[1] != xv.shape[0]:
        raise ValueError(f"matvec shape mismatch: {wv.shape} @ {xv.shape}")
    return tape.record(wv @ xv, 'matvec', [w, x], [
        lambda g: np.outer(g, xv),
        lambda g: wv.T @ g,
    ])


def row_softmax(a: Variable) -> Variable:
    """Softmax over the last axis (each row of a matrix, or a whole vector)."""
    av = a.value
    shifted = np.exp(av - av.max(axis=-1, keepdims=True))
    out = shifted / shifted.sum(axis=-1, keepdims=True)
    # Full Jacobian-vector product: J^T g = y * (g - <g, y>)
    return a.tape.record(out, 'row_softmax', [a], [
        lambda g: out * (g - (g * out).sum(axis=-1, keepdims=True)),
    ])


def detach(a: Variable) -> Variable:
    """Same value, no gradient path."""
    return a.tape.record(a.value.copy(), 'detach', [], [])


def reshape(a: Variable, shape: Tuple[int, ...]) -> Variable:
    original = a.shape
    return a.tape.record(a.value.reshape(shape), 'reshape', [a], [lambda g: g.reshape(original)])


def transpose(a: Variable) -> Variable:
    return a.tape.record(a.value.T, 'transpose', [a], [lambda g: g.T])


def column(a: Variable, j: int) -> Variable:
    """Column j of a matrix as a vector."""
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        full[:, j] = g
        return full

    return a.tape.record(a.value[:, j], 'column', [a], [vjp])


def take(a: Variable, i: int) -> Variable:
    """Entry i of a vector as a scalar."""
    shape = a.shape

    def vjp(g):
        full = np.zeros(shape)
        full[i] = g
        return full

    return a.tape.record(a.value[i], 'take', [a], [vjp])


def stack_columns(columns: Sequence[Variable]) -> Variable:
    """Assemble equal-length vectors into the columns of a matrix."""
    tape = _tape_of(*columns)
    columns = [tape.lift(c) for c in columns]
    value = np.column_stack([c.value for c in columns])
    vjps = [lambda g, j=j: g[:, j] for j in range(len(columns))]
    return tape.record(value, 'stack_columns', columns, vjps)


def total(a: Variable, axis: Optional[int] = None) -> Variable:
    """Sum of all entries, or along one axis."""
    shape = a.shape

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), shape).copy()

    return a.tape.record(a.value.sum(axis=axis), 'sum', [a], [vjp])
