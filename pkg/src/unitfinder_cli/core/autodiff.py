"""
Reverse-mode differentiation over dense float64 arrays.

Operations are written once, as functional primitives (``add``, ``matmul``, ``sigmoid``...). Called
on plain arrays they compute eagerly; called on a :class:`Node` they are recorded by the node's
:class:`Tracer`. The tracer turns what was recorded into an immutable
:class:`ComputationRecord`, which can be replayed with new inputs (:func:`evaluate`) and
differentiated (:func:`backpropagate`).

Gradient conventions:

* ``clamp`` passes the gradient strictly inside ``(lo, hi)`` and blocks it at and outside the
  boundaries.
* ``embedding`` scatters-adds into the table gradient, so repeated ids accumulate.
* Integer data (token ids, picked columns) travels as operation attributes, never as nodes.
"""

from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, NamedTuple, Optional, Union

import numpy as np
import numpy.typing as npt

from unitfinder_cli.constants import EXIT_NUMERICAL_ERROR
from unitfinder_cli.errors import ShapeMismatchError, UnitFinderError
from unitfinder_cli.utils.logger import logger

RealArray = npt.NDArray[np.float64]
Operand = Union["Node", RealArray, float, int]
NodeRef = Union[str, int]

__all__ = [
    "AutodiffError",
    "ComputationRecord",
    "Entry",
    "Evaluation",
    "Gradients",
    "Node",
    "RealArray",
    "Tracer",
    "add",
    "backpropagate",
    "clamp",
    "concat",
    "div",
    "embedding",
    "evaluate",
    "exp",
    "finite_difference_check",
    "log",
    "log_softmax",
    "matmul",
    "mean",
    "mul",
    "neg",
    "pick",
    "real_array",
    "sigmoid",
    "slice_",
    "softmax",
    "stack",
    "sub",
    "sum_",
    "tanh",
    "value_and_grad",
]


class AutodiffError(UnitFinderError):
    """Raised on misuse of the differentiation engine"""

    exit_code = EXIT_NUMERICAL_ERROR


def real_array(values: Any, shape: Optional[Sequence[int]] = None) -> RealArray:
    """
    Build a validated float64 array.

    :param values: Anything ``numpy.array`` accepts, in row-major order when ``shape`` is given.
    :param shape: Optional target shape; ``prod(shape)`` must equal the number of values.
    :return: A fresh float64 array.
    :raises ShapeMismatchError: If the values do not fill ``shape``.
    :raises AutodiffError: If any value is NaN or infinite.
    """
    array = np.array(values, dtype=np.float64)
    if shape is not None:
        target = tuple(int(d) for d in shape)
        if array.size != int(np.prod(target, dtype=np.int64)):
            raise ShapeMismatchError("real_array", target, array.shape)
        array = array.reshape(target)
    if not np.all(np.isfinite(array)):
        raise AutodiffError("RealArray values must be finite (NaN/Inf rejected)")
    return array


# ------------------------------------------------------------------------------------------------
# Primitives
# ------------------------------------------------------------------------------------------------


class Primitive(NamedTuple):
    """A forward function and its vector-Jacobian product"""

    name: str
    forward: Callable[..., RealArray]
    vjp: Callable[..., tuple[RealArray, ...]]


PRIMITIVES: dict[str, Primitive] = {}


def _register(name: str, forward: Callable[..., RealArray], vjp: Callable[..., Any]) -> None:
    PRIMITIVES[name] = Primitive(name, forward, vjp)


def _broadcast_shape(op: str, a: RealArray, b: RealArray) -> tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(a.shape, b.shape))
    except ValueError as e:
        raise ShapeMismatchError(op, a.shape, b.shape) from e


def _unbroadcast(grad: RealArray, shape: tuple[int, ...]) -> RealArray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary(op: str, fn: Callable[[RealArray, RealArray], RealArray]) -> Callable[..., RealArray]:
    def forward(a: RealArray, b: RealArray) -> RealArray:
        _broadcast_shape(op, a, b)
        return fn(a, b)

    return forward


_register(
    "add",
    _binary("add", np.add),
    lambda g, out, ops: (_unbroadcast(g, ops[0].shape), _unbroadcast(g, ops[1].shape)),
)
_register(
    "sub",
    _binary("sub", np.subtract),
    lambda g, out, ops: (_unbroadcast(g, ops[0].shape), _unbroadcast(-g, ops[1].shape)),
)
_register(
    "mul",
    _binary("mul", np.multiply),
    lambda g, out, ops: (
        _unbroadcast(g * ops[1], ops[0].shape),
        _unbroadcast(g * ops[0], ops[1].shape),
    ),
)
_register(
    "div",
    _binary("div", np.divide),
    lambda g, out, ops: (
        _unbroadcast(g / ops[1], ops[0].shape),
        _unbroadcast(-g * out / ops[1], ops[1].shape),
    ),
)
_register("neg", np.negative, lambda g, out, ops: (-g,))


def _matmul_forward(a: RealArray, b: RealArray) -> RealArray:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatchError("matmul", "(m, n) @ (n, p)", (a.shape, b.shape))
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError("matmul", (a.shape[1], "p"), b.shape)
    return a @ b


_register("matmul", _matmul_forward, lambda g, out, ops: (g @ ops[1].T, ops[0].T @ g))


def _sigmoid_forward(x: RealArray) -> RealArray:
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


_register("sigmoid", _sigmoid_forward, lambda g, out, ops: (g * out * (1.0 - out),))
_register("tanh", np.tanh, lambda g, out, ops: (g * (1.0 - out * out),))
_register("log", np.log, lambda g, out, ops: (g / ops[0],))
_register("exp", np.exp, lambda g, out, ops: (g * out,))


def _softmax_forward(x: RealArray, axis: int = -1) -> RealArray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _softmax_vjp(g: RealArray, out: RealArray, ops: Any, axis: int = -1) -> tuple[RealArray]:
    return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)


def _log_softmax_forward(x: RealArray, axis: int = -1) -> RealArray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def _log_softmax_vjp(g: RealArray, out: RealArray, ops: Any, axis: int = -1) -> tuple[RealArray]:
    return (g - np.exp(out) * np.sum(g, axis=axis, keepdims=True),)


_register("softmax", _softmax_forward, _softmax_vjp)
_register("log_softmax", _log_softmax_forward, _log_softmax_vjp)


def _clamp_forward(x: RealArray, lo: float = 0.0, hi: float = 1.0) -> RealArray:
    return np.clip(x, lo, hi)


def _clamp_vjp(
    g: RealArray, out: RealArray, ops: Any, lo: float = 0.0, hi: float = 1.0
) -> tuple[RealArray]:
    inside = (ops[0] > lo) & (ops[0] < hi)
    return (g * inside,)


_register("clamp", _clamp_forward, _clamp_vjp)


def _embedding_forward(table: RealArray, ids: npt.NDArray[np.int64]) -> RealArray:
    if table.ndim != 2:
        raise ShapeMismatchError("embedding", "(vocab, dim)", table.shape)
    return table[ids]


def _embedding_vjp(
    g: RealArray, out: RealArray, ops: Any, ids: npt.NDArray[np.int64]
) -> tuple[RealArray]:
    grad = np.zeros_like(ops[0])
    np.add.at(grad, ids, g)
    return (grad,)


_register("embedding", _embedding_forward, _embedding_vjp)


def _sum_forward(x: RealArray, axis: Optional[int] = None, keepdims: bool = False) -> RealArray:
    return np.asarray(np.sum(x, axis=axis, keepdims=keepdims), dtype=np.float64)


def _sum_vjp(
    g: RealArray, out: RealArray, ops: Any, axis: Optional[int] = None, keepdims: bool = False
) -> tuple[RealArray]:
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return (np.broadcast_to(g, ops[0].shape).copy(),)


def _mean_forward(x: RealArray, axis: Optional[int] = None, keepdims: bool = False) -> RealArray:
    return np.asarray(np.mean(x, axis=axis, keepdims=keepdims), dtype=np.float64)


def _mean_vjp(
    g: RealArray, out: RealArray, ops: Any, axis: Optional[int] = None, keepdims: bool = False
) -> tuple[RealArray]:
    count = ops[0].size if axis is None else ops[0].shape[axis]
    return (_sum_vjp(g, out, ops, axis=axis, keepdims=keepdims)[0] / count,)


_register("sum", _sum_forward, _sum_vjp)
_register("mean", _mean_forward, _mean_vjp)


def _stack_forward(*xs: RealArray, axis: int = 0) -> RealArray:
    shapes = {x.shape for x in xs}
    if len(shapes) != 1:
        raise ShapeMismatchError("stack", xs[0].shape, sorted(shapes))
    return np.stack(xs, axis=axis)


def _stack_vjp(g: RealArray, out: RealArray, ops: Any, axis: int = 0) -> tuple[RealArray, ...]:
    return tuple(np.take(g, i, axis=axis) for i in range(len(ops)))


def _concat_forward(*xs: RealArray, axis: int = -1) -> RealArray:
    try:
        return np.concatenate(xs, axis=axis)
    except ValueError as e:
        raise ShapeMismatchError("concat", xs[0].shape, [x.shape for x in xs]) from e


def _concat_vjp(g: RealArray, out: RealArray, ops: Any, axis: int = -1) -> tuple[RealArray, ...]:
    bounds = np.cumsum([x.shape[axis] for x in ops])[:-1]
    return tuple(np.split(g, bounds, axis=axis))


_register("stack", _stack_forward, _stack_vjp)
_register("concat", _concat_forward, _concat_vjp)


def _slice_forward(x: RealArray, start: int, stop: int, axis: int = -1) -> RealArray:
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    return np.ascontiguousarray(x[tuple(index)])


def _slice_vjp(
    g: RealArray, out: RealArray, ops: Any, start: int, stop: int, axis: int = -1
) -> tuple[RealArray]:
    grad = np.zeros_like(ops[0])
    index = [slice(None)] * grad.ndim
    index[axis] = slice(start, stop)
    grad[tuple(index)] = g
    return (grad,)


_register("slice", _slice_forward, _slice_vjp)


def _pick_forward(x: RealArray, ids: npt.NDArray[np.int64]) -> RealArray:
    if x.ndim != 2 or len(ids) != x.shape[0]:
        raise ShapeMismatchError("pick", (len(ids), "V"), x.shape)
    return x[np.arange(x.shape[0]), ids]


def _pick_vjp(g: RealArray, out: RealArray, ops: Any, ids: npt.NDArray[np.int64]) -> tuple[RealArray]:
    grad = np.zeros_like(ops[0])
    grad[np.arange(grad.shape[0]), ids] = g
    return (grad,)


_register("pick", _pick_forward, _pick_vjp)


# ------------------------------------------------------------------------------------------------
# Tracing
# ------------------------------------------------------------------------------------------------


class Node:
    """A value produced while tracing. Arithmetic on nodes is recorded by their tracer."""

    __slots__ = ("tracer", "index")
    __array_ufunc__ = None  # make numpy defer to the reflected operators below

    def __init__(self, tracer: "Tracer", index: int) -> None:
        self.tracer = tracer
        self.index = index

    @property
    def value(self) -> RealArray:
        """The array computed for this node during tracing"""
        return self.tracer.value_of(self)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.value.shape)

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def __add__(self, other: Operand) -> "Node":
        return add(self, other)  # type: ignore[return-value]

    def __radd__(self, other: Operand) -> "Node":
        return add(other, self)  # type: ignore[return-value]

    def __sub__(self, other: Operand) -> "Node":
        return sub(self, other)  # type: ignore[return-value]

    def __rsub__(self, other: Operand) -> "Node":
        return sub(other, self)  # type: ignore[return-value]

    def __mul__(self, other: Operand) -> "Node":
        return mul(self, other)  # type: ignore[return-value]

    def __rmul__(self, other: Operand) -> "Node":
        return mul(other, self)  # type: ignore[return-value]

    def __truediv__(self, other: Operand) -> "Node":
        return div(self, other)  # type: ignore[return-value]

    def __rtruediv__(self, other: Operand) -> "Node":
        return div(other, self)  # type: ignore[return-value]

    def __matmul__(self, other: Operand) -> "Node":
        return matmul(self, other)  # type: ignore[return-value]

    def __rmatmul__(self, other: Operand) -> "Node":
        return matmul(other, self)  # type: ignore[return-value]

    def __neg__(self) -> "Node":
        return neg(self)  # type: ignore[return-value]

    def __repr__(self) -> str:
        return f"Node(index={self.index}, shape={self.shape})"


@dataclass(frozen=True)
class Entry:
    """One recorded primitive application"""

    op: str
    operands: tuple[int, ...]
    output: int
    attrs: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class ComputationRecord:
    """
    An immutable, replayable list of primitive applications.

    Node indices are assigned in creation order, so every operand precedes its consumer and the
    record is acyclic by construction.
    """

    inputs: Mapping[str, int]
    input_shapes: Mapping[str, tuple[int, ...]]
    constants: Mapping[int, RealArray]
    entries: tuple[Entry, ...]
    outputs: Mapping[str, int]
    size: int

    def resolve(self, ref: NodeRef) -> int:
        """Map an output name, an input name or a node index to a node index"""
        if isinstance(ref, str):
            if ref in self.outputs:
                return self.outputs[ref]
            if ref in self.inputs:
                return self.inputs[ref]
            raise AutodiffError(f"Unknown node name {ref!r}")
        if not 0 <= ref < self.size:
            raise AutodiffError(f"Node index {ref} out of range")
        return int(ref)


@dataclass(frozen=True)
class Evaluation:
    """The values of every node of a record for one set of inputs"""

    record: ComputationRecord
    values: tuple[RealArray, ...]

    def value(self, ref: NodeRef) -> RealArray:
        return self.values[self.record.resolve(ref)]

    def __getitem__(self, name: str) -> RealArray:
        return self.value(name)

    @property
    def outputs(self) -> dict[str, RealArray]:
        return {name: self.values[index] for name, index in self.record.outputs.items()}


class Tracer:
    """Records primitive applications on :class:`Node` operands."""

    def __init__(self) -> None:
        self._values: list[RealArray] = []
        self._entries: list[Entry] = []
        self._inputs: dict[str, int] = {}
        self._constants: dict[int, RealArray] = {}
        self._outputs: dict[str, int] = {}

    def _new_node(self, value: RealArray) -> Node:
        self._values.append(value)
        return Node(self, len(self._values) - 1)

    def value_of(self, node: Node) -> RealArray:
        return self._values[node.index]

    def input(self, name: str, value: Any) -> Node:
        """Declare a named input; its values are validated as a RealArray"""
        if name in self._inputs:
            raise AutodiffError(f"Input {name!r} declared twice")
        node = self._new_node(real_array(value))
        self._inputs[name] = node.index
        return node

    def constant(self, value: Any) -> Node:
        node = self._new_node(np.asarray(value, dtype=np.float64))
        self._constants[node.index] = node.value
        return node

    def lift(self, operand: Operand) -> Node:
        if isinstance(operand, Node):
            if operand.tracer is not self:
                raise AutodiffError("Cannot mix nodes recorded by different tracers")
            return operand
        return self.constant(operand)

    def apply(self, op: str, operands: Sequence[Operand], attrs: Mapping[str, Any]) -> Node:
        nodes = [self.lift(o) for o in operands]
        value = PRIMITIVES[op].forward(*(n.value for n in nodes), **attrs)
        out = self._new_node(value)
        self._entries.append(Entry(op, tuple(n.index for n in nodes), out.index, dict(attrs)))
        return out

    def output(self, name: str, node: Node) -> Node:
        self._outputs[name] = self.lift(node).index
        return node

    def record(self) -> ComputationRecord:
        return ComputationRecord(
            inputs=MappingProxyType(dict(self._inputs)),
            input_shapes=MappingProxyType(
                {name: tuple(self._values[i].shape) for name, i in self._inputs.items()}
            ),
            constants=MappingProxyType(dict(self._constants)),
            entries=tuple(self._entries),
            outputs=MappingProxyType(dict(self._outputs)),
            size=len(self._values),
        )

    def evaluation(self) -> Evaluation:
        """The record of what was traced so far, paired with the traced values"""
        return Evaluation(self.record(), tuple(self._values))


def _apply(op: str, *operands: Operand, **attrs: Any) -> Union[Node, RealArray]:
    tracer = next((o.tracer for o in operands if isinstance(o, Node)), None)
    if tracer is None:
        arrays = (np.asarray(o, dtype=np.float64) for o in operands)
        return PRIMITIVES[op].forward(*arrays, **attrs)
    return tracer.apply(op, operands, attrs)


def add(a: Operand, b: Operand) -> Any:
    return _apply("add", a, b)


def sub(a: Operand, b: Operand) -> Any:
    return _apply("sub", a, b)


def mul(a: Operand, b: Operand) -> Any:
    return _apply("mul", a, b)


def div(a: Operand, b: Operand) -> Any:
    return _apply("div", a, b)


def neg(a: Operand) -> Any:
    return _apply("neg", a)


def matmul(a: Operand, b: Operand) -> Any:
    return _apply("matmul", a, b)


def sigmoid(x: Operand) -> Any:
    return _apply("sigmoid", x)


def tanh(x: Operand) -> Any:
    return _apply("tanh", x)


def log(x: Operand) -> Any:
    return _apply("log", x)


def exp(x: Operand) -> Any:
    return _apply("exp", x)


def softmax(x: Operand, axis: int = -1) -> Any:
    return _apply("softmax", x, axis=axis)


def log_softmax(x: Operand, axis: int = -1) -> Any:
    return _apply("log_softmax", x, axis=axis)


def clamp(x: Operand, lo: float = 0.0, hi: float = 1.0) -> Any:
    return _apply("clamp", x, lo=float(lo), hi=float(hi))


def embedding(table: Operand, ids: Any) -> Any:
    return _apply("embedding", table, ids=np.asarray(ids, dtype=np.int64))


def sum_(x: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Any:
    return _apply("sum", x, axis=axis, keepdims=keepdims)


def mean(x: Operand, axis: Optional[int] = None, keepdims: bool = False) -> Any:
    return _apply("mean", x, axis=axis, keepdims=keepdims)


def stack(xs: Sequence[Operand], axis: int = 0) -> Any:
    return _apply("stack", *xs, axis=axis)


def concat(xs: Sequence[Operand], axis: int = -1) -> Any:
    return _apply("concat", *xs, axis=axis)


def slice_(x: Operand, start: int, stop: int, axis: int = -1) -> Any:
    return _apply("slice", x, start=int(start), stop=int(stop), axis=axis)


def pick(x: Operand, ids: Any) -> Any:
    """Row-wise gather: ``x[j, ids[j]]`` for every row ``j``"""
    return _apply("pick", x, ids=np.asarray(ids, dtype=np.int64))


# ------------------------------------------------------------------------------------------------
# Replay and differentiation
# ------------------------------------------------------------------------------------------------


@dataclass(frozen=True)
class Gradients(Mapping[str, RealArray]):
    """
    Gradients of a scalar with respect to named inputs.

    Inputs the scalar does not depend on get a zero gradient and are listed in ``detached``.
    """

    arrays: Mapping[str, RealArray]
    detached: frozenset[str] = frozenset()

    def __getitem__(self, name: str) -> RealArray:
        return self.arrays[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    def __len__(self) -> int:
        return len(self.arrays)


def evaluate(record: ComputationRecord, inputs: Mapping[str, Any]) -> Evaluation:
    """
    Replay a record on new input values.

    :param record: The record to replay.
    :param inputs: Values for every input declared by the record.
    :return: The values of all nodes.
    :raises AutodiffError: If an input is missing.
    :raises ShapeMismatchError: If an input does not have its declared shape.
    """
    values: list[Optional[RealArray]] = [None] * record.size
    for name, index in record.inputs.items():
        if name not in inputs:
            raise AutodiffError(f"Missing input {name!r}")
        array = real_array(inputs[name])
        if array.shape != record.input_shapes[name]:
            raise ShapeMismatchError(f"input {name!r}", record.input_shapes[name], array.shape)
        values[index] = array
    for index, constant in record.constants.items():
        values[index] = constant
    for entry in record.entries:
        operands = [values[i] for i in entry.operands]
        values[entry.output] = PRIMITIVES[entry.op].forward(*operands, **entry.attrs)
    return Evaluation(record, tuple(values))  # type: ignore[arg-type]


def backpropagate(
    evaluation: Evaluation, scalar_output: NodeRef, wrt: Iterable[str]
) -> Gradients:
    """
    Reverse-mode gradients of a scalar node with respect to named inputs.

    :param evaluation: An evaluated record (from :func:`evaluate` or :meth:`Tracer.evaluation`).
    :param scalar_output: Name or index of a node with shape ``()``.
    :param wrt: Names of the inputs to differentiate against. Other inputs get no gradient.
    :return: A :class:`Gradients` mapping; inputs with no path to the output are flagged.
    :raises AutodiffError: If the output is not a scalar or a name is not an input.
    """
    record = evaluation.record
    values = evaluation.values
    out_index = record.resolve(scalar_output)
    if values[out_index].shape != ():
        raise AutodiffError(
            f"backpropagate needs a scalar output, node {scalar_output!r} has shape "
            f"{values[out_index].shape}"
        )

    wrt = list(wrt)
    for name in wrt:
        if name not in record.inputs:
            raise AutodiffError(f"{name!r} is not an input of the record")
    targets = {record.inputs[name] for name in wrt}

    # Nodes that depend on at least one requested input
    live = set(targets)
    for entry in record.entries:
        if any(i in live for i in entry.operands):
            live.add(entry.output)

    grads: dict[int, RealArray] = {out_index: np.ones((), dtype=np.float64)}
    for entry in reversed(record.entries):
        if entry.output not in live:
            continue
        g = grads.pop(entry.output, None)
        if g is None:
            continue
        operands = tuple(values[i] for i in entry.operands)
        contributions = PRIMITIVES[entry.op].vjp(g, values[entry.output], operands, **entry.attrs)
        for index, contribution in zip(entry.operands, contributions):
            if index not in live:
                continue
            grads[index] = grads[index] + contribution if index in grads else contribution

    result: dict[str, RealArray] = {}
    detached: set[str] = set()
    for name in wrt:
        index = record.inputs[name]
        if index in grads:
            result[name] = np.asarray(grads[index], dtype=np.float64)
        else:
            detached.add(name)
            result[name] = np.zeros(record.input_shapes[name], dtype=np.float64)
    if detached:
        logger.warning(f"Output does not depend on {', '.join(sorted(detached))}: zero gradient")
    return Gradients(MappingProxyType(result), frozenset(detached))


def value_and_grad(
    fn: Callable[..., Node], inputs: Mapping[str, Any], wrt: Iterable[str]
) -> tuple[float, Gradients, Evaluation]:
    """
    Trace ``fn(**nodes)`` and differentiate its scalar result.

    Every entry of ``inputs`` becomes a named tracer input and is passed to ``fn`` as a keyword
    argument.
    """
    tracer = Tracer()
    nodes = {name: tracer.input(name, value) for name, value in inputs.items()}
    out = tracer.output("output", tracer.lift(fn(**nodes)))
    evaluation = tracer.evaluation()
    gradients = backpropagate(evaluation, "output", wrt)
    return float(out.value), gradients, evaluation


def finite_difference_check(
    record: ComputationRecord,
    scalar_output: NodeRef,
    input_name: str,
    inputs: Mapping[str, Any],
    epsilon: float = 1e-5,
    abs_epsilon: float = 1e-6,
) -> float:
    """
    Compare analytic gradients with central differences.

    :return: ``max |analytic - numeric| / (|analytic| + abs_epsilon)`` over the coordinates of
        ``input_name``; ``0.0`` for an empty input.
    :raises AutodiffError: If ``epsilon`` is not positive.
    """
    if epsilon <= 0:
        raise AutodiffError("epsilon must be positive")

    base = evaluate(record, inputs)
    analytic = backpropagate(base, scalar_output, [input_name])[input_name]
    x = real_array(inputs[input_name])
    numeric = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        shifted = []
        for delta in (epsilon, -epsilon):
            moved = x.copy()
            moved[index] += delta
            shifted.append(float(evaluate(record, {**inputs, input_name: moved}).value(scalar_output)))
        numeric[index] = (shifted[0] - shifted[1]) / (2.0 * epsilon)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / (np.abs(analytic) + abs_epsilon)))
