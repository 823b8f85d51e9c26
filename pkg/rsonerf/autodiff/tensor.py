"""
Dense tensors recorded on a define-by-run tape.

A ``Tensor`` is an immutable numpy array plus an optional node id on the active ``Tape``.
Operations record a backward rule only while a tape is active and at least one operand
is already on it, so inference runs never pay for bookkeeping.
"""
import contextvars
import itertools
from typing import Callable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from ..exceptions import ContractError, DimensionError
from ..settings import get_float_dtype


__all__ = (
    "Tensor",
    "Tape",
    "apply",
    "backward",
    "matmul",
    "add",
    "sub",
    "mul",
    "activation",
    "concat",
    "columns",
    "reshape",
    "clamp",
    "total",
    "mse_loss",
    "linear",
    "ACTIVATIONS",
)

EXP_CLAMP = 15.0

ACTIVATIONS = ("relu", "sigmoid", "softplus", "exp")

_active_tape: contextvars.ContextVar = contextvars.ContextVar("rsonerf_tape", default=None)


class Tensor:
    __slots__ = ("values", "node_id")

    def __init__(self, values, node_id=None, dtype=None):
        array = np.array(values, dtype=dtype or get_float_dtype())
        array.flags.writeable = False
        self.values = array
        self.node_id = node_id

    @classmethod
    def _wrap(cls, array, node_id=None):
        tensor = cls.__new__(cls)
        array = np.asarray(array)
        array.flags.writeable = False
        tensor.values = array
        tensor.node_id = node_id
        return tensor

    def __repr__(self):
        return "Tensor(shape=%s, node_id=%s)" % (list(self.shape), self.node_id)

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def item(self):
        return self.values.item()

    def numpy(self):
        return self.values

    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)


class _Record(NamedTuple):
    inputs: Tuple[Optional[int], ...]
    output: int
    backward: Callable


class Tape:
    """
    Ordered list of recorded operations. Single writer, confined to the thread that entered it.
    """

    def __init__(self):
        self.records: List[_Record] = []
        self.leaves: List[int] = []
        self._meta = {}
        self._ids = itertools.count()
        self._tokens = []

    def __enter__(self):
        self._tokens.append(_active_tape.set(self))
        return self

    def __exit__(self, *exc_info):
        _active_tape.reset(self._tokens.pop())

    @staticmethod
    def current():
        return _active_tape.get()

    def _new_node(self, array):
        node_id = next(self._ids)
        self._meta[node_id] = (array.shape, array.dtype)
        return node_id

    def watch(self, values):
        """
        Registers a parameter leaf and returns it as a tensor on this tape.
        """
        if isinstance(values, Tensor):
            values = values.values
        array = np.asarray(values)
        tensor = Tensor(array, dtype=array.dtype if array.dtype.kind == "f" else None)
        tensor.node_id = self._new_node(tensor.values)
        self.leaves.append(tensor.node_id)
        return tensor

    def record(self, inputs: Sequence[Tensor], values, rule):
        output = Tensor._wrap(values)
        output.node_id = self._new_node(output.values)
        self.records.append(_Record(tuple(t.node_id for t in inputs), output.node_id, rule))
        return output

    def __contains__(self, node_id):
        return node_id in self._meta


def _as_tensor(value):
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def apply(inputs: Sequence[Tensor], values, rule):
    """
    Wraps ``values`` as the output of an operation; ``rule(grad)`` returns one gradient per input.
    """
    tape = Tape.current()
    if tape is None or all(t.node_id is None or t.node_id not in tape for t in inputs):
        return Tensor._wrap(values)
    return tape.record(inputs, values, rule)


def backward(tape: Tape, loss):
    """
    Reverse pass from a scalar loss. Returns ``{leaf node id: gradient tensor}`` for every leaf on the tape;
    leaves the loss does not depend on get zeros.
    """
    loss_id = loss.node_id if isinstance(loss, Tensor) else loss
    grads = {}
    if loss_id is not None:
        if loss_id not in tape:
            raise ContractError("Loss node %r is not on the tape" % loss_id)
        shape, dtype = tape._meta[loss_id]
        if int(np.prod(shape)) != 1:
            raise ContractError("backward needs a scalar loss, got shape %s" % (tuple(shape),))
        grads[loss_id] = np.ones(shape, dtype=dtype)
    elif isinstance(loss, Tensor) and loss.size != 1:
        raise ContractError("backward needs a scalar loss, got shape %s" % (tuple(loss.shape),))

    for record in reversed(tape.records):
        grad = grads.pop(record.output, None)
        if grad is None:
            continue
        for node_id, input_grad in zip(record.inputs, record.backward(grad)):
            if node_id is None or input_grad is None:
                continue
            if node_id in grads:
                grads[node_id] = grads[node_id] + input_grad
            else:
                grads[node_id] = input_grad

    result = {}
    for leaf in tape.leaves:
        shape, dtype = tape._meta[leaf]
        grad = grads.get(leaf)
        result[leaf] = Tensor._wrap(np.zeros(shape, dtype=dtype) if grad is None else np.asarray(grad, dtype=dtype))
    return result


def _unbroadcast(grad, shape):
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(op, a.shape, b.shape)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.values.ndim != 2 or b.values.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError("matmul", a.shape, b.shape)
    av, bv = a.values, b.values

    def rule(grad):
        return grad @ bv.T, av.T @ grad

    return apply((a, b), av @ bv, rule)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("add", a, b)
    sa, sb = a.shape, b.shape

    def rule(grad):
        return _unbroadcast(grad, sa), _unbroadcast(grad, sb)

    return apply((a, b), a.values + b.values, rule)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("sub", a, b)
    sa, sb = a.shape, b.shape

    def rule(grad):
        return _unbroadcast(grad, sa), -_unbroadcast(grad, sb)

    return apply((a, b), a.values - b.values, rule)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    _check_broadcast("mul", a, b)
    av, bv = a.values, b.values

    def rule(grad):
        return _unbroadcast(grad * bv, av.shape), _unbroadcast(grad * av, bv.shape)

    return apply((a, b), av * bv, rule)


def activation(x, kind):
    x = _as_tensor(x)
    xv = x.values
    if kind == "relu":
        out = np.maximum(xv, 0)

        def rule(grad):
            return (grad * (xv > 0),)

    elif kind == "sigmoid":
        out = expit(xv)

        def rule(grad):
            return (grad * out * (1 - out),)

    elif kind == "softplus":
        out = np.logaddexp(0, xv).astype(xv.dtype)

        def rule(grad):
            return (grad * expit(xv),)

    elif kind == "exp":
        out = np.exp(np.minimum(xv, EXP_CLAMP))

        def rule(grad):
            return (grad * out * (xv <= EXP_CLAMP),)

    else:
        raise ContractError("Unknown activation %r, expected one of %s" % (kind, ", ".join(ACTIVATIONS)))
    return apply((x,), out, rule)


def concat(tensors, axis=-1):
    tensors = [_as_tensor(t) for t in tensors]
    ndim = tensors[0].values.ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.values.ndim != ndim or any(t.shape[i] != tensors[0].shape[i] for i in range(ndim) if i != axis):
            raise DimensionError("concat", tensors[0].shape, t.shape)
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def rule(grad):
        index = [slice(None)] * ndim
        pieces = []
        for start, stop in zip(bounds[:-1], bounds[1:]):
            index[axis] = slice(start, stop)
            pieces.append(grad[tuple(index)])
        return tuple(pieces)

    return apply(tensors, np.concatenate([t.values for t in tensors], axis=axis), rule)


def columns(x, start, stop):
    x = _as_tensor(x)
    shape = x.shape

    def rule(grad):
        full = np.zeros(shape, dtype=grad.dtype)
        full[..., start:stop] = grad
        return (full,)

    return apply((x,), x.values[..., start:stop], rule)


def reshape(x, shape):
    x = _as_tensor(x)
    original = x.shape
    try:
        out = x.values.reshape(shape)
    except ValueError:
        raise DimensionError("reshape", original, shape)

    def rule(grad):
        return (grad.reshape(original),)

    return apply((x,), out, rule)


def clamp(x, low, high):
    x = _as_tensor(x)
    xv = x.values

    def rule(grad):
        return (grad * ((xv >= low) & (xv <= high)),)

    return apply((x,), np.clip(xv, low, high), rule)


def total(x):
    x = _as_tensor(x)
    shape = x.shape

    def rule(grad):
        return (np.broadcast_to(grad, shape).copy(),)

    return apply((x,), np.asarray(x.values.sum()), rule)


def mse_loss(pred, target):
    pred, target = _as_tensor(pred), _as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError("mse_loss", pred.shape, target.shape)
    diff = pred.values - target.values
    count = diff.size

    def rule(grad):
        local = grad * 2 * diff / count
        return local, -local

    return apply((pred, target), np.asarray(np.mean(diff * diff), dtype=diff.dtype), rule)


def linear(x, weight, bias=None):
    out = matmul(x, weight)
    if bias is not None:
        out = add(out, bias)
    return out
