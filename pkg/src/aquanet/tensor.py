"""Tensor container and reverse-mode tape.

A :class:`Tensor` is a thin wrapper around a numpy array. Operations in
:mod:`aquanet.ops` record themselves on the innermost active :class:`Tape`
whenever at least one input requires a gradient; :func:`backward` then walks
the tape in reverse execution order and accumulates into every :class:`Param`.

Nothing is recorded when no tape is active, so inference code simply calls
the same functions outside a ``with Tape():`` block.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractViolation, NonFiniteError

DEFAULT_DTYPE = np.float32


class Tensor:
    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data, dtype=None, requires_grad=False, name=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data = arr
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar(self)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{tag})"

    # operator sugar; the real work lives in aquanet.ops
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from . import ops
        return ops.div(self, other)

    def __neg__(self):
        from . import ops
        return ops.mul(self, -1.0)


def _not_scalar(t):
    raise ContractViolation(f"item() needs a single-element tensor, got shape {t.shape}")


class Param(Tensor):
    """A trainable leaf tensor with an accumulated gradient."""

    __slots__ = ("grad",)

    def __init__(self, data, name, dtype=None):
        super().__init__(data, dtype=dtype, requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Param({self.name!r}, shape={self.shape}, dtype={self.dtype})"


@dataclass
class Node:
    op: str
    inputs: tuple
    output: Tensor
    backward: Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


@dataclass
class Tape:
    """Ordered record of differentiable operations.

    Use as a context manager; tapes nest and the innermost one records.
    ``check_finite`` makes every recorded op verify its output, which is how
    :func:`aquanet.gradcheck.grad_check` names the op that produced a NaN.
    """

    check_finite: bool = False
    nodes: list = field(default_factory=list)

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.pop()
        return False

    def __len__(self):
        return len(self.nodes)


_TAPES: list = []


def active_tape() -> Optional[Tape]:
    return _TAPES[-1] if _TAPES else None


def record(op, out, inputs, backward_fn):
    """Wrap ``out`` in a Tensor and put it on the active tape if gradients flow.

    ``backward_fn`` maps the output gradient to one gradient per input (or
    ``None`` for inputs that need none).
    """
    tape = active_tape()
    if tape is not None and tape.check_finite and not np.all(np.isfinite(out)):
        raise NonFiniteError(op, f"output shape {out.shape}")
    needs = tape is not None and any(t.requires_grad for t in inputs)
    result = Tensor(out, requires_grad=needs)
    if needs:
        tape.nodes.append(Node(op, tuple(inputs), result, backward_fn))
    return result


def backward(tape: Tape, loss: Tensor):
    """Accumulate d(loss)/d(param) into every Param reachable through ``tape``."""
    if loss.data.size != 1:
        raise ContractViolation(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractViolation("loss was not produced under the tape from any Param")
    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        in_grads = node.backward(g)
        for inp, gi in zip(node.inputs, in_grads):
            if gi is None or not inp.requires_grad:
                continue
            if gi.shape != inp.shape:
                raise ContractViolation(
                    f"'{node.op}' returned grad of shape {gi.shape} for input {inp.shape}"
                )
            if isinstance(inp, Param):
                inp.grad += gi
            else:
                key = id(inp)
                prev = grads.get(key)
                grads[key] = gi if prev is None else prev + gi


def as_tensor(x, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype) if dtype is not None else x)
