"""Second-order forward-mode scalars over the ephemeral constants.

Evaluating an expression on :class:`D2Scalar` operands yields its value
together with the exact gradient and Hessian with respect to the m
constants, in one pass.  The `value` may be a plain scalar or an
(N,)-shaped batch of samples; `grad` and `hess` carry one and two
trailing axes of length m and broadcast against `value`, so the same
kernel code serves both the scalar contract and the batched evaluation
used by the loss.

Non-finite values (log of a non-positive number, division by zero)
propagate as inf/nan; the algebra never raises for them.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Union

import numpy as np

#: arity of every supported kernel; unary kernels read one operand.
ARITY = {"add": 2, "sub": 2, "mul": 2, "div": 2, "log": 1, "sin": 1}

#: infix symbol for the binary kernels (used by expression decoding).
BINARY_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


@dataclass(frozen=True)
class KernelSet:
    """Ordered kernel identifiers; position defines the kernel gene encoding."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        unknown = [n for n in self.names if n not in ARITY]
        if unknown:
            raise ValueError(f"unknown kernels: {unknown}; supported: {sorted(ARITY)}")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate kernel identifiers in {self.names}")
        if not self.names:
            raise ValueError("kernel set must not be empty")

    @classmethod
    def of(cls, *names: str) -> "KernelSet":
        return cls(tuple(names))

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)

    def arity(self, gene: int) -> int:
        return ARITY[self.names[gene]]


# Shared all-zero gradient/Hessian blocks, keyed by m.  Marked read-only so
# the sharing can never leak a mutation; ops on them broadcast away.
_ZERO_BLOCKS: dict[int, tuple[np.ndarray, np.ndarray]] = {}
_UNIT_GRADS: dict[tuple[int, int], np.ndarray] = {}


def _zeros(m: int) -> tuple[np.ndarray, np.ndarray]:
    blocks = _ZERO_BLOCKS.get(m)
    if blocks is None:
        g = np.zeros(m)
        h = np.zeros((m, m))
        g.setflags(write=False)
        h.setflags(write=False)
        blocks = (g, h)
        _ZERO_BLOCKS[m] = blocks
    return blocks


def _unit(j: int, m: int) -> np.ndarray:
    g = _UNIT_GRADS.get((j, m))
    if g is None:
        g = np.zeros(m)
        g[j] = 1.0
        g.setflags(write=False)
        _UNIT_GRADS[(j, m)] = g
    return g


class D2Scalar:
    """A number carrying value, gradient and symmetric Hessian w.r.t. m constants.

    Instances are immutable; every operation returns a new object.  Mixing
    operands built for different m raises ValueError.
    """

    __slots__ = ("value", "grad", "hess", "m")

    def __init__(self, value, grad, hess, m: Optional[int] = None):
        value = np.asarray(value, dtype=float)
        grad = np.asarray(grad, dtype=float)
        hess = np.asarray(hess, dtype=float)
        if m is None:
            m = grad.shape[-1] if grad.ndim else 0
        if grad.shape[-1:] != (m,):
            raise ValueError(f"grad trailing axis {grad.shape} does not match m={m}")
        if hess.shape[-2:] != (m, m):
            raise ValueError(f"hess trailing axes {hess.shape} do not match m={m}")
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "hess", hess)
        object.__setattr__(self, "m", m)

    def __setattr__(self, name, value):
        raise AttributeError("D2Scalar is immutable")

    def __repr__(self) -> str:
        return f"D2Scalar(value={self.value!r}, m={self.m})"

    def _coerce(self, other) -> "D2Scalar":
        if isinstance(other, D2Scalar):
            if other.m != self.m:
                raise ValueError(f"operand m mismatch: {self.m} != {other.m}")
            return other
        return d2_constant(other, self.m)

    # -- arithmetic kernels ------------------------------------------------

    def __add__(self, other) -> "D2Scalar":
        o = self._coerce(other)
        return D2Scalar(self.value + o.value, self.grad + o.grad, self.hess + o.hess, self.m)

    def __sub__(self, other) -> "D2Scalar":
        o = self._coerce(other)
        return D2Scalar(self.value - o.value, self.grad - o.grad, self.hess - o.hess, self.m)

    def __mul__(self, other) -> "D2Scalar":
        o = self._coerce(other)
        v = self.value * o.value
        g = self.value[..., None] * o.grad + o.value[..., None] * self.grad
        outer = self.grad[..., :, None] * o.grad[..., None, :]
        h = (
            self.value[..., None, None] * o.hess
            + o.value[..., None, None] * self.hess
            + outer
            + np.swapaxes(outer, -1, -2)
        )
        return D2Scalar(v, g, h, self.m)

    def __truediv__(self, other) -> "D2Scalar":
        o = self._coerce(other)
        # value computed as a direct divide so the m=0 case is bit-identical
        # to plain arithmetic; derivative terms reuse the reciprocal.
        v = self.value / o.value
        inv = 1.0 / o.value
        s = self.grad - v[..., None] * o.grad  # inv * s == grad of the quotient
        g = inv[..., None] * s
        cross = s[..., :, None] * o.grad[..., None, :]
        h = inv[..., None, None] * (self.hess - v[..., None, None] * o.hess) - (
            inv**2
        )[..., None, None] * (cross + np.swapaxes(cross, -1, -2))
        return D2Scalar(v, g, h, self.m)

    def log(self) -> "D2Scalar":
        v = np.log(self.value)
        inv = 1.0 / self.value
        g = inv[..., None] * self.grad
        outer = self.grad[..., :, None] * self.grad[..., None, :]
        h = inv[..., None, None] * self.hess - (inv**2)[..., None, None] * outer
        return D2Scalar(v, g, h, self.m)

    def sin(self) -> "D2Scalar":
        c = np.cos(self.value)
        s = np.sin(self.value)
        g = c[..., None] * self.grad
        outer = self.grad[..., :, None] * self.grad[..., None, :]
        h = c[..., None, None] * self.hess - s[..., None, None] * outer
        return D2Scalar(s, g, h, self.m)


def d2_constant(v, m: int) -> D2Scalar:
    """Lift a plain value: zero gradient, zero Hessian."""
    if m < 0:
        raise ValueError("m must be >= 0")
    g, h = _zeros(m)
    return D2Scalar(v, g, h, m)


def d2_seed(v, j: int, m: int) -> D2Scalar:
    """Lift the j-th constant: unit gradient entry, zero Hessian."""
    if not 0 <= j < m:
        raise IndexError(f"seed index {j} out of range for m={m}")
    _, h = _zeros(m)
    return D2Scalar(v, _unit(j, m), h, m)


def _k_log(a):
    return a.log() if isinstance(a, D2Scalar) else np.log(a)


def _k_sin(a):
    return a.sin() if isinstance(a, D2Scalar) else np.sin(a)


#: kernel implementations; operator dunders make them work both on plain
#: numpy values and on D2Scalar operands.
KERNEL_IMPL: dict[str, Callable] = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
    "div": operator.truediv,
    "log": _k_log,
    "sin": _k_sin,
}


def apply_kernel(kernel: str, a: D2Scalar, b: Union[D2Scalar, None] = None) -> D2Scalar:
    """Apply one kernel to D2Scalar operands; b is required iff the kernel is binary."""
    arity = ARITY[kernel]
    if arity == 2 and b is None:
        raise ValueError(f"kernel {kernel!r} is binary, second operand missing")
    if arity == 1 and b is not None:
        raise ValueError(f"kernel {kernel!r} is unary, second operand not allowed")
    with np.errstate(all="ignore"):
        if arity == 1:
            return KERNEL_IMPL[kernel](a)
        return KERNEL_IMPL[kernel](a, b)
