"""Forward mode: dual numbers ``<value, tangent>``."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from . import primitives as P


@dataclass(frozen=True)
class Dual:
    """Truncated power series ``value + tangent * eps`` with ``eps^2 = 0``.

    Components may be floats, complex numbers, arrays or Duals themselves
    (nesting gives second-order forward mode).
    """

    value: Any
    tangent: Any = 0.0
    __array_ufunc__ = None  # numpy defers to our reflected operators

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.tangent + other.tangent)
        return Dual(self.value + other, self.tangent)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.tangent - other.tangent)
        return Dual(self.value - other, self.tangent)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.tangent)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value * other.value, self.value * other.tangent + self.tangent * other.value)
        return Dual(self.value * other, self.tangent * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            _nonzero(other.value)
            q = self.value / other.value
            return Dual(q, (self.tangent - q * other.tangent) / other.value)
        _nonzero(other)
        return Dual(self.value / other, self.tangent / other)

    def __rtruediv__(self, other):
        _nonzero(self.value)
        q = other / self.value
        return Dual(q, -q * self.tangent / self.value)

    def __neg__(self):
        return Dual(-self.value, -self.tangent)

    def __pos__(self):
        return self

    def __pow__(self, p):
        if isinstance(p, Dual):
            return P.exp(p * P.log(self))
        if p == 0:
            return Dual(self.value ** 0, 0.0 * self.tangent)
        return Dual(self.value ** p, p * self.value ** (p - 1) * self.tangent)

    def __ad_unary__(self, name, a):
        y = P.primal_of(name, self.value, a)
        return Dual(y, self.tangent * P.derivative_of(name, self.value, y, a))

    def __ad_sincos__(self):
        v, w = P.sincos(self.value)
        return Dual(v, w * self.tangent), Dual(w, -v * self.tangent)

    __lt__ = __le__ = __gt__ = __ge__ = P.nonsmooth_compare

    def __repr__(self):
        return f"Dual({self.value!r}, {self.tangent!r})"


def _nonzero(x):
    if isinstance(x, Dual):
        x = x.value
    if np.any(np.asarray(x) == 0):
        raise P.DomainError("division by zero")


def _as_tuple(out):
    if isinstance(out, (tuple, list)):
        return tuple(out)
    return (out,)


def forward_directional(f: Callable, x: Sequence[float], dx: Sequence[float]):
    """Evaluate ``f`` and the Jacobian-vector product ``J_f(x) dx`` in one pass.

    ``f`` takes the sequence of inputs and returns one value or a tuple.
    Returns ``(values, tangents)`` as tuples of length m.
    """
    if len(x) != len(dx):
        raise ValueError(f"direction has length {len(dx)}, expected {len(x)}")
    out = _as_tuple(f([Dual(xi, di) for xi, di in zip(x, dx)]))
    values = tuple(o.value if isinstance(o, Dual) else o for o in out)
    tangents = tuple(o.tangent if isinstance(o, Dual) else 0.0 for o in out)
    return values, tangents


def forward_jacobian(f: Callable, x: Sequence[float]) -> np.ndarray:
    """Full Jacobian, one forward pass per input direction (one column each)."""
    k = len(x)
    cols = []
    for j in range(k):
        e = [0.0] * k
        e[j] = 1.0
        cols.append(forward_directional(f, x, e)[1])
    return np.array(cols, dtype=float).T.reshape(-1, k)


def derivative(f: Callable, x: float) -> float:
    """Derivative of a scalar function of one variable."""
    out = f(Dual(x, 1.0))
    return out.tangent if isinstance(out, Dual) else 0.0
