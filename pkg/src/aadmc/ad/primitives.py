"""Differentiable primitives shared by every evaluation mode.

Each function dispatches on its argument: plain floats use :mod:`math`,
complex numbers use :mod:`cmath` (for complex-step differentiation), numpy
arrays use numpy, and AD types (``Dual``, tape ``Var``, graph ``VNode``)
implement ``__ad_unary__`` / ``__ad_sincos__`` to record or propagate
derivatives.  Payoff code written against these functions runs unchanged in
all modes.

The generalized primitives follow the convention ``ramp' = heaviside`` and
``heaviside' = dirac_a`` where ``dirac_a`` is the Gaussian approximation of
the Dirac mass of width ``a``.  On complex arguments the kinks act on the
real part and carry the imaginary part as a first-order tangent.
"""
from __future__ import annotations

import cmath
import contextlib
import contextvars
import math
from dataclasses import dataclass

import numpy as np

SQRT_PI = math.sqrt(math.pi)


class DomainError(ArithmeticError, ValueError):
    """A primitive was evaluated outside its domain (log of non-positive, 1/0)."""


class NonSmoothError(TypeError):
    """Comparison on an AD value; payoffs must use ``ramp``/``heaviside``."""


@dataclass(frozen=True)
class SmoothingConfig:
    """Width of the Gaussian Dirac approximation used as ``heaviside'``."""

    a: float = 0.05

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"smoothing width must be positive, got {self.a!r}")

    @classmethod
    def for_scale(cls, scale: float, fraction: float = 0.05) -> "SmoothingConfig":
        """Default width: a fixed fraction of the argument's natural scale (e.g. the strike)."""
        return cls(fraction * abs(scale))


_SMOOTHING = contextvars.ContextVar("aadmc_smoothing", default=SmoothingConfig())


def current_smoothing() -> SmoothingConfig:
    return _SMOOTHING.get()


@contextlib.contextmanager
def smoothing(a: float):
    """Set the default Dirac width for primitives called without an explicit ``a``."""
    token = _SMOOTHING.set(SmoothingConfig(a))
    try:
        yield
    finally:
        _SMOOTHING.reset(token)


def _width(a):
    return current_smoothing().a if a is None else float(a)


def _is_ad(x):
    return hasattr(type(x), "__ad_unary__")


# -- real / complex / array kernels -------------------------------------------------

def _check_positive(name, x):
    if isinstance(x, np.ndarray):
        bad = np.real(x) <= 0 if name == "log" else np.real(x) < 0
        if np.any(bad):
            raise DomainError(f"{name} of non-positive argument")
    else:
        re = x.real if isinstance(x, complex) else x
        if (name == "log" and re <= 0) or (name == "sqrt" and re < 0):
            raise DomainError(f"{name} of {'non-positive' if name == 'log' else 'negative'} argument {x!r}")


def _plain(name, x, a):
    if name in ("log", "sqrt"):
        _check_positive(name, x)
    if isinstance(x, np.ndarray):
        if name in ("ramp", "heaviside", "dirac"):
            return _GENERALIZED[name](x, a)
        return getattr(np, name)(x)
    if isinstance(x, complex):
        if name in ("ramp", "heaviside", "dirac"):
            return _GENERALIZED[name](x, a)
        return getattr(cmath, name)(x)
    if name in ("ramp", "heaviside", "dirac"):
        return _GENERALIZED[name](x, a)
    return getattr(math, name)(x)


def _heaviside_real(x):
    if isinstance(x, np.ndarray):
        return np.where(x > 0, 1.0, np.where(x < 0, 0.0, 0.5))
    return 1.0 if x > 0 else (0.0 if x < 0 else 0.5)


def _dirac_real(x, a):
    if isinstance(x, np.ndarray):
        return np.exp(-(x * x) / (a * a)) / (a * SQRT_PI)
    return math.exp(-(x * x) / (a * a)) / (a * SQRT_PI)


def _ramp_gen(x, a):
    if isinstance(x, complex):
        return complex(_ramp_gen(x.real, a), x.imag * _heaviside_real(x.real))
    if isinstance(x, np.ndarray) and np.iscomplexobj(x):
        return _ramp_gen(x.real, a) + 1j * x.imag * _heaviside_real(x.real)
    if isinstance(x, np.ndarray):
        return np.where(x > 0, x, 0.0)
    return x if x > 0 else 0.0


def _heaviside_gen(x, a):
    if isinstance(x, complex) or (isinstance(x, np.ndarray) and np.iscomplexobj(x)):
        re, im = x.real, x.imag
        return _heaviside_real(re) + 1j * im * _dirac_real(re, a)
    return _heaviside_real(x)


def _dirac_gen(x, a):
    if isinstance(x, complex) or (isinstance(x, np.ndarray) and np.iscomplexobj(x)):
        re, im = x.real, x.imag
        d = _dirac_real(re, a)
        return d + 1j * im * (-2.0 * re / (a * a)) * d
    return _dirac_real(x, a)


_GENERALIZED = {"ramp": _ramp_gen, "heaviside": _heaviside_gen, "dirac": _dirac_gen}


# -- public primitives ----------------------------------------------------------------

def _unary(name, x, a=None):
    a = _width(a)
    if _is_ad(x):
        return x.__ad_unary__(name, a)
    return _plain(name, x, a)


def exp(x):
    return _unary("exp", x)


def log(x):
    return _unary("log", x)


def sqrt(x):
    return _unary("sqrt", x)


def sin(x):
    return _unary("sin", x)


def cos(x):
    return _unary("cos", x)


def sincos(x):
    """``(sin x, cos x)`` as one two-output primitive."""
    if hasattr(type(x), "__ad_sincos__"):
        return x.__ad_sincos__()
    return _plain("sin", x, None), _plain("cos", x, None)


def ramp(x, a=None):
    """``x^+ = x H(x)``; its derivative is :func:`heaviside`."""
    return _unary("ramp", x, a)


def heaviside(x, a=None):
    """Unit step with ``H(0) = 1/2``; its derivative is :func:`dirac`."""
    return _unary("heaviside", x, a)


def dirac(x, a=None):
    """Gaussian approximation ``exp(-x^2/a^2) / (a sqrt(pi))`` of the Dirac mass."""
    return _unary("dirac", x, a)


dirac_a = dirac


def derivative_of(name, x, y, a):
    """Local derivative of primitive ``name`` at ``x`` given its output ``y``.

    Written with the generic primitives so that nested AD types and complex
    arguments flow through.
    """
    if name == "exp":
        return y
    if name == "log":
        return 1.0 / x
    if name == "sqrt":
        return 0.5 / y
    if name == "sin":
        return cos(x)
    if name == "cos":
        return -sin(x)
    if name == "ramp":
        return heaviside(x, a)
    if name == "heaviside":
        return dirac(x, a)
    if name == "dirac":
        return y * (-2.0 / (a * a)) * x
    raise KeyError(name)


def primal_of(name, x, a):
    return _unary(name, x, a)


def nonsmooth_compare(*_):
    raise NonSmoothError(
        "comparison on a differentiated value: write payoff kinks with ramp()/heaviside(), not max()/min()/if"
    )
