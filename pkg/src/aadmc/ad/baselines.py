"""Finite-difference and complex-step differentiators used as oracles."""
from __future__ import annotations

from typing import Callable


def complex_step_derivative(f: Callable, a: float, da: float = 1e-20) -> float:
    """``Im f(a + i*da) / da``.

    No difference of nearby values is formed, so ``da`` may be taken far below
    the square root of machine epsilon.  ``f`` must accept complex input; the
    primitives in :mod:`aadmc.ad.primitives` do.
    """
    if not da > 0:
        raise ValueError(f"complex step must be positive, got {da!r}")
    return complex(f(complex(a, da))).imag / da


def central_difference(f: Callable, x: float, h: float = 1e-5) -> float:
    if not h > 0:
        raise ValueError(f"step must be positive, got {h!r}")
    return (f(x + h) - f(x - h)) / (2.0 * h)


def central_second_difference(f: Callable, x: float, h: float) -> float:
    """Three-point estimate of ``f''(x)``.

    Truncation error is ``f''''(x) h^2 / 12`` while round-off grows like
    ``eps |f| / h^2``; there is no step that makes both small for kinked ``f``.
    """
    if not h > 0:
        raise ValueError(f"step must be positive, got {h!r}")
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)


def central_gradient(f: Callable, x, h: float = 1e-5):
    """Central differences of a vector function, one input at a time; returns an m x k list."""
    import numpy as np

    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        fp = np.atleast_1d(np.asarray(f(list(xp)), dtype=float))
        fm = np.atleast_1d(np.asarray(f(list(xm)), dtype=float))
        cols.append((fp - fm) / (2.0 * h))
    return np.array(cols).T
