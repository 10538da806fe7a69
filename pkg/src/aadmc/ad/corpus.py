"""Composed smooth test functions ``R^k -> R^m`` written with the AD primitives.

Every entry evaluates on floats, complex numbers, :class:`Dual` and tape
:class:`Var` handles, so the same corpus feeds forward mode, reverse mode,
finite differences and the complex step.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import primitives as P


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    f: Callable
    x0: tuple

    @property
    def n_inputs(self) -> int:
        return len(self.x0)

    def scalar(self, i: int, j: int):
        """``t -> f(x0 + t e_j)[i]``, the univariate slice used by the complex step."""
        def g(t):
            x = list(self.x0)
            x[j] = x[j] + (t - self.x0[j])
            return self.f(x)[i]
        return g


def _fig(x):
    a, b, u = x
    s, c = P.sincos(u)
    return a * b, s, c


def _bs_like(x):
    s, k, v = x
    d = P.log(s / k) / v + 0.5 * v
    return (s * P.exp(-0.5 * d * d) / P.sqrt(2 * 3.141592653589793),)


def _softplus_chain(x):
    (t,) = x
    return (P.log(1.0 + P.exp(P.sin(t) * 2.0)),)


CORPUS = (
    CorpusEntry("fig", _fig, (2.0, 3.0, 0.3)),
    CorpusEntry("product3", lambda x: (x[0] * x[1] * x[2],), (1.5, -0.7, 2.2)),
    CorpusEntry("rational", lambda x: ((x[0] + 1.0) / (x[1] * x[1] + 2.0),), (0.4, 1.3)),
    CorpusEntry("exp_sin", lambda x: (P.exp(P.sin(x[0]) * x[1]),), (0.7, 1.1)),
    CorpusEntry("log_sqrt", lambda x: (P.log(P.sqrt(x[0] * x[0] + x[1] * x[1])),), (1.2, 0.8)),
    CorpusEntry("polar", lambda x: (x[0] * P.cos(x[1]), x[0] * P.sin(x[1])), (2.0, 0.6)),
    CorpusEntry("gbm_step", lambda x: (x[0] * P.exp((x[1] - 0.5 * x[2] * x[2]) * 0.25 + x[2] * 0.5 * 0.3),),
                (40.0, 0.06, 0.2)),
    CorpusEntry("bs_like", _bs_like, (42.0, 40.0, 0.25)),
    CorpusEntry("softplus_chain", _softplus_chain, (0.9,)),
    CorpusEntry("fanout_poly", lambda x: (x[0] ** 2 + x[0] ** 3, x[0] * x[0] * x[0] * x[0]), (1.3,)),
    CorpusEntry("nested_exp", lambda x: (P.exp(P.exp(x[0] * 0.3) - 1.0),), (0.8,)),
    CorpusEntry("trig_mix", lambda x: (P.sin(x[0]) * P.cos(x[1]) + P.cos(x[0] * x[1]),), (0.5, 1.7)),
    CorpusEntry("quotient_chain", lambda x: (1.0 / (1.0 + x[0] / (1.0 + x[1] / (1.0 + x[2]))),), (0.3, 0.9, 1.4)),
    CorpusEntry("sqrt_sum", lambda x: (P.sqrt(1.0 + x[0] * x[0]) + P.sqrt(2.0 + x[1] * x[0]),), (0.6, 1.9)),
    CorpusEntry("log_ratio", lambda x: (P.log(x[0] / x[1]) * x[2],), (3.0, 1.7, 0.45)),
    CorpusEntry("gaussian", lambda x: (P.exp(-(x[0] - x[1]) * (x[0] - x[1]) / (2.0 * x[2] * x[2])) / x[2],),
                (0.2, -0.1, 0.7)),
    CorpusEntry("two_outputs", lambda x: (x[0] * P.exp(x[1]), P.log(x[0]) - x[1] * x[1]), (1.7, -0.4)),
    CorpusEntry("power_real", lambda x: (x[0] ** 2.5 * x[1] ** -1.5,), (1.4, 2.1)),
    CorpusEntry("discount_sum", lambda x: (sum(P.exp(-x[0] * (k + 1) * 0.25) * x[1] for k in range(8)),), (0.05, 3.0)),
    CorpusEntry("euler_chain", lambda x: (_euler(x),), (40.0, 0.06, 0.2)),
    CorpusEntry("sincos_chain", lambda x: tuple(P.sincos(P.sin(x[0]) * x[1])), (0.8, 1.6)),
    CorpusEntry("logistic", lambda x: (1.0 / (1.0 + P.exp(-x[0] * x[1] + x[2])),), (0.4, 2.0, -0.3)),
)


def _euler(x):
    s, r, v = x
    z = (0.3, -1.1, 0.6, 0.05, -0.4)
    for w in z:
        s = s + s * r * 0.2 + s * v * 0.2 ** 0.5 * w
    return s
