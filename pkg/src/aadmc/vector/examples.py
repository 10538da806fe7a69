"""Small reference graphs used by tests, benchmarks and the acceptance gate."""
from __future__ import annotations

import math

from ..ad import primitives as P
from .graph import VGraph


def lognormal_payoff_graph(strike: float = 40.0, maturity: float = 1.0) -> VGraph:
    """``(exp(mu(theta) + Sigma(theta) W) - K)^+`` with params (spot, rate, sigma).

    ``mu = log S + (r - sigma^2/2) T`` and ``Sigma = sigma sqrt(T)`` are pure
    scalar chains; only the exponential and the ramp see the random input.
    """
    g = VGraph()
    s, r, v = g.param("spot"), g.param("rate"), g.param("sigma")
    mu = P.log(s) + (r - 0.5 * v * v) * maturity
    sig = v * math.sqrt(maturity)
    g.output(P.exp(-(r * maturity)) * P.ramp(P.exp(mu + sig * g.random(0)) - strike))
    return g


def fanout_graph(k: int) -> tuple[VGraph, int]:
    """Parameter ``x`` read by ``k`` vector consumers ``x * c_i * W``; returns (graph, id of x)."""
    g = VGraph()
    x = g.param("x")
    w = g.random(0)
    terms = [(x * (1.0 + 0.001 * i)) * w for i in range(k)]
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    g.output(total)
    return g, x.id
