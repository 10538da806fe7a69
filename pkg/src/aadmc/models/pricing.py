"""Monte-Carlo price, Black-Scholes closed forms, Malliavin gamma, pathwise AAD Greeks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from ..ad import primitives as P
from ..vector import VGraph, vgradient
from .payoffs import Payoff
from .scenario import ScenarioParams
from .simulate import PathBatch, outer_normals


@dataclass(frozen=True)
class Estimate:
    value: float
    se: float
    n_paths: int = 0

    def within(self, target: float, k: float = 3.0, extra_se: float = 0.0) -> bool:
        return abs(self.value - target) <= k * math.hypot(self.se, extra_se)


def mean_se(samples) -> Estimate:
    s = np.asarray(samples, dtype=float)
    n = s.size
    se = float(s.std(ddof=1) / math.sqrt(n)) if n > 1 and np.ptp(s) > 0 else 0.0
    return Estimate(float(s.mean()), se, n)


def discounted_payoffs(batch: PathBatch, payoff: Payoff, r: float | None = None) -> np.ndarray:
    p = batch.params
    r = p.rate if r is None else r
    cols = [batch.X[:, k] for k in range(batch.X.shape[1])] if payoff.path_dependent else [batch.X[:, -1]]
    return math.exp(-r * p.maturity) * np.asarray(payoff.value(cols), dtype=float)


def price_mc(batch: PathBatch, payoff: Payoff, r: float | None = None) -> Estimate:
    """Discounted sample mean and its standard error."""
    return mean_se(discounted_payoffs(batch, payoff, r))


@dataclass(frozen=True)
class BlackScholes:
    price: float
    delta: float
    gamma: float
    vega: float


def bs_closed_form(params: ScenarioParams, kind: str | None = None) -> BlackScholes:
    kind = kind or params.payoff
    S, K, r, s, T = params.spot, params.strike, params.rate, params.sigma, params.maturity
    df = math.exp(-r * T)
    if s == 0 or T == 0:
        fwd = S * math.exp(r * T)
        call = kind.endswith("call")
        itm = fwd > K if call else fwd < K
        price = df * max(fwd - K, 0.0) if call else df * max(K - fwd, 0.0)
        delta = (1.0 if call else -1.0) if itm else 0.0
        return BlackScholes(price, delta, 0.0, 0.0)
    sq = s * math.sqrt(T)
    d1 = (math.log(S / K) + (r + 0.5 * s * s) * T) / sq
    d2 = d1 - sq
    pdf = math.exp(-0.5 * d1 * d1) / math.sqrt(2 * math.pi)
    gamma = pdf / (S * sq)
    vega = S * pdf * math.sqrt(T)
    if kind.endswith("call"):
        return BlackScholes(S * ndtr(d1) - K * df * ndtr(d2), float(ndtr(d1)), gamma, vega)
    return BlackScholes(K * df * ndtr(-d2) - S * ndtr(-d1), float(ndtr(d1) - 1.0), gamma, vega)


def malliavin_gamma(batch: PathBatch, payoff: Payoff, params: ScenarioParams | None = None) -> Estimate:
    """Gamma by the Malliavin weight; the payoff is evaluated, never differentiated."""
    p = params or batch.params
    if p.sigma <= 0 or p.maturity <= 0:
        raise ValueError("Malliavin weight is singular for zero volatility or maturity")
    s, T, x = p.sigma, p.maturity, p.spot
    W = math.sqrt(p.h) * batch.Z.sum(axis=1)
    weight = (W * W / (s * T) - W - 1.0 / s) / (x * x * T * s)
    return mean_se(discounted_payoffs(batch, payoff, p.rate) * weight)


# -- pathwise first-order Greeks on the vector graph --------------------------------------

PARAM_ORDER = ("spot", "rate", "sigma", "strike")


def build_pricing_graph(params: ScenarioParams, payoff: Payoff, scheme: str = "euler") -> VGraph:
    """Discounted payoff as a graph of (spot, rate, sigma, strike) and the outer noise.

    ``scheme="exact"`` samples the log-normal terminal value from one normal.
    """
    g = VGraph()
    S, r, s, K = (g.param(n) for n in PARAM_ORDER)
    T = params.maturity
    if scheme == "exact":
        drift = (r - 0.5 * s * s) * T
        x = S * P.exp(drift + s * math.sqrt(T) * g.random(0))
        cols = [x]
    else:
        h = params.h
        rh = r * h
        vol = s * math.sqrt(h)
        x = S
        cols = [x]
        for k in range(params.steps):
            x = x + rh * x + (x * vol) * g.random(k)
            cols.append(x)
        if not payoff.path_dependent:
            cols = [x]
    g.output(P.exp(-(r * T)) * payoff.value(cols, strike=K))
    return g


@dataclass(frozen=True)
class PathwiseGreeks:
    price: Estimate
    sensitivities: dict     # name -> Estimate


def pathwise_greeks(params: ScenarioParams, payoff: Payoff | None = None, scheme: str = "euler",
                    chunk: int = 20_000, n_paths: int | None = None) -> PathwiseGreeks:
    """First-order Greeks for all of (spot, rate, sigma, strike) from one reverse sweep per chunk."""
    payoff = payoff or Payoff.from_params(params)
    g = build_pricing_graph(params, payoff, scheme)
    M = params.paths if n_paths is None else n_paths
    theta = [params.spot, params.rate, params.sigma, params.strike]
    ncols = 1 if scheme == "exact" else params.steps
    chunks = (outer_normals(params, p0, min(chunk, M - p0), ncols) for p0 in range(0, M, chunk))
    vals, pps = [], []
    from ..vector import vforward_sweep, vreverse_sweep, output_values
    for z in chunks:
        st = vforward_sweep(g, theta, z)
        vals.append(output_values(st).copy())
        pps.append(vreverse_sweep(g, st, per_path=True).per_path)
    pp = np.vstack(pps)
    sens = {n: mean_se(pp[:, i]) for i, n in enumerate(PARAM_ORDER)}
    return PathwiseGreeks(mean_se(np.concatenate(vals)), sens)
