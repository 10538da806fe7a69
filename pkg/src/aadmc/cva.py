"""Credit valuation adjustment: nested Monte Carlo and the AAD hedging-sensitivity method.

The AAD route prices once with a financing-cost surface ``phi(t_k, cell_j)``
entering the drift, gets every ``dV/dphi`` from one reverse sweep, converts
them into deltas through the occupancy of each cell, rebuilds pathwise
exposures on a fresh batch as a discrete stochastic integral of those deltas,
and integrates the positive exposure against the default density.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import _kernels as K
from .models.payoffs import Payoff
from .models.pricing import Estimate, mean_se
from .models.scenario import ScenarioParams
from .models.simulate import outer_normals, simulate
from .vector import VGraph, vforward_sweep, vreverse_with_mean, output_values
from .vector.schedule import vreverse_layered

NESTED_STREAM = 2
DEFAULT_BUCKETS = 40


@dataclass(frozen=True)
class CreditParams:
    hazard: float
    lgd: float

    def __post_init__(self):
        if self.hazard < 0 or not 0 <= self.lgd <= 1:
            raise ValueError("hazard must be >= 0 and lgd in [0, 1]")

    @classmethod
    def from_params(cls, p: ScenarioParams) -> "CreditParams":
        return cls(p.hazard, p.lgd)

    def default_probability(self, t):
        return 1.0 - np.exp(-self.hazard * np.asarray(t, dtype=float))


def default_weights(times, hazard: float) -> np.ndarray:
    """Default probability of each interval ``[t_k, t_{k+1})``.

    Exposure is held at its left-endpoint value over the interval and the
    default density is integrated exactly, so the weights sum to ``Q(tau <= T)``.
    """
    t = np.asarray(times, dtype=float)
    e = np.exp(-hazard * t)
    return e[:-1] - e[1:]


def bucket_edges(params: ScenarioParams, k: int, n_buckets: int = DEFAULT_BUCKETS) -> np.ndarray:
    """Inner edges of equal-probability buckets of the log-normal marginal at ``t_k``."""
    t = k * params.h
    q = ndtri(np.arange(1, n_buckets) / n_buckets)
    s = params.sigma * math.sqrt(t)
    return params.spot * np.exp((params.rate - 0.5 * params.sigma ** 2) * t + s * q)


# -- step 1: input sensitivities ------------------------------------------------------------

@dataclass
class Step1Graph:
    graph: VGraph
    cells: np.ndarray        # (n, B) parameter positions
    spots: list              # node ids of X_k
    buckets: list            # node ids of bucket index at t_k
    edges: list


def build_financing_graph(params: ScenarioParams, payoff: Payoff, n_buckets: int = DEFAULT_BUCKETS,
                          cell_map=None) -> Step1Graph:
    """Discounted payoff with drift ``(r + phi(t_k, X_k)) h``.

    ``cell_map(k, j) -> parameter index`` lets several cells share one
    parameter; by default every (date, bucket) cell is its own parameter.
    """
    n = params.steps
    h = params.h
    g = VGraph()
    if cell_map is None:
        cell_map = lambda k, j: k * n_buckets + j  # noqa: E731
    n_par = max(cell_map(k, j) for k in range(n) for j in range(n_buckets)) + 1
    par = [g.param(f"phi{i}") for i in range(n_par)]
    cells = np.array([[cell_map(k, j) for j in range(n_buckets)] for k in range(n)])
    x = g.const(params.spot)
    cols = [x]
    spots, buckets, edges = [], [], []
    vol = params.sigma * math.sqrt(h)
    for k in range(n):
        e = bucket_edges(params, k, n_buckets)
        b = g.bucketize(x, e)
        phi = g.choose(b, [par[c] for c in cells[k]])
        spots.append(x.id)
        buckets.append(b.id)
        edges.append(e)
        x = x + ((params.rate + phi) * h) * x + (x * vol) * g.random(k)
        cols.append(x)
    if not payoff.path_dependent:
        cols = cols[-1:]
    g.output(math.exp(-params.rate * params.maturity) * payoff.value(cols))
    return Step1Graph(g, cells, spots, buckets, edges)


@dataclass
class SensitivitySurface:
    """Per-date cells: input sensitivity, occupancy, and the implied delta."""

    value: Estimate
    dv_dphi: np.ndarray       # (n, B)
    f_s: np.ndarray           # (n, B) occupancy fraction times dt
    mean_spot: np.ndarray     # (n, B)
    counts: np.ndarray        # (n, B) path visits
    times: np.ndarray         # (n,)
    discount: np.ndarray      # (n,) discount factor to t_{k+1}
    reverse_sweeps: int
    n_paths: int
    edges: list = field(repr=False, default_factory=list)

    @property
    def available(self) -> np.ndarray:
        return self.f_s > 0

    def cell_delta(self) -> np.ndarray:
        """``dV/dS = dV/dphi / (S f_S)`` per cell, discounted back to the hedge date; NaN where empty."""
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.dv_dphi / (self.mean_spot * self.f_s * self.discount[:, None])
        d[~self.available] = np.nan
        return d


def input_sensitivity_surface(params: ScenarioParams, n_paths: int, payoff: Payoff | None = None,
                              n_buckets: int = DEFAULT_BUCKETS, chunk: int = 250_000,
                              seed: int | None = None, threads: int | None = None) -> SensitivitySurface:
    """Price and all ``dV/dphi`` cells from one mean-mode reverse sweep per chunk of paths.

    ``threads`` switches to the layered sweep, whose result does not depend
    on the thread count.
    """
    payoff = payoff or Payoff.from_params(params)
    sg = build_financing_graph(params, payoff, n_buckets)
    g = sg.graph
    n = params.steps
    theta = np.zeros(len(g.params))
    sens = np.zeros(len(g.params))
    counts = np.zeros((n, n_buckets))
    spot_sum = np.zeros((n, n_buckets))
    vals = []
    sweeps = 0
    for p0 in range(0, n_paths, chunk):
        m = min(chunk, n_paths - p0)
        st = vforward_sweep(g, theta, outer_normals(params, p0, m, n, seed))
        vals.append(output_values(st).copy())
        if threads is None:
            res = vreverse_with_mean(g, st, "auto")
        else:
            res = vreverse_layered(g, st, "auto", threads=threads)
        sweeps += 1
        sens += res.sensitivities * m
        for k in range(n):
            idx = np.broadcast_to(st.values[sg.buckets[k]], (m,))
            xs = np.broadcast_to(st.values[sg.spots[k]], (m,))
            counts[k] += np.bincount(idx, minlength=n_buckets)
            spot_sum[k] += np.bincount(idx, weights=xs, minlength=n_buckets)
        del st
    sens /= n_paths
    dv = sens[sg.cells]
    with np.errstate(invalid="ignore"):
        mean_spot = np.where(counts > 0, spot_sum / np.maximum(counts, 1), np.nan)
    f_s = counts / n_paths * params.h
    times = np.arange(n) * params.h
    disc = np.exp(-params.rate * (times + params.h))
    return SensitivitySurface(mean_se(np.concatenate(vals)), dv, f_s, mean_spot, counts, times, disc,
                              sweeps, n_paths, sg.edges)


# -- step 2: hedging sensitivities and exposures --------------------------------------------

@dataclass
class DeltaSurface:
    times: np.ndarray
    spots: list     # per date: sorted cell spots with data
    deltas: list    # per date: matching deltas

    @classmethod
    def from_surface(cls, surface: SensitivitySurface, min_count: int = 1) -> "DeltaSurface":
        d = surface.cell_delta()
        spots, deltas = [], []
        for k in range(d.shape[0]):
            ok = surface.available[k] & (surface.counts[k] >= min_count)
            s = surface.mean_spot[k][ok]
            order = np.argsort(s)
            spots.append(s[order])
            deltas.append(d[k][ok][order])
        return cls(surface.times, spots, deltas)

    def at_date(self, k: int, s) -> tuple[np.ndarray, np.ndarray]:
        """Delta at date index ``k`` by linear interpolation in spot; also an out-of-range mask."""
        s = np.asarray(s, dtype=float)
        xs, ys = self.spots[k], self.deltas[k]
        if xs.size == 0:
            return np.zeros_like(s), np.ones(s.shape, dtype=bool)
        if xs.size == 1:
            return np.full_like(s, ys[0]), np.zeros(s.shape, dtype=bool)
        out = (s < xs[0]) | (s > xs[-1])
        return np.interp(s, xs, ys), out

    def __call__(self, u: float, s):
        """Bilinear lookup: linear in spot at the two bracketing dates, then linear in time."""
        t = self.times
        if u <= t[0]:
            return self.at_date(0, s)[0]
        if u >= t[-1]:
            return self.at_date(len(t) - 1, s)[0]
        k = int(np.searchsorted(t, u, side="right") - 1)
        w = (u - t[k]) / (t[k + 1] - t[k])
        return (1 - w) * self.at_date(k, s)[0] + w * self.at_date(k + 1, s)[0]


def hedging_sensitivity(surface: SensitivitySurface, k: int, j: int) -> float:
    """Delta of cell ``j`` at date ``k``; raises when the cell was never visited."""
    if not surface.available[k, j]:
        raise ValueError(f"cell ({k}, {j}) has no occupancy")
    return float(surface.cell_delta()[k, j])


@dataclass
class ExposureProfile:
    values: np.ndarray       # (N2, n) exposure at t_0..t_{n-1}
    spots: np.ndarray        # (N2, n+1)
    times: np.ndarray
    extrapolated: int        # paths with at least one lookup outside the surface
    excluded: int

    @property
    def positive(self) -> np.ndarray:
        return np.maximum(self.values, 0.0)


def reconstruct_exposure(params: ScenarioParams, deltas: DeltaSurface, value0: float, n_paths: int,
                         seed: int | None = None, exclude_extrapolated: bool = False) -> ExposureProfile:
    """``v(t_k) = V0 + sum_{j<k} delta(t_j, S_j) (S~_{j+1} - S~_j)`` on discounted spots, undiscounted back."""
    seed = params.seed + 1 if seed is None else seed
    batch = simulate(params, "spot", 0, n_paths, seed)
    S = batch.X
    n = params.steps
    t = np.arange(n + 1) * params.h
    disc = np.exp(-params.rate * t)
    St = S * disc
    v = np.empty((n_paths, n))
    acc = np.full(n_paths, float(value0))
    flag = np.zeros(n_paths, dtype=bool)
    for k in range(n):
        v[:, k] = acc / disc[k]
        d, out = deltas.at_date(k, S[:, k])
        flag |= out
        acc = acc + d * (St[:, k + 1] - St[:, k])
    excluded = 0
    if exclude_extrapolated:
        excluded = int(flag.sum())
        v = v[~flag]
        S = S[~flag]
    return ExposureProfile(v, S, t[:-1], int(flag.sum()), excluded)


@dataclass
class CVAResult:
    cva: Estimate
    per_path: np.ndarray = field(repr=False)
    timings: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)


def pathwise_cva(exposure: np.ndarray, params: ScenarioParams, credit: CreditParams) -> np.ndarray:
    """``LGD sum_k D(t_k) v(t_k)^+ (e^{-lambda t_k} - e^{-lambda t_{k+1}})`` per path."""
    n = exposure.shape[1]
    t = np.arange(n + 1) * params.h
    w = default_weights(t, credit.hazard) * np.exp(-params.rate * t[:-1])
    return credit.lgd * (np.maximum(exposure, 0.0) @ w)


def cva_aad(params: ScenarioParams, credit: CreditParams | None = None, n1: int = 1_000_000, n2: int = 10_000,
            payoff: Payoff | None = None, n_buckets: int = DEFAULT_BUCKETS, chunk: int = 250_000,
            threads: int | None = None) -> CVAResult:
    credit = credit or CreditParams.from_params(params)
    payoff = payoff or Payoff.from_params(params)
    t0 = time.perf_counter()
    surf = input_sensitivity_surface(params, n1, payoff, n_buckets, chunk, threads=threads)
    t1 = time.perf_counter()
    deltas = DeltaSurface.from_surface(surf)
    expo = reconstruct_exposure(params, deltas, surf.value.value, n2)
    t2 = time.perf_counter()
    per = pathwise_cva(expo.values, params, credit)
    t3 = time.perf_counter()
    return CVAResult(mean_se(per), per,
                     {"step1": t1 - t0, "step2": t2 - t1, "step3_4": t3 - t2, "total": t3 - t0},
                     {"value": surf.value, "surface": surf, "exposure": expo, "reverse_sweeps": surf.reverse_sweeps,
                      "extrapolated_paths": expo.extrapolated, "excluded_paths": expo.excluded,
                      "n1": n1, "n2": n2, "buckets": n_buckets})


# -- nested Monte Carlo ----------------------------------------------------------------------

def inner_values(params: ScenarioParams, payoff: Payoff, k: int, spots: np.ndarray, n_inner: int,
                 path0: int = 0, seed: int | None = None):
    """Re-price from ``(t_k, spots)`` with ``n_inner`` inner paths each; returns (values, inner SE)."""
    seed = params.seed if seed is None else seed
    steps = params.steps - k
    h = params.h
    lo, hi = (-np.inf, np.inf)
    if payoff.path_dependent:
        lo, hi = payoff.barrier_lo, payoff.barrier_hi
    term, alive = K.inner_terminal(seed, NESTED_STREAM, path0, spots, np.full(spots.shape[0], steps),
                                   n_inner, params.rate * h, params.sigma, math.sqrt(h), lo, hi)
    pay = np.asarray(payoff.intrinsic(term)) * alive * math.exp(-params.rate * (params.maturity - k * h))
    return pay.mean(axis=1), pay.std(axis=1, ddof=1) / math.sqrt(n_inner)


def _outer_alive(payoff: Payoff, S: np.ndarray) -> np.ndarray:
    """Survival through each date (monitoring from step 1 on); column k covers dates 1..k."""
    alive = np.ones(S.shape)
    if payoff.path_dependent:
        run = np.ones(S.shape[0])
        for k in range(1, S.shape[1]):
            run = run * ((S[:, k] >= payoff.barrier_lo) & (S[:, k] <= payoff.barrier_hi))
            alive[:, k] = run
    return alive


def cva_nested_mc(params: ScenarioParams, credit: CreditParams | None = None, n_outer: int = 2_000,
                  n_inner: int = 2_000, payoff: Payoff | None = None, outer_seed: int | None = None) -> CVAResult:
    """Exposure by inner re-pricing at every (outer path, date); left-endpoint exposure per interval."""
    credit = credit or CreditParams.from_params(params)
    payoff = payoff or Payoff.from_params(params)
    outer_seed = params.seed + 1 if outer_seed is None else outer_seed
    t0 = time.perf_counter()
    S = simulate(params, "spot", 0, n_outer, outer_seed).X
    alive = _outer_alive(payoff, S)
    n = params.steps
    v = np.zeros((n_outer, n))
    inner_se = np.zeros((n_outer, n))
    for k in range(n):
        live = alive[:, k] > 0
        if not live.any():
            continue
        val, se = inner_values(params, payoff, k, S[live, k], n_inner, path0=k * n_outer * n_inner)
        v[live, k] = val
        inner_se[live, k] = se
    per = pathwise_cva(v, params, credit)
    t1 = time.perf_counter()
    spread = v[:, 1:].std(axis=0).mean() if n > 1 else 0.0
    return CVAResult(mean_se(per), per, {"total": t1 - t0},
                     {"exposure": v, "inner_se": inner_se, "spots": S,
                      "inner_noise_dominates": bool(inner_se.mean() > spread),
                      "n_outer": n_outer, "n_inner": n_inner})


def nested_cost_per_outer(params: ScenarioParams, n_inner: int, n_outer_sample: int = 20,
                          payoff: Payoff | None = None) -> float:
    """Wall seconds of nested exposure generation per outer path, measured on a sample."""
    t0 = time.perf_counter()
    cva_nested_mc(params, CreditParams(params.hazard, params.lgd), n_outer_sample, n_inner, payoff)
    return (time.perf_counter() - t0) / n_outer_sample


def exposure_rms_error(params: ScenarioParams, profile: ExposureProfile, n_inner: int = 20_000,
                       n_check: int = 200, dates=None) -> float:
    """Root-mean-square of reconstructed minus re-priced exposure, over the RMS of the re-priced one."""
    payoff = Payoff.from_params(params)
    n = params.steps
    dates = list(range(1, n, max(1, n // 10))) if dates is None else list(dates)
    rows = np.arange(min(n_check, profile.values.shape[0]))
    alive = _outer_alive(payoff, profile.spots[rows])
    diffs, refs = [], []
    for k in dates:
        ref, _ = inner_values(params, payoff, k, profile.spots[rows, k], n_inner, path0=(n + k) * 10 ** 8)
        ref = ref * alive[:, k]
        diffs.append(profile.values[rows, k] - ref)
        refs.append(ref)
    d = np.concatenate(diffs)
    r = np.concatenate(refs)
    return float(np.sqrt(np.mean(d * d)) / np.sqrt(np.mean(r * r)))
