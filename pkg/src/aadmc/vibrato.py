"""Vibrato first-order Greeks and their reverse-mode differentiation (VAD) for second order.

The last Euler step is replaced by its conditional Gaussian law given the
frame at step ``n-1``; the derivative then moves onto the Gaussian density
and the payoff is only evaluated.  Applying reverse AD to that estimator,
tangent recursion included, yields second derivatives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .ad import primitives as P
from .ad.dual import Dual
from .models.payoffs import Payoff
from .models.pricing import Estimate, mean_se
from .models.scenario import ScenarioParams
from .models.simulate import INNER_STREAM, PathBatch, outer_normals, tangent_coefficients
from .vector import VGraph, vforward_sweep, vreverse_sweep, output_values

DEFAULT_INNER = 16


@dataclass(frozen=True)
class VibratoConfig:
    n_paths: int = 100_000
    n_inner: int = DEFAULT_INNER
    antithetic: bool = True
    theta: str = "spot"
    chunk: int = 5_000
    max_nodes: int = 200_000

    def __post_init__(self):
        if self.n_paths < 1 or self.n_inner < 1:
            raise ValueError("path counts must be positive")


@dataclass(frozen=True)
class LastStepFrame:
    """State one step before the payoff date, per path."""

    x: np.ndarray          # X_{k-1}
    y: np.ndarray          # tangent at k-1
    alive: np.ndarray      # barrier survival up to k-1 (ones without barriers)
    t_pay: np.ndarray      # payoff time, for discounting
    path0: int = 0


def last_step_frames(batch: PathBatch, payoff: Payoff | None = None) -> LastStepFrame:
    n = batch.X.shape[1] - 1
    alive = np.ones(batch.n_paths)
    if payoff is not None and payoff.path_dependent:
        for k in range(1, n):
            alive = alive * payoff.survival(batch.X[:, k])
    return LastStepFrame(batch.X[:, n - 1].copy(), batch.Y[:, n - 1].copy(), alive,
                         np.full(batch.n_paths, batch.params.maturity), batch.path0)


def _terminal(payoff: Payoff, x, strike=None):
    v = payoff.intrinsic(x, strike)
    if payoff.path_dependent:
        v = v * payoff.survival(x)
    return v


def inner_normals(params: ScenarioParams, path0: int, n_paths: int, n_inner: int, seed=None):
    return K.normals(params.seed if seed is None else seed, INNER_STREAM, path0, n_paths, n_inner)


def _check_theta(theta):
    if theta == "maturity":
        raise ValueError("the step size depends on maturity; vibrato is not defined for theta='maturity'")


def vibrato_first_order(frames: LastStepFrame, payoff: Payoff, params: ScenarioParams,
                        config: VibratoConfig = VibratoConfig(), inner=None, per_path: bool = False):
    """``d/dtheta`` of the discounted price; returns an :class:`Estimate` (and per-path values)."""
    _check_theta(config.theta)
    x, y = frames.x, frames.y
    M = x.shape[0]
    h = params.h
    r, s = params.rate, params.sigma
    if np.any(s * x <= 0):
        raise ValueError("last-step volatility must be positive on every path")
    c = tangent_coefficients(params, config.theta)
    z = inner_normals(params, frames.path0, M, config.n_inner) if inner is None else inner
    sqh = math.sqrt(h)
    mu = (x + r * h * x)[:, None]
    vol = (s * x)[:, None]
    R = (y * (1.0 + r * h) + x * c.drift)[:, None]
    S = (y * s + x * c.diffusion)[:, None]
    vp = _terminal(payoff, mu + vol * sqh * z)
    if config.antithetic:
        vm = _terminal(payoff, mu - vol * sqh * z)
        vo = _terminal(payoff, mu)
        est = R * (vp - vm) * z / (2.0 * vol * sqh) + S * (vp - 2.0 * vo + vm) * (z * z - 1.0) / (2.0 * vol)
        level = 0.5 * (vp + vm)
    else:
        est = R * vp * z / (vol * sqh) + S * vp * (z * z - 1.0) / vol
        level = vp
    D = np.exp(-r * frames.t_pay)
    per = D * frames.alive * est.mean(axis=1)
    if config.theta == "rate":
        per = per - frames.t_pay * D * frames.alive * level.mean(axis=1)
    if config.theta == "strike":
        def dk(xx):
            return np.asarray(_terminal(payoff, xx, Dual(payoff.strike, 1.0)).tangent * np.ones_like(xx))
        if config.antithetic:
            g = 0.5 * (dk(mu + vol * sqh * z) + dk(mu - vol * sqh * z))
        else:
            g = dk(mu + vol * sqh * z)
        per = per + D * frames.alive * g.mean(axis=1)
    est_ = mean_se(per)
    return (est_, per) if per_path else est_


# -- VAD -------------------------------------------------------------------------------------

GRAPH_PARAMS = ("spot", "rate", "sigma", "strike")


def build_vad_graph(params: ScenarioParams, payoff: Payoff, theta: str = "spot", n_inner: int = DEFAULT_INNER,
                    antithetic: bool = True, frames: int | None = None, max_nodes: int = 200_000,
                    inner_value=None) -> VGraph:
    """Graph of the per-path discounted vibrato estimator ``d price / d theta``.

    Noise columns: ``0..F-2`` drive the Euler chain, ``F-1 .. F-2+n_inner``
    are the inner last-step draws, where ``F`` is the number of frames.
    With ``frames`` given, the frame index per path is the data input
    ``"frame"`` (payoff date = frame + 1), otherwise every path uses ``n-1``.
    ``inner_value(g, Kp, n_inner)`` may return a replacement for the payoff
    applied to the inner draws (a callable on inner-shaped nodes).
    """
    _check_theta(theta)
    g = VGraph()
    S0, r, s, Kp = (g.param(n) for n in GRAPH_PARAMS)
    n = params.steps
    h = params.h
    sqh = math.sqrt(h)
    c = tangent_coefficients(params, theta)
    F = n if frames is None else frames
    # r'h and sigma' are selectors; with theta a graph parameter they are constants
    x, y = S0, g.const(c.y0)
    xs, ys = [x], [y]
    rh = r * h
    vol_step = s * sqh
    for k in range(F - 1):
        w = g.random(k)
        xn = x + rh * x + (x * vol_step) * w
        yn = y + rh * y
        if c.drift:
            yn = yn + c.drift * x
        diff = y * s if not c.diffusion else y * s + c.diffusion * x
        yn = yn + (diff * sqh) * w
        x, y = xn, yn
        xs.append(x)
        ys.append(y)
        if len(g) > max_nodes:
            raise RuntimeError(f"VAD graph exceeds {max_nodes} nodes")
    if frames is None:
        xf, yf = xs[-1], ys[-1]
        t_pay = params.maturity
        disc = P.exp(-(r * t_pay))
        dprime = -t_pay * disc if theta == "rate" else None
        alive = None
        if payoff.path_dependent:
            alive = 1.0
            for xk in xs[1:]:
                alive = alive * payoff.survival(xk)
    else:
        idx = g.data("frame")
        xf = g.choose(idx, xs)
        yf = g.choose(idx, ys)
        discs = [P.exp(-(r * ((k + 1) * h))) for k in range(F)]
        disc = g.choose(idx, discs)
        dprime = g.choose(idx, [-((k + 1) * h) * d for k, d in enumerate(discs)]) if theta == "rate" else None
        alive = None
    kin = n_inner
    X = g.repeat(xf, kin)
    Y = g.repeat(yf, kin)
    Z = g.random_block(F - 1, kin)
    mu = X + rh * X
    vol = s * X
    R = Y * (1.0 + rh)
    if c.drift:
        R = R + X * c.drift
    Sg = Y * s if not c.diffusion else Y * s + X * c.diffusion
    dz = vol * sqh * Z
    value = (lambda xx: _terminal(payoff, xx, Kp)) if inner_value is None else inner_value(g, Kp, kin)
    vp = value(mu + dz)
    if antithetic:
        vm = value(mu - dz)
        vo = value(mu)
        est = R * ((vp - vm) * Z) / (2.0 * sqh * vol) + Sg * ((vp - 2.0 * vo + vm) * (Z * Z - 1.0)) / (2.0 * vol)
        level = 0.5 * (vp + vm)
    else:
        est = R * (vp * Z) / (sqh * vol) + Sg * (vp * (Z * Z - 1.0)) / vol
        level = vp
    if theta == "strike":
        # explicit strike dependence through the generalized derivative of the payoff
        def dk(xx):
            return _terminal(payoff, xx, Dual(Kp, 1.0)).tangent
        est = est + (0.5 * (dk(mu + dz) + dk(mu - dz)) if antithetic else dk(mu + dz))
    per = g.block_mean(est, kin) * disc
    if dprime is not None:
        per = per + g.block_mean(level, kin) * dprime
    if alive is not None:
        per = per * alive
    g.output(per)
    return g


@dataclass(frozen=True)
class VadResult:
    first: Estimate          # vibrato first derivative (from the forward sweep)
    second: Estimate         # d/dtheta of it by reverse AD
    cross: dict              # d/d(other graph parameter) of the first derivative
    n_paths: int
    n_inner: int


def _theta_index(theta):
    return GRAPH_PARAMS.index(theta) if theta in GRAPH_PARAMS else None


def vad_second_order(params: ScenarioParams, payoff: Payoff, config: VibratoConfig = VibratoConfig(),
                     path0: int = 0, seed: int | None = None, frame_index=None,
                     inner_value=None, data=None) -> VadResult:
    """Second derivative in ``config.theta`` by reverse AD over the vibrato program.

    Runs in chunks of paths; per-path derivatives give the standard errors.
    ``frame_index`` (per path, 0-based frame preceding the payoff date) turns
    the payoff date into a per-path stopping index.  ``data`` holds extra
    per-path arrays consumed by ``inner_value``.
    """
    theta = config.theta
    ti = _theta_index(theta)
    if ti is None:
        raise ValueError(f"second order in {theta!r} is not supported")
    M = config.n_paths
    if frame_index is not None:
        frame_index = np.asarray(frame_index, dtype=np.int64)
        F = int(frame_index.max()) + 1
    else:
        F = None
    g = build_vad_graph(params, payoff, theta, config.n_inner, config.antithetic, F, config.max_nodes, inner_value)
    ncols = (params.steps if F is None else F) - 1
    theta_vals = [params.spot, params.rate, params.sigma, params.strike]
    extra = data
    firsts, seconds = [], []
    for p0 in range(0, M, config.chunk):
        m = min(config.chunk, M - p0)
        outer = outer_normals(params, path0 + p0, m, ncols, seed)
        inner = inner_normals(params, path0 + p0, m, config.n_inner, seed)
        noise = np.hstack([outer, inner])
        data = {} if frame_index is None else {"frame": frame_index[p0:p0 + m]}
        data.update({k: np.asarray(v)[p0:p0 + m] for k, v in (extra or {}).items()})
        data = data or None
        st = vforward_sweep(g, theta_vals, noise, data)
        firsts.append(output_values(st).copy())
        seconds.append(vreverse_sweep(g, st, per_path=True).per_path)
        del st
    first = np.concatenate(firsts)
    pp = np.vstack(seconds)
    cross = {n: mean_se(pp[:, i]) for i, n in enumerate(GRAPH_PARAMS)}
    return VadResult(mean_se(first), cross[theta], cross, M, config.n_inner)
