"""Longstaff-Schwartz American pricing with frozen-exercise VAD Greeks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ad import primitives as P
from .models.payoffs import Payoff
from .models.pricing import Estimate, mean_se
from .models.scenario import ScenarioParams
from .models.simulate import PathBatch, simulate
from .vibrato import VibratoConfig, vad_second_order


class RegressionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class RegressionBasis:
    """Monomials ``(x/scale)^i``, ``i = 0..size-1``."""

    size: int = 3
    scale: float = 1.0

    def design(self, x: np.ndarray) -> np.ndarray:
        u = np.asarray(x, dtype=float) / self.scale
        return np.vander(u, self.size, increasing=True)


@dataclass
class ExercisePolicy:
    coefficients: np.ndarray      # (n+1, I); NaN rows never exercise
    basis: RegressionBasis
    exercise_now: bool = False    # exercising at t=0 beats continuation

    def continuation(self, k: int, x: np.ndarray) -> np.ndarray:
        return self.basis.design(x) @ self.coefficients[k]

    def stopping_index(self, X: np.ndarray, payoff: Payoff) -> np.ndarray:
        """First date ``k in 1..n-1`` with positive intrinsic at least the fitted continuation, else ``n``."""
        M, n1 = X.shape
        n = n1 - 1
        tau = np.full(M, n, dtype=np.int64)
        open_ = np.ones(M, dtype=bool)
        for k in range(1, n):
            if np.isnan(self.coefficients[k, 0]):
                continue
            ex = np.asarray(payoff.intrinsic(X[:, k]))
            stop = open_ & (ex > 0) & (ex >= self.continuation(k, X[:, k]))
            tau[stop] = k
            open_ &= ~stop
        return tau


@dataclass
class LSMResult:
    price: Estimate
    policy: ExercisePolicy
    tau: np.ndarray
    cashflows: np.ndarray       # discounted, per path


def _fit(design, y, k):
    q, r = np.linalg.qr(design)
    d = np.abs(np.diag(r))
    if d.size < design.shape[1] or d.min() <= 1e-12 * max(d.max(), 1.0):
        raise RegressionError(f"rank-deficient continuation regression at date {k}")
    return np.linalg.solve(r, q.T @ y)


def longstaff_schwartz(batch: PathBatch, payoff: Payoff, basis: RegressionBasis | None = None) -> LSMResult:
    """Backward induction on in-the-money paths with realized cash flows."""
    p = batch.params
    basis = basis or RegressionBasis(3, payoff.strike)
    X = batch.X
    M, n1 = X.shape
    n = n1 - 1
    h, r = p.h, p.rate
    coef = np.full((n + 1, basis.size), np.nan)
    cf = np.asarray(payoff.intrinsic(X[:, n]), dtype=float).copy()
    tau = np.full(M, n, dtype=np.int64)
    for k in range(n - 1, 0, -1):
        ex = np.asarray(payoff.intrinsic(X[:, k]))
        itm = ex > 0
        if not itm.any():
            continue
        y = cf[itm] * np.exp(-r * h * (tau[itm] - k))
        a = _fit(basis.design(X[itm, k]), y, k)
        coef[k] = a
        cont = basis.design(X[itm, k]) @ a
        stop = ex[itm] >= cont
        idx = np.flatnonzero(itm)[stop]
        cf[idx] = ex[idx]
        tau[idx] = k
    disc = cf * np.exp(-r * h * tau)
    policy = ExercisePolicy(coef, basis)
    est = mean_se(disc)
    now = float(payoff.intrinsic(np.array([p.spot]))[0])
    if now > est.value:
        policy.exercise_now = True
        est = Estimate(now, 0.0, M)
    return LSMResult(est, policy, tau, disc)


def apply_policy(batch: PathBatch, payoff: Payoff, policy: ExercisePolicy) -> LSMResult:
    """Price a batch with a policy fitted elsewhere (no foresight)."""
    p = batch.params
    if policy.exercise_now:
        now = float(payoff.intrinsic(np.array([p.spot]))[0])
        return LSMResult(Estimate(now, 0.0, batch.n_paths), policy, np.zeros(batch.n_paths, np.int64),
                         np.full(batch.n_paths, now))
    tau = policy.stopping_index(batch.X, payoff)
    ex = np.asarray(payoff.intrinsic(batch.X[np.arange(batch.n_paths), tau]))
    disc = ex * np.exp(-p.rate * p.h * tau)
    return LSMResult(mean_se(disc), policy, tau, disc)


def threshold_violations(batch: PathBatch, payoff: Payoff, policy: ExercisePolicy) -> float:
    """Fraction of in-the-money decisions that break the put's exercise-below-a-threshold shape."""
    X = batch.X
    n = X.shape[1] - 1
    bad = tot = 0
    for k in range(1, n):
        if np.isnan(policy.coefficients[k, 0]):
            continue
        x = X[:, k]
        ex = np.asarray(payoff.intrinsic(x))
        itm = ex > 0
        if not itm.any():
            continue
        stop = ex[itm] >= policy.continuation(k, x[itm])
        xi = x[itm]
        if stop.any():
            b = xi[stop].max()
            bad += int(np.sum(~stop & (xi < b)))
        tot += int(itm.sum())
    return bad / tot if tot else 0.0


@dataclass
class AmericanGreeks:
    price: Estimate
    delta: Estimate              # pathwise, stopping index frozen
    gamma: Estimate              # reverse AD of the vibrato delta at the frame before exercise
    excluded: int
    fit_price: Estimate
    tau: np.ndarray = field(repr=False)
    delta_vibrato: Estimate | None = None


def policy_inner_value(policy: ExercisePolicy, payoff: Payoff, tau: np.ndarray, n: int):
    """Inner-draw valuation ``max(phi, C_tau)`` for paths stopped before maturity, ``phi`` at maturity.

    Returns ``(inner_value, data)`` for :func:`vad_second_order`.
    """
    on = (tau < n).astype(float)
    coef = np.nan_to_num(policy.coefficients[np.minimum(tau, n)]) * on[:, None]
    size, scale = policy.basis.size, policy.basis.scale
    data = {f"lsm_c{i}": coef[:, i] for i in range(size)}
    data["lsm_on"] = on

    def inner_value(g, Kp, kin):
        cs = [g.repeat(g.data(f"lsm_c{i}"), kin) for i in range(size)]
        live = g.repeat(g.data("lsm_on"), kin)

        def value(x):
            phi = payoff.intrinsic(x, Kp)
            u = x * (1.0 / scale)
            cont, power = cs[0], None
            for c in cs[1:]:
                power = u if power is None else power * u
                cont = cont + c * power
            return phi + live * P.ramp(cont - phi)
        return value
    return inner_value, data


def american_greeks_vad(params: ScenarioParams, payoff: Payoff | None = None, basis: RegressionBasis | None = None,
                        n_inner: int = 16, antithetic: bool = True, chunk: int = 5_000,
                        force_european: bool = False, inner: str = "policy") -> AmericanGreeks:
    """Two-pass protocol: fit the policy on seed ``s``, price and differentiate on seed ``s+1``.

    The stopping index is frozen per path.  Delta is the pathwise derivative
    of the discounted exercise value.  Gamma differentiates, by reverse AD,
    the vibrato delta taken over the step into the exercise date; with
    ``inner="policy"`` the inner draws are valued by the fitted exercise rule
    ``max(phi, C)`` at that date, with ``inner="payoff"`` by ``phi`` alone.
    """
    if inner not in ("policy", "payoff"):
        raise ValueError(f"unknown inner valuation {inner!r}")
    payoff = payoff or Payoff.from_params(params, "american_put")
    fit = longstaff_schwartz(simulate(params, seed=params.seed), payoff, basis)
    eval_params = params.replace(seed=params.seed + 1)
    batch = simulate(eval_params)
    n = params.steps
    if force_european:
        tau = np.full(batch.n_paths, n, dtype=np.int64)
        priced = Estimate(*_european_cash(batch, payoff))
    elif fit.policy.exercise_now:
        now = fit.price
        return AmericanGreeks(now, Estimate(-1.0 if payoff.is_put else 1.0, 0.0, 0), Estimate(0.0, 0.0, 0),
                              batch.n_paths, fit.price, np.zeros(batch.n_paths, np.int64))
    else:
        res = apply_policy(batch, payoff, fit.policy)
        tau, priced = res.tau, res.price
    rows = np.arange(batch.n_paths)
    xt, yt = batch.X[rows, tau], batch.Y[rows, tau]
    slope = np.asarray(P.heaviside(payoff.strike - xt) if payoff.is_put else P.heaviside(xt - payoff.strike))
    delta = mean_se((-slope if payoff.is_put else slope) * yt * np.exp(-params.rate * params.h * tau))
    del batch
    cfg = VibratoConfig(n_paths=params.paths, n_inner=n_inner, antithetic=antithetic, theta="spot", chunk=chunk)
    iv, data = (None, None)
    if inner == "policy" and not force_european:
        iv, data = policy_inner_value(fit.policy, payoff, tau, n)
    vad = vad_second_order(eval_params, payoff, cfg, frame_index=tau - 1, inner_value=iv, data=data)
    return AmericanGreeks(priced, delta, vad.second, int(np.sum(tau == 0)), fit.price, tau, vad.first)


def _european_cash(batch, payoff):
    p = batch.params
    est = mean_se(np.asarray(payoff.intrinsic(batch.X[:, -1])) * math.exp(-p.rate * p.maturity))
    return est.value, est.se, est.n_paths


def policy_refit_shift(params: ScenarioParams, bump: float = 0.01, payoff: Payoff | None = None):
    """Central-difference delta with the policy frozen versus refitted at the bumped spots.

    Returns ``(delta_frozen, delta_refit, shift)``; common random numbers throughout.
    """
    payoff = payoff or Payoff.from_params(params, "american_put")
    base_policy = longstaff_schwartz(simulate(params), payoff).policy
    ev = params.replace(seed=params.seed + 1)
    out = {}
    for sgn in (1, -1):
        pb = params.replace(spot=params.spot + sgn * bump)
        eb = ev.replace(spot=params.spot + sgn * bump)
        frozen = apply_policy(simulate(eb), payoff, base_policy).price.value
        refit_policy = longstaff_schwartz(simulate(pb), payoff).policy
        refit = apply_policy(simulate(eb), payoff, refit_policy).price.value
        out[sgn] = (frozen, refit)
    d_frozen = (out[1][0] - out[-1][0]) / (2 * bump)
    d_refit = (out[1][1] - out[-1][1]) / (2 * bump)
    return d_frozen, d_refit, d_refit - d_frozen


# Reference grid for the American put, with the delta and VAD gamma it should reproduce:
# (S, sigma, T, price, price_se, |delta|, delta_se, gamma_pde, gamma_vad, gamma_se)
REFERENCE_GRID = (
    (36, 0.2, 1, 4.46289, 0.013, 0.68123, 1.820e-3, 0.08732, 0.06745, 6.947e-5),
    (36, 0.2, 2, 4.81523, 0.016, 0.59934, 1.813e-3, 0.07381, 0.06398, 6.846e-5),
    (36, 0.4, 1, 7.07985, 0.016, 0.51187, 1.674e-3, 0.03305, 0.03546, 4.852e-5),
    (36, 0.4, 2, 8.45612, 0.024, 0.44102, 1.488e-3, 0.02510, 0.02591, 5.023e-5),
    (38, 0.2, 1, 3.23324, 0.013, 0.53063, 1.821e-3, 0.07349, 0.07219, 1.198e-4),
    (38, 0.2, 2, 3.72705, 0.015, 0.46732, 1.669e-3, 0.05907, 0.05789, 1.111e-4),
    (38, 0.4, 1, 6.11209, 0.016, 0.45079, 1.453e-3, 0.02989, 0.03081, 5.465e-5),
    (38, 0.4, 2, 7.61031, 0.025, 0.39503, 1.922e-3, 0.02233, 0.02342, 4.827e-5),
    (40, 0.2, 1, 2.30565, 0.012, 0.40780, 1.880e-3, 0.06014, 0.05954, 1.213e-4),
    (40, 0.2, 2, 2.86072, 0.014, 0.39266, 1.747e-3, 0.04717, 0.04567, 5.175e-4),
    (40, 0.4, 1, 5.28741, 0.015, 0.39485, 1.629e-3, 0.02689, 0.02798, 1.249e-5),
    (40, 0.4, 2, 6.85873, 0.026, 0.35446, 1.416e-3, 0.01987, 0.02050, 3.989e-5),
    (42, 0.2, 1, 1.60788, 0.011, 0.29712, 1.734e-3, 0.04764, 0.04563, 4.797e-5),
    (42, 0.2, 2, 2.19079, 0.014, 0.28175, 1.601e-3, 0.03749, 0.03601, 5.560e-5),
    (42, 0.4, 1, 4.57191, 0.015, 0.34385, 1.517e-3, 0.02391, 0.02426, 3.194e-5),
    (42, 0.4, 2, 6.18424, 0.023, 0.29943, 1.347e-3, 0.01768, 0.01748, 2.961e-5),
    (44, 0.2, 1, 1.09648, 0.009, 0.20571, 1.503e-3, 0.03653, 0.03438, 1.486e-4),
    (44, 0.2, 2, 1.66903, 0.012, 0.21972, 1.487e-3, 0.02960, 0.02765, 2.363e-4),
    (44, 0.4, 1, 3.90838, 0.015, 0.29764, 1.403e-3, 0.02116, 0.02086, 1.274e-4),
    (44, 0.4, 2, 5.58252, 0.028, 0.28447, 1.325e-3, 0.01574, 0.01520, 2.162e-4),
)


@dataclass(frozen=True)
class GridRow:
    spot: float
    sigma: float
    maturity: float
    price: Estimate
    delta: Estimate        # magnitude of the put delta
    gamma: Estimate
    ref: tuple

    def z_scores(self):
        """``|measured - reference| / sqrt(2) max(se_ref, se_measured)`` for price, delta, gamma."""
        r = self.ref
        out = []
        for est, val, se in ((self.price, r[3], r[4]), (self.delta, r[5], r[6]), (self.gamma, r[8], r[9])):
            s = max(se, est.se)
            out.append(abs(est.value - val) / (math.sqrt(2.0) * s))
        return tuple(out)

    def passes(self, k: float = 5.0) -> bool:
        return all(z <= k for z in self.z_scores())


def grid_row(ref, base: ScenarioParams | None = None, n_inner: int = 16) -> GridRow:
    S, sig, T = ref[:3]
    base = base or ScenarioParams(paths=50_000, steps=50, seed=1)
    p = base.replace(spot=float(S), sigma=float(sig), maturity=float(T), strike=40.0, rate=0.06, payoff="american_put")
    g = american_greeks_vad(p, n_inner=n_inner)
    delta = Estimate(-g.delta.value, g.delta.se, g.delta.n_paths)
    return GridRow(float(S), float(sig), float(T), g.price, delta, g.gamma, ref)


def reference_grid(base: ScenarioParams | None = None, rows=None, n_inner: int = 16):
    rows = REFERENCE_GRID if rows is None else rows
    return [grid_row(r, base, n_inner) for r in rows]
