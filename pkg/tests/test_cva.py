import math

import numpy as np
import pytest
from scipy.stats import norm

from aadmc import cva
from aadmc.models.payoffs import Payoff
from aadmc.models.pricing import bs_closed_form
from aadmc.models.scenario import ScenarioParams
from aadmc.models.simulate import outer_normals
from aadmc.vector import output_values, vforward_sweep, vreverse_with_mean

CALL = ScenarioParams(spot=40, strike=40, sigma=0.2, rate=0.0, maturity=1, steps=50,
                      payoff="european_call", hazard=0.02, lgd=0.6, seed=1)


@pytest.fixture(scope="module")
def surface():
    return cva.input_sensitivity_surface(CALL, 100_000, chunk=50_000)


@pytest.fixture(scope="module")
def big_surface():
    return cva.input_sensitivity_surface(CALL.replace(seed=5), 400_000)


# -- credit inputs --------------------------------------------------------------------------

def test_default_weights_sum_to_default_probability():
    t = np.linspace(0, 2, 41)
    w = cva.default_weights(t, 0.3)
    assert np.all(w > 0)
    assert w.sum() == pytest.approx(1 - math.exp(-0.6), rel=1e-14)


def test_credit_params_validation():
    with pytest.raises(ValueError):
        cva.CreditParams(-0.1, 0.5)
    with pytest.raises(ValueError):
        cva.CreditParams(0.1, 1.5)
    assert cva.CreditParams(0.1, 0.4).default_probability(0.0) == 0.0


def test_bucket_edges_are_marginal_quantiles():
    e = cva.bucket_edges(CALL, 25, n_buckets=4)
    t = 25 * CALL.h
    probs = norm.cdf((np.log(e / CALL.spot) + 0.5 * CALL.sigma ** 2 * t) / (CALL.sigma * math.sqrt(t)))
    assert probs == pytest.approx([0.25, 0.5, 0.75], abs=1e-12)


# -- zero limits ----------------------------------------------------------------------------

@pytest.mark.parametrize("hazard,lgd", [(0.0, 0.6), (0.02, 0.0)])
def test_zero_hazard_or_lgd_gives_zero(hazard, lgd):
    credit = cva.CreditParams(hazard, lgd)
    aad = cva.cva_aad(CALL, credit, n1=20_000, n2=2_000)
    nested = cva.cva_nested_mc(CALL.replace(steps=10), credit, n_outer=50, n_inner=50)
    assert aad.cva.value == 0.0
    assert nested.cva.value == 0.0
    assert np.all(aad.per_path == 0.0)


# -- nested Monte Carlo ---------------------------------------------------------------------

def _martingale_cva(params, credit):
    """Zero-rate nonnegative martingale exposure: every interval sees E[v^+] = V0."""
    v0 = bs_closed_form(params).price
    return credit.lgd * (1 - math.exp(-credit.hazard * params.maturity)) * v0


def test_nested_matches_martingale_identity():
    credit = cva.CreditParams(0.02, 0.6)
    res = cva.cva_nested_mc(CALL, credit, n_outer=400, n_inner=400)
    want = _martingale_cva(CALL, credit)
    assert abs(res.cva.value - want) <= 3 * res.cva.se


@pytest.mark.slow
def test_nested_matches_martingale_identity_full_size():
    credit = cva.CreditParams(0.02, 0.6)
    res = cva.cva_nested_mc(CALL, credit, n_outer=2_000, n_inner=2_000)
    want = _martingale_cva(CALL, credit)
    assert abs(res.cva.value - want) <= 3 * res.cva.se


def test_nested_inner_values_zero_vol_exact():
    p = CALL.replace(sigma=1e-300, rate=0.05, steps=10, strike=30)
    pay = Payoff.from_params(p)
    spots = np.array([40.0, 45.0])
    v, se = cva.inner_values(p, pay, 4, spots, 8)
    fwd = spots * (1 + p.rate * p.h) ** 6
    assert v == pytest.approx((fwd - 30) * math.exp(-p.rate * 6 * p.h), rel=1e-12)
    assert np.all(se == 0)


# -- step 1: input sensitivities ------------------------------------------------------------

def _chunked_sensitivities(params, cells, bump, n_paths, chunk):
    """Per-chunk AAD sensitivities and per-path central FD differences on the same normals."""
    pay = Payoff.from_params(params)
    sg = cva.build_financing_graph(params, pay)
    g = sg.graph
    base = np.zeros(len(g.params))
    aad, fd = [], []
    for p0 in range(0, n_paths, chunk):
        z = outer_normals(params, p0, chunk, params.steps)
        st = vforward_sweep(g, base, z)
        aad.append(vreverse_with_mean(g, st, "auto").sensitivities[cells])
        cols = []
        for c in cells:
            up, dn = base.copy(), base.copy()
            up[c] += bump
            dn[c] -= bump
            vu = output_values(vforward_sweep(g, up, z))
            vd = output_values(vforward_sweep(g, dn, z))
            cols.append((vu - vd) / (2 * bump))
        fd.append(np.column_stack(cols))
    return np.array(aad), np.vstack(fd), sg


def test_surface_matches_bumped_cells():
    rng = np.random.default_rng(2024)
    n_paths, chunk = 100_000, 10_000
    s0 = cva.input_sensitivity_surface(CALL, 20_000)
    k = rng.integers(1, CALL.steps, size=5)
    j = rng.integers(0, 40, size=5)
    cells = k * 40 + j
    assert np.all(s0.counts[k, j] > 0)
    aad, fd, _ = _chunked_sensitivities(CALL, cells, 1e-3, n_paths, chunk)
    a_mean = aad.mean(axis=0)
    a_se = aad.std(axis=0, ddof=1) / math.sqrt(aad.shape[0])
    f_mean = fd.mean(axis=0)
    f_se = fd.std(axis=0, ddof=1) / math.sqrt(fd.shape[0])
    assert np.all(np.abs(a_mean - f_mean) <= 3 * np.hypot(a_se, f_se))


def test_surface_equals_chunk_average(surface):
    cells = np.array([10 * 40 + 20, 30 * 40 + 5])
    aad, _, _ = _chunked_sensitivities(CALL, cells, 1e-3, 100_000, 50_000)
    assert surface.dv_dphi.ravel()[cells] == pytest.approx(aad.mean(axis=0), rel=1e-12, abs=1e-18)


def test_uncrossed_cell_has_zero_sensitivity():
    s = cva.input_sensitivity_surface(CALL.replace(sigma=1e-8), 1_000, n_buckets=8)
    empty = s.counts == 0
    assert empty.any()
    assert np.all(s.dv_dphi[empty] == 0.0)
    assert np.all(np.isnan(s.cell_delta()[empty]))
    k, jj = np.argwhere(empty)[0]
    with pytest.raises(ValueError, match="no occupancy"):
        cva.hedging_sensitivity(s, int(k), int(jj))


def test_cells_sum_to_uniform_shift():
    """Sum of a date's cells against one parameter shared by that whole date."""
    k = 20
    n_paths, chunk = 100_000, 20_000
    pay = Payoff.from_params(CALL)
    shared = cva.build_financing_graph(CALL, pay, cell_map=lambda kk, j: 1 if kk == k else 0)
    s = cva.input_sensitivity_surface(CALL, n_paths, chunk=chunk)
    g = shared.graph
    fd = []
    for p0 in range(0, n_paths, chunk):
        z = outer_normals(CALL, p0, chunk, CALL.steps)
        vu = output_values(vforward_sweep(g, [0.0, 1e-3], z))
        vd = output_values(vforward_sweep(g, [0.0, -1e-3], z))
        fd.append((vu - vd) / 2e-3)
    fd = np.concatenate(fd)
    total = s.dv_dphi[k].sum()
    assert abs(total - fd.mean()) <= 3 * fd.std(ddof=1) / math.sqrt(n_paths)


def test_one_reverse_sweep_per_chunk():
    s = cva.input_sensitivity_surface(CALL, 30_000, chunk=10_000)
    assert s.reverse_sweeps == 3
    assert s.n_paths == 30_000


def test_layered_sweep_matches_mean_sweep():
    a = cva.input_sensitivity_surface(CALL.replace(steps=10), 5_000)
    b = cva.input_sensitivity_surface(CALL.replace(steps=10), 5_000, threads=3)
    assert np.allclose(a.dv_dphi, b.dv_dphi, rtol=1e-12, atol=1e-18)


# -- step 2: hedging sensitivities ----------------------------------------------------------

def _bs_call_delta(params, t, s):
    tau = params.maturity - t
    d1 = (np.log(s / params.strike) + (params.rate + 0.5 * params.sigma ** 2) * tau) / (params.sigma * np.sqrt(tau))
    return norm.cdf(d1)


def _cell_average_delta(params, k, n_buckets=40, n_nodes=400):
    """Closed-form delta at ``t_k`` averaged over each equal-probability bucket, spot-weighted.

    This is the conditional expectation the cell delta estimates, so it does
    not carry the within-bucket curvature error of a point evaluation.
    """
    t = k * params.h
    sd = params.sigma * math.sqrt(t)
    out = np.empty(n_buckets)
    for j in range(n_buckets):
        q = (j + (np.arange(n_nodes) + 0.5) / n_nodes) / n_buckets
        x = params.spot * np.exp((params.rate - 0.5 * params.sigma ** 2) * t + sd * norm.ppf(q))
        out[j] = np.sum(_bs_call_delta(params, t, x) * x) / np.sum(x)
    return out


def test_cell_delta_near_black_scholes(big_surface):
    # below 0.1 the relative error is dominated by Monte Carlo noise at this path count
    s = big_surface
    d = s.cell_delta()
    checked = 0
    for k in range(1, CALL.steps - 1):
        ref = _cell_average_delta(CALL, k)
        sel = (s.counts[k] >= 500) & (ref > 0.1)
        rel = np.abs(d[k][sel] - ref[sel]) / ref[sel]
        assert rel.max() < 0.10, k
        checked += sel.sum()
    assert checked > 1000


@pytest.mark.parametrize("k", [25, 40])
def test_deep_otm_delta_decays(big_surface, k):
    d = big_surface.cell_delta()[k]
    low = d[big_surface.counts[k] >= 500][:8]
    assert np.all(np.diff(low) >= 0) and low[-1] > low[0]
    ref = _cell_average_delta(CALL, k)
    assert low[0] < ref[7] / 4
    assert abs(low[0]) < 0.02


def test_doubling_occupancy_halves_delta(surface):
    import dataclasses
    twice = dataclasses.replace(surface, f_s=surface.f_s * 2)
    a, b = surface.cell_delta(), twice.cell_delta()
    ok = surface.available
    assert np.array_equal(b[ok], a[ok] / 2)


def test_delta_surface_lookup(surface):
    ds = cva.DeltaSurface.from_surface(surface)
    k = 10
    xs, ys = ds.spots[k], ds.deltas[k]
    got, out = ds.at_date(k, xs)
    assert np.array_equal(got, ys)
    assert not out.any()
    _, out = ds.at_date(k, np.array([xs[0] - 1, xs[-1] + 1]))
    assert out.all()
    mid = 0.5 * (ds.times[k] + ds.times[k + 1])
    both = 0.5 * (ds.at_date(k, 41.0)[0] + ds.at_date(k + 1, 41.0)[0])
    assert ds(mid, 41.0) == pytest.approx(both, rel=1e-12)


# -- exposure reconstruction ----------------------------------------------------------------

@pytest.mark.parametrize("rate", [0.0, 0.04])
def test_zero_vol_exposure_is_deterministic(rate):
    p = CALL.replace(sigma=1e-9, rate=rate, steps=10, strike=30)
    s = cva.input_sensitivity_surface(p, 200, n_buckets=4)
    expo = cva.reconstruct_exposure(p, cva.DeltaSurface.from_surface(s), s.value.value, 50)
    k = np.arange(p.steps)
    t = k * p.h
    fwd = p.spot * (1 + p.rate * p.h) ** p.steps
    direct = (fwd - p.strike) * math.exp(-p.rate * p.maturity) * np.exp(p.rate * t)
    # the hedge accrues at the continuous rate while the Euler spot compounds per step
    drift_gap = p.spot * np.abs((1 + p.rate * p.h) ** k - np.exp(p.rate * t))
    noise = 10 * p.sigma * p.spot
    assert np.all(np.abs(expo.values - direct) <= drift_gap + noise)


def test_exposure_is_martingale(surface):
    expo = cva.reconstruct_exposure(CALL, cva.DeltaSurface.from_surface(surface), surface.value.value, 10_000)
    v = expo.values
    m = v.mean(axis=0)
    se = v.std(axis=0, ddof=1) / math.sqrt(v.shape[0])
    z = np.abs(m[1:] - surface.value.value) / np.hypot(se[1:], surface.value.se)
    assert z.max() <= 3.0
    assert np.all(v[:, 0] == surface.value.value)


def test_exclusion_of_extrapolated_paths(surface):
    ds = cva.DeltaSurface.from_surface(surface)
    full = cva.reconstruct_exposure(CALL, ds, surface.value.value, 3_000)
    cut = cva.reconstruct_exposure(CALL, ds, surface.value.value, 3_000, exclude_extrapolated=True)
    assert cut.excluded == full.extrapolated
    assert cut.values.shape[0] == 3_000 - cut.excluded


@pytest.mark.slow
def test_exposure_matches_repricing():
    s = cva.input_sensitivity_surface(CALL, 1_000_000)
    expo = cva.reconstruct_exposure(CALL, cva.DeltaSurface.from_surface(s), s.value.value, 10_000)
    assert cva.exposure_rms_error(CALL, expo, n_inner=20_000, n_check=200) < 0.05


# -- pathwise CVA ---------------------------------------------------------------------------

def test_pathwise_cva_formula():
    p = CALL.replace(steps=4, rate=0.03)
    credit = cva.CreditParams(0.1, 0.5)
    v = np.array([[1.0, -2.0, 3.0, 0.5]])
    t = np.arange(5) * p.h
    w = (np.exp(-0.1 * t[:-1]) - np.exp(-0.1 * t[1:])) * np.exp(-0.03 * t[:-1])
    want = 0.5 * (1.0 * w[0] + 3.0 * w[2] + 0.5 * w[3])
    assert cva.pathwise_cva(v, p, credit)[0] == pytest.approx(want, rel=1e-14)


def test_high_hazard_limit():
    credit = cva.CreditParams(50.0, 0.6)
    res = cva.cva_aad(CALL, credit, n1=100_000, n2=5_000)
    v0 = res.details["value"].value
    assert abs(res.cva.value - 0.6 * v0) <= 0.02 * 0.6 * v0


def test_aad_agrees_with_nested():
    credit = cva.CreditParams(0.02, 0.6)
    aad = cva.cva_aad(CALL, credit, n1=200_000, n2=5_000)
    nested = cva.cva_nested_mc(CALL, credit, n_outer=400, n_inner=400)
    assert abs(aad.cva.value - nested.cva.value) <= 3 * math.hypot(aad.cva.se, nested.cva.se)
    assert aad.details["reverse_sweeps"] == 1
    assert set(aad.timings) == {"step1", "step2", "step3_4", "total"}


def test_put_aad_agrees_with_nested():
    p = CALL.replace(payoff="european_put", rate=0.03)
    credit = cva.CreditParams(0.05, 0.6)
    aad = cva.cva_aad(p, credit, n1=200_000, n2=5_000)
    nested = cva.cva_nested_mc(p, credit, n_outer=400, n_inner=400)
    assert abs(aad.cva.value - nested.cva.value) <= 3 * math.hypot(aad.cva.se, nested.cva.se)
