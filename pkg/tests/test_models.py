import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aadmc.models.payoffs import Payoff
from aadmc.models.pricing import (bs_closed_form, discounted_payoffs, malliavin_gamma, mean_se, pathwise_greeks,
                                  price_mc)
from aadmc.models.scenario import ScenarioError, ScenarioParams, load_scenario, parse_scenario_text
from aadmc.models.simulate import iter_batches, simulate, tangent_coefficients

BASE = ScenarioParams(spot=40, rate=0.06, sigma=0.2, strike=40, maturity=1, steps=50, paths=20_000, seed=1)


def test_zero_vol_paths_are_deterministic():
    p = BASE.replace(sigma=0.0, paths=5)
    b = simulate(p)
    want = 40.0 * (1 + 0.06 * p.h) ** np.arange(51)
    np.testing.assert_allclose(b.X, np.broadcast_to(want, b.X.shape), rtol=1e-14)


def test_spot_tangent_is_ratio():
    b = simulate(BASE.replace(paths=100))
    np.testing.assert_allclose(b.Y, b.X / 40.0, rtol=1e-14)
    assert np.all(b.X[:, 0] == 40.0) and np.all(b.Y[:, 0] == 1.0)


def test_euler_mean():
    p = BASE.replace(paths=1_000_000, steps=10)
    xs = np.concatenate([b.X[:, -1] for b in iter_batches(p, chunk=200_000)])
    est = mean_se(xs)
    assert abs(est.value - 40.0 * (1 + 0.06 * p.h) ** 10) <= 3 * est.se


@pytest.mark.parametrize("theta", ["spot", "rate", "sigma", "maturity"])
def test_tangent_matches_bumped_paths(theta):
    p = BASE.replace(paths=200, steps=20)
    b = simulate(p, theta)
    x0 = getattr(p, theta)
    eps = 1e-6 * x0
    up = simulate(p.replace(**{theta: x0 + eps})).X
    dn = simulate(p.replace(**{theta: x0 - eps})).X
    fd = (up - dn) / (2 * eps)
    roundoff = 4 * np.finfo(float).eps * np.abs(b.X).max() / (2 * eps)
    np.testing.assert_allclose(b.Y[:, 1:], fd[:, 1:], rtol=1e-6, atol=roundoff)


def test_strike_tangent_is_zero():
    assert tangent_coefficients(BASE, "strike").y0 == 0.0
    with pytest.raises(ValueError):
        tangent_coefficients(BASE, "vol")


def test_simulation_is_reproducible_and_extends():
    a = simulate(BASE.replace(paths=300))
    b = simulate(BASE.replace(paths=300))
    c = simulate(BASE.replace(paths=500))
    assert a.X.tobytes() == b.X.tobytes()
    np.testing.assert_array_equal(c.X[:300], a.X)
    d = simulate(BASE, path0=120, n_paths=10)
    np.testing.assert_array_equal(d.X, a.X[120:130])


def test_european_put_against_closed_form():
    p = BASE.replace(spot=36, paths=100_000, payoff="european_put")
    est = price_mc(simulate(p), Payoff.from_params(p))
    assert abs(est.value - bs_closed_form(p).price) <= 3 * est.se


def test_zero_vol_put_is_exact():
    p = BASE.replace(spot=36, sigma=0.0, paths=10, payoff="european_put")
    est = price_mc(simulate(p), Payoff.from_params(p))
    xt = 36 * (1 + 0.06 * p.h) ** 50
    assert est.value == pytest.approx(math.exp(-0.06) * (40 - xt), rel=1e-14)
    assert est.se == 0.0


def test_double_barrier_price_falls_as_corridor_narrows():
    prices = []
    for lo, hi in ((25, 60), (30, 55), (34, 50)):
        p = BASE.replace(paths=50_000, payoff="double_barrier_call", barrier_lo=lo, barrier_hi=hi, smoothing_a=0.5)
        prices.append(price_mc(simulate(p), Payoff.from_params(p)).value)
    assert prices[0] > prices[1] > prices[2] > 0


def test_parity_and_gamma_symmetry():
    for s, T in ((36, 1), (44, 2), (40, 0.25)):
        p = BASE.replace(spot=s, maturity=T)
        c, q = bs_closed_form(p, "european_call"), bs_closed_form(p, "european_put")
        assert abs(c.price - q.price - (s - 40 * math.exp(-0.06 * T))) < 1e-12
        assert abs(c.gamma - q.gamma) < 1e-12


def test_short_maturity_put_tends_to_intrinsic():
    p = BASE.replace(spot=36, maturity=1e-8)
    assert bs_closed_form(p, "european_put").price == pytest.approx(4.0, abs=1e-6)


def test_malliavin_gamma_against_closed_form():
    p = BASE.replace(paths=1_000_000, steps=50)
    pay = Payoff.from_params(p)
    ests = [malliavin_gamma(b, pay, p) for b in iter_batches(p, chunk=100_000)]
    v = np.mean([e.value for e in ests])
    se = math.sqrt(sum(e.se ** 2 for e in ests)) / len(ests)
    assert abs(v - bs_closed_form(p).gamma) <= 3 * se


def test_malliavin_weight_has_mean_zero():
    p = BASE.replace(paths=200_000, steps=5)
    b = simulate(p)
    # a constant payoff c gives c times the weight mean
    W = math.sqrt(p.h) * b.Z.sum(axis=1)
    weight = (W * W / (p.sigma * p.maturity) - W - 1.0 / p.sigma)
    est = mean_se(weight)
    assert abs(est.value) <= 3 * est.se
    with pytest.raises(ValueError):
        malliavin_gamma(b, Payoff.from_params(p), p.replace(sigma=0.0))


def test_pathwise_greeks_against_closed_form():
    p = BASE.replace(paths=100_000)
    g = pathwise_greeks(p, scheme="exact")
    bs = bs_closed_form(p)
    for name, want in (("spot", bs.delta), ("sigma", bs.vega)):
        est = g.sensitivities[name]
        assert abs(est.value - want) <= 3 * est.se, name
    assert abs(g.price.value - bs.price) <= 3 * g.price.se


def test_pathwise_delta_euler_put():
    p = BASE.replace(paths=100_000, payoff="european_put", spot=38)
    g = pathwise_greeks(p)
    est = g.sensitivities["spot"]
    assert abs(est.value - bs_closed_form(p).delta) <= 3 * est.se + 2e-3  # Euler bias budget at n=50


def test_payoff_values():
    pay = Payoff("european_put", 40.0)
    assert pay.intrinsic(35.0) == 5.0 and pay.intrinsic(45.0) == 0.0
    bar = Payoff("double_barrier_call", 40.0, 30.0, 55.0, 1e-9)
    assert bar.value([40.0, 50.0, 45.0]) == 5.0
    assert bar.value([40.0, 60.0, 45.0]) == 0.0


# -- scenario files ------------------------------------------------------------------------

def test_scenario_round_trip(tmp_path):
    p = BASE.replace(payoff="double_barrier_call", barrier_lo=30.0, barrier_hi=55.0)
    f = tmp_path / "s.txt"
    f.write_text(p.to_text())
    assert load_scenario(f) == p
    assert load_scenario(f).digest() == p.digest()


@pytest.mark.parametrize("text, where", [
    ("spot = 40\nvolatility = 0.2\n", ":2:volatility"),
    ("spot = -1\n", ":1:spot"),
    ("spot = 40\nspot = 41\n", ":2:spot"),
    ("steps = ten\n", ":1:steps"),
    ("payoff = asian\n", ":1:payoff"),
    ("barrier_lo = 50\nbarrier_hi = 40\n", ":1:barrier_lo"),
    ("just text\n", ":1:-"),
])
def test_scenario_errors_name_the_line(text, where):
    with pytest.raises(ScenarioError) as e:
        parse_scenario_text(text, "f.txt")
    assert str(e.value).startswith("f.txt" + where)


def test_missing_scenario_file(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "nope.txt")


def test_bundled_scenarios_parse():
    import pathlib
    for f in sorted(pathlib.Path(__file__).parent.parent.joinpath("scenarios").glob("*.txt")):
        load_scenario(f)


def test_batch_csv_export(tmp_path):
    b = simulate(BASE.replace(paths=3, steps=2))
    f = tmp_path / "b.csv"
    b.to_csv(f)
    lines = f.read_text().splitlines()
    assert lines[0] == "path,step,x,y,z" and len(lines) == 1 + 3 * 3


@settings(max_examples=20)
@given(st.floats(5, 200), st.floats(0.01, 1.0), st.floats(0.05, 3))
def test_closed_form_delta_bounds(s, sig, T):
    p = BASE.replace(spot=s, sigma=sig, maturity=T)
    c = bs_closed_form(p, "european_call")
    assert 0 <= c.delta <= 1 and c.gamma >= 0 and c.price >= max(s - 40 * math.exp(-0.06 * T), 0) - 1e-9
