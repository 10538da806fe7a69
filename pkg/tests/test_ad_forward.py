import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aadmc.ad import (DomainError, Dual, NonSmoothError, central_gradient, derivative, exp, forward_directional,
                      forward_jacobian, log, sin, sqrt)
from aadmc.ad.corpus import CORPUS

FIG = CORPUS[0].f


def test_fig_tangent_along_a():
    vals, tans = forward_directional(FIG, (2.0, 3.0, 0.0), (1.0, 0.0, 0.0))
    assert vals == (6.0, 0.0, 1.0)
    assert tans == (3.0, 0.0, -0.0) or tans == (3.0, 0.0, 0.0)


def test_fig_tangent_along_u():
    _, tans = forward_directional(FIG, (2.0, 3.0, 0.0), (0.0, 0.0, 1.0))
    assert tuple(abs(t) for t in tans) == (0.0, 1.0, 0.0)


def test_constant_output_has_zero_tangent():
    _, tans = forward_directional(lambda x: (5.0,), (1.0, 2.0), (1.0, 1.0))
    assert tans == (0.0,)


def test_fig_jacobian():
    J = forward_jacobian(FIG, (2.0, 3.0, 0.0))
    np.testing.assert_array_equal(np.abs(J), [[3, 2, 0], [0, 0, 1], [0, 0, 0]])


def test_identity_jacobian():
    np.testing.assert_array_equal(forward_jacobian(lambda x: tuple(x), (1.0, 2.0, 3.0)), np.eye(3))


@pytest.mark.parametrize("entry", CORPUS, ids=lambda e: e.name)
def test_forward_jacobian_matches_central_differences(entry):
    J = forward_jacobian(entry.f, entry.x0)
    F = np.asarray(central_gradient(entry.f, entry.x0, 1e-5))
    assert np.max(np.abs(J - F) / (1 + np.abs(J))) < 1e-8


def test_domain_errors_are_explicit():
    with pytest.raises(DomainError):
        log(Dual(0.0, 1.0))
    with pytest.raises(DomainError):
        sqrt(Dual(-1.0, 1.0))
    with pytest.raises(DomainError):
        Dual(1.0, 1.0) / Dual(0.0, 0.0)


def test_comparisons_on_duals_are_rejected():
    with pytest.raises(NonSmoothError):
        _ = Dual(1.0, 1.0) > 0


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_product_rule(a, b, c, d):
    p = Dual(a, b) * Dual(c, d)
    assert p.value == a * c
    assert p.tangent == pytest.approx(a * d + b * c, abs=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_zero_tangent_input_does_not_leak(x, y):
    f = lambda v: (exp(v[0]) * sin(v[1]) + v[1] * v[1],)
    _, t = forward_directional(f, (x, y), (0.0, 1.0))
    want = math.exp(x) * math.cos(y) + 2 * y
    assert t[0] == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_scalar_derivative():
    assert derivative(lambda x: x ** 3, 2.0) == pytest.approx(12.0, rel=1e-15)
