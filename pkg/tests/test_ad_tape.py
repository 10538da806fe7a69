import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aadmc.ad import exp, forward_jacobian, gradient, record, reverse_jacobian, reverse_sweep
from aadmc.ad.corpus import CORPUS
from aadmc.ad.tape import PRIMAL_COST

FIG = CORPUS[0].f


def test_fig_tape_has_two_nodes():
    tape, outs = record(FIG, (2.0, 3.0, 0.0))
    assert len(tape.nodes) == 2
    assert sorted(n.op for n in tape.nodes) == ["mul", "sincos"]
    assert outs == (6.0, 0.0, 1.0)


def test_fig_reverse_seeds():
    tape, _ = record(FIG, (2.0, 3.0, 0.0))
    assert tuple(reverse_sweep(tape, (1, 0, 0))) == (3.0, 2.0, 0.0)
    assert tuple(reverse_sweep(tape, (0, 1, 0))) == (0.0, 0.0, 1.0)
    assert tuple(reverse_sweep(tape, (0, 0, 0))) == (0.0, 0.0, 0.0)


def test_identity_records_nothing():
    tape, outs = record(lambda x: (x[0],), (1.5,))
    assert len(tape.nodes) == 0 and outs == (1.5,)


def _exp_chain(n):
    def f(x):
        y = x[0]
        for _ in range(n):
            y = exp(y)
        return (y,)
    return f


def test_chain_of_exps_matches_direct_composition():
    tape, outs = record(_exp_chain(4), (-3.0,))
    want = -3.0
    for _ in range(4):
        want = math.exp(want)
    assert len(tape.nodes) == 4 and outs == (want,)
    d = want
    y = -3.0
    for _ in range(3):
        y = math.exp(y)
        d *= y
    assert reverse_sweep(tape, [1.0])[0] == pytest.approx(d, rel=1e-14)


def test_long_exp_chain_overflows_loudly():
    # iterated exp leaves binary64 within five steps from any real start
    with pytest.raises(OverflowError):
        record(_exp_chain(100), (-1.0,))


def test_seed_length_mismatch():
    tape, _ = record(FIG, (2.0, 3.0, 0.0))
    with pytest.raises(ValueError):
        reverse_sweep(tape, (1.0,))


def test_fanout_sums_branch_adjoints():
    x = 1.3
    g = gradient(lambda v: v[0] ** 2 + v[0] ** 3, [x])
    assert g[0] == pytest.approx(2 * x + 3 * x * x, rel=1e-15)
    tape, _ = record(lambda v: (v[0] ** 2, v[0] ** 3), [x])
    assert reverse_sweep(tape, (1.0, 1.0))[0] == pytest.approx(2 * x + 3 * x * x, rel=1e-15)


@pytest.mark.parametrize("entry", CORPUS, ids=lambda e: e.name)
def test_mode_equivalence(entry):
    J = forward_jacobian(entry.f, entry.x0)
    R = reverse_jacobian(record(entry.f, entry.x0)[0])
    np.testing.assert_allclose(R, J, rtol=1e-13, atol=1e-300)


@pytest.mark.parametrize("entry", CORPUS, ids=lambda e: e.name)
def test_replay_is_bit_exact(entry):
    t1, o1 = record(entry.f, entry.x0)
    t2, o2 = record(entry.f, entry.x0)
    assert o1 == o2 and t1.replay() == o1
    assert t1.dump() == t2.dump()


def test_op_count_overhead_within_five_times():
    primal = total = 0
    for e in CORPUS:
        tape, _ = record(e.f, e.x0)
        reverse_sweep(tape, [1.0] * len(tape.output_slots))
        primal += tape.primal_ops
        total += tape.primal_ops + tape.partial_ops + tape.reverse_ops
    assert total <= 5 * primal


def test_dump_format():
    tape, _ = record(FIG, (2.0, 3.0, 0.0))
    lines = sorted(ln.split()[1:3] for ln in tape.dump().splitlines())
    assert lines == [["mul", "0,1"], ["sincos", "2"]]


@given(st.lists(st.floats(0.1, 3.0), min_size=3, max_size=3))
def test_reverse_equals_forward_on_random_points(x):
    f = CORPUS[12].f  # quotient_chain
    J = forward_jacobian(f, x)
    R = reverse_jacobian(record(f, x)[0])
    np.testing.assert_allclose(R, J, rtol=1e-13)


def test_primal_cost_table_covers_all_ops():
    for e in CORPUS:
        tape, _ = record(e.f, e.x0)
        assert all(n.op in PRIMAL_COST for n in tape.nodes)
