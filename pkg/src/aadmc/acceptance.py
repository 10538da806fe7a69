"""Acceptance gate: one check per criterion, each with its stated tolerance.

Run ``python -m aadmc.acceptance`` (or ``aadmc --self-check``); every
criterion prints one PASS/FAIL line with the measured numbers.
"""
from __future__ import annotations

import io
import math
import os
import sys
import tempfile
import time
from contextlib import redirect_stdout
from dataclasses import dataclass, field

import numpy as np


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} C{self.number:<2d} {self.title}: {self.detail} [{self.seconds:.1f}s]"


def _rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.abs(a - b) / np.maximum(np.abs(b), 1e-300)


# -- 1 ------------------------------------------------------------------------------------

def criterion_1() -> CriterionResult:
    from .ad import central_gradient, forward_jacobian, record, reverse_jacobian
    from .ad.corpus import CORPUS
    t0 = time.perf_counter()
    mode, fd = 0.0, 0.0
    for e in CORPUS:
        J = forward_jacobian(e.f, e.x0)
        R = reverse_jacobian(record(e.f, e.x0)[0])
        F = np.asarray(central_gradient(e.f, e.x0, 1e-5))
        nz = np.abs(J) > 0
        mode = max(mode, float(np.max(np.where(nz, _rel(R, J), np.abs(R)))))
        fd = max(fd, float(np.max(np.abs(F - J) / (1.0 + np.abs(J)))))
    dt = time.perf_counter() - t0
    ok = len(CORPUS) >= 20 and mode <= 1e-13 and fd <= 1e-7 and dt < 1.0
    return CriterionResult(1, "AD correctness", ok,
                           f"{len(CORPUS)} functions, fwd/rev rel {mode:.1e} (<=1e-13), FD rel {fd:.1e} (<=1e-7)", dt,
                           {"mode": mode, "fd": fd})


# -- 2 ------------------------------------------------------------------------------------

def criterion_2() -> CriterionResult:
    from .ad import forward_directional, record, reverse_sweep
    from .ad.corpus import CORPUS
    fig = CORPUS[0].f
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        a, b, u = rng.uniform(-3, 3, 3)
        cb, vb, wb = rng.uniform(-2, 2, 3)
        da, db, du = rng.uniform(-2, 2, 3)
        v, w = math.sin(u), math.cos(u)
        vals, tans = forward_directional(fig, (a, b, u), (da, db, du))
        want_t = (a * db + da * b, w * du, -v * du)
        tape, outs = record(fig, (a, b, u))
        adj = reverse_sweep(tape, (cb, vb, wb))
        want_a = (b * cb, a * cb, w * vb - v * wb)
        worst = max(worst, float(np.max(np.abs(np.subtract(vals, (a * b, v, w))))),
                    float(np.max(np.abs(np.subtract(outs, (a * b, v, w))))),
                    float(np.max(np.abs(np.subtract(tans, want_t)))),
                    float(np.max(np.abs(np.subtract(adj, want_a)))))
    tape, outs = record(fig, (2.0, 3.0, 0.0))
    golden = (len(tape.nodes) == 2 and outs == (6.0, 0.0, 1.0)
              and tuple(reverse_sweep(tape, (1, 0, 0))) == (3.0, 2.0, 0.0)
              and tuple(reverse_sweep(tape, (0, 1, 0))) == (0.0, 0.0, 1.0))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-14 and bool(golden)
    return CriterionResult(2, "fig golden", ok, f"100 points, max abs deviation {worst:.1e} (<=1e-14), "
                           f"listing values at (2,3,0) {'exact' if golden else 'WRONG'}", dt)


# -- 3 ------------------------------------------------------------------------------------

def criterion_3() -> CriterionResult:
    from .models.simulate import outer_normals
    from .models.scenario import ScenarioParams
    from .vector import vforward_sweep, vreverse_sweep, vreverse_with_mean
    from .vector.examples import lognormal_payoff_graph
    t0 = time.perf_counter()
    g = lognormal_payoff_graph()
    p = ScenarioParams()
    worst, ops = 0.0, []
    for M in (1_000, 100_000):
        st = vforward_sweep(g, [40.0, 0.06, 0.2], outer_normals(p, 0, M, 1))
        plain = vreverse_sweep(g, st).sensitivities
        mean = vreverse_with_mean(g, st, "auto")
        worst = max(worst, float(np.max(_rel(mean.sensitivities, plain))))
        ops.append(mean.counters.reverse_scalar_ops)
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and ops[0] == ops[1] and dt < 10
    return CriterionResult(3, "mean-of-adjoints exactness", ok,
                           f"rel {worst:.1e} (<=1e-12), scalar reverse ops {ops[0]} vs {ops[1]} at M=1e3/1e5", dt)


# -- 4 ------------------------------------------------------------------------------------

def criterion_4() -> CriterionResult:
    from .vector import layer_schedule, tree_sum, vforward_sweep, vreverse_layered, vreverse_sweep
    from .vector.examples import fanout_graph
    from .vector.graph import ceil_log2
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    parts, ok = [], True
    for k in (2, 4, 16, 1024):
        terms = rng.standard_normal(k)
        tot, levels = tree_sum(list(terms))
        seq = math.fsum(terms)
        g, x = fanout_graph(k)
        sched = layer_schedule(g)
        st = vforward_sweep(g, [1.3], rng.standard_normal((64, 1)))
        a = vreverse_sweep(g, st).sensitivities
        b = vreverse_layered(g, st, schedule=sched, threads=2).sensitivities
        err = max(abs(tot - seq) / max(abs(seq), 1e-300), float(np.max(_rel(b, a))))
        good = sched.aggregation[x] <= ceil_log2(k) and levels <= ceil_log2(k) and err <= 1e-13
        ok &= good
        parts.append(f"k={k}: {sched.aggregation[x]} layers, rel {err:.0e}")
    return CriterionResult(4, "log-depth aggregation", ok, "; ".join(parts), time.perf_counter() - t0)


# -- 5 ------------------------------------------------------------------------------------

def criterion_5() -> CriterionResult:
    from .models.payoffs import Payoff
    from .models.pricing import bs_closed_form, malliavin_gamma, pathwise_greeks
    from .models.scenario import ScenarioParams
    from .models.simulate import simulate
    from .vibrato import VibratoConfig, vad_second_order
    t0 = time.perf_counter()
    p = ScenarioParams(spot=40, strike=40, sigma=0.2, rate=0.06, maturity=1, steps=50, paths=100_000,
                       payoff="european_call")
    payoff = Payoff.from_params(p)
    bs = bs_closed_form(p)
    pw = pathwise_greeks(p, payoff).sensitivities["spot"]
    vad = vad_second_order(p, payoff, VibratoConfig(p.paths, 16, theta="spot"))
    mg = malliavin_gamma(simulate(p), payoff)
    checks = {"pathwise delta": (pw, bs.delta), "vibrato delta": (vad.first, bs.delta),
              "VAD gamma": (vad.second, bs.gamma), "Malliavin gamma": (mg, bs.gamma)}
    parts, ok = [], True
    for name, (est, ref) in checks.items():
        z = abs(est.value - ref) / est.se
        ok &= z <= 3.0
        parts.append(f"{name} {est.value:.5f}±{est.se:.1e} vs {ref:.5f} (z={z:.2f})")
    dt = time.perf_counter() - t0
    ok &= dt < 60
    return CriterionResult(5, "European oracle suite", bool(ok), "; ".join(parts), dt)


# -- 6 ------------------------------------------------------------------------------------

def criterion_6(rows=None) -> CriterionResult:
    from .american import REFERENCE_GRID, reference_grid
    from .models.scenario import ScenarioParams
    t0 = time.perf_counter()
    base = ScenarioParams(paths=50_000, steps=50, seed=1)
    grid = reference_grid(base, REFERENCE_GRID if rows is None else rows)
    fails = []
    cells = {"price": 0, "delta": 0, "gamma": 0}
    for r in grid:
        z = r.z_scores()
        for name, zi in zip(cells, z):
            if zi <= 5.0:
                cells[name] += 1
        if not r.passes():
            fails.append(f"S={r.spot:g}/s={r.sigma:g}/T={r.maturity:g} z=({z[0]:.1f},{z[1]:.1f},{z[2]:.1f})")
    dt = time.perf_counter() - t0
    n = len(grid)
    detail = (f"cells within 5 SE: price {cells['price']}/{n}, delta {cells['delta']}/{n}, "
              f"gamma {cells['gamma']}/{n}")
    if fails:
        detail += "; failing rows: " + ", ".join(fails[:6]) + (" ..." if len(fails) > 6 else "")
    return CriterionResult(6, "American reference grid", not fails and dt < 1200, detail, dt,
                           {"rows": grid, "cells": cells})


# -- 7 ------------------------------------------------------------------------------------

def criterion_7() -> CriterionResult:
    from .ad import Dual, central_difference, central_second_difference, complex_step_derivative, forward_jacobian, ramp
    from .ad.corpus import CORPUS
    t0 = time.perf_counter()
    cs_err, fd_err = 0.0, 0.0
    for e in CORPUS:
        J = forward_jacobian(e.f, e.x0)
        for i in range(J.shape[0]):
            for j in range(J.shape[1]):
                if J[i, j] == 0:
                    continue
                g = e.scalar(i, j)
                cs_err = max(cs_err, abs(complex_step_derivative(g, e.x0[j], 1e-10) - J[i, j]) / abs(J[i, j]))
                fd_err = max(fd_err, abs(central_difference(g, e.x0[j], 1e-10) - J[i, j]) / abs(J[i, j]))
    # second derivative of (1-x)^+ on a grid around the kink
    a = 0.05
    xs = np.linspace(1 - 8 * a, 1 + 8 * a, 8001)  # +-8a holds all but ~1e-28 of the smoothed mass
    dx = xs[1] - xs[0]
    cs = np.array([complex_step_derivative(lambda t: ramp(1 - Dual(t, 1.0), a).tangent, x, 1e-10) for x in xs])
    fd = np.array([central_second_difference(lambda t: ramp(1 - t, a), x, 3.5e-6) for x in xs])
    peak = 1.0 / (a * math.sqrt(math.pi))
    cs_mass = float(np.sum((cs[1:] + cs[:-1]) * 0.5) * dx)
    fd_mass = float(np.sum(fd) * dx)
    spike_ok = (np.all(np.isfinite(cs)) and abs(cs.max() - peak) <= 1e-10 * peak and abs(xs[cs.argmax()] - 1) < dx
                and abs(cs_mass - 1.0) < 1e-3)
    fd_bad = fd.max() > 1e3 * peak and abs(fd_mass - 1.0) > 0.5
    dt = time.perf_counter() - t0
    ok = cs_err < 1e-10 and fd_err > 1e-2 and spike_ok and fd_bad
    return CriterionResult(7, "complex step vs FD", bool(ok),
                           f"complex-step max rel {cs_err:.1e} (<1e-10); central FD h=1e-10 max rel {fd_err:.1e} "
                           f"(needs >1e-2); (1-x)^+ second derivative: complex step peak {cs.max():.4f} "
                           f"mass {cs_mass:.4f}, FD h=3.5e-6 peak {fd.max():.3g} mass {fd_mass:.3g}", dt,
                           {"cs": cs_err, "fd": fd_err, "spike_ok": bool(spike_ok), "fd_bad": bool(fd_bad)})


# -- 8 ------------------------------------------------------------------------------------

def criterion_8() -> CriterionResult:
    from .bench import bench_fd_vs_aad
    from .models.scenario import ScenarioParams
    t0 = time.perf_counter()
    p = ScenarioParams(rate=0.0, steps=50)
    one = bench_fd_vs_aad(p, 1, n_paths=5000, repeats=5)
    many = bench_fd_vs_aad(p, 200, n_paths=5000, repeats=3)
    aad_ratio = many.aad.seconds / one.aad.seconds
    fd_ratio = many.fd.seconds / one.fd.seconds
    speed = many.fd.seconds / many.aad.seconds
    disc = max(one.max_rel_discrepancy, many.max_rel_discrepancy)
    dt = time.perf_counter() - t0
    ok = aad_ratio < 3 and fd_ratio > 50 and speed >= 5 and disc < 1e-3 and dt < 300
    return CriterionResult(8, "AAD cost scaling", ok,
                           f"t_AAD(200)/t_AAD(1)={aad_ratio:.2f} (<3), t_FD(200)/t_FD(1)={fd_ratio:.0f} (>50), "
                           f"FD/AAD at p=200 {speed:.0f}x (>=5), max FD-AAD rel {disc:.1e}", dt)


# -- 9 ------------------------------------------------------------------------------------

def criterion_9() -> CriterionResult:
    from . import cva
    from .models.scenario import ScenarioParams
    t0 = time.perf_counter()
    p = ScenarioParams(spot=40, strike=40, sigma=0.2, rate=0.0, maturity=1, steps=50, payoff="european_call",
                       hazard=0.02, lgd=0.6, seed=1)
    credit = cva.CreditParams(0.02, 0.6)
    aad = cva.cva_aad(p, credit, n1=1_000_000, n2=10_000)
    nested = cva.cva_nested_mc(p, credit, n_outer=2_000, n_inner=2_000)
    comb = math.hypot(aad.cva.se, nested.cva.se)
    z = abs(aad.cva.value - nested.cva.value) / comb
    per_outer = cva.nested_cost_per_outer(p, 10_000, n_outer_sample=20)
    nested_full = per_outer * 10_000
    speedup = nested_full / aad.timings["total"]
    dt = time.perf_counter() - t0
    ok = z <= 3 and speedup > 20 and dt < 900
    return CriterionResult(9, "CVA agreement and scaling", ok,
                           f"AAD {aad.cva.value:.5f}±{aad.cva.se:.1e} vs nested {nested.cva.value:.5f}"
                           f"±{nested.cva.se:.1e} (z={z:.2f}); AAD {aad.timings['total']:.1f}s vs nested 1e4x1e4 "
                           f"{nested_full:.0f}s (scaled from 20 outer paths) -> {speedup:.0f}x (>20)", dt,
                           {"aad": aad, "nested": nested, "speedup": speedup})


# -- 10 -----------------------------------------------------------------------------------

def _cli_bytes(argv) -> bytes:
    from .cli import main
    with tempfile.TemporaryDirectory() as d:
        out = os.path.join(d, "r.csv")
        with redirect_stdout(io.StringIO()):
            code = main(list(argv) + ["--output", out])
        if code != 0:
            raise RuntimeError(f"cli exited {code}")
        with open(out, "rb") as f:
            return f.read()


def criterion_10() -> CriterionResult:
    from . import cva
    from .ad import dirac, gradient
    from .models.scenario import ScenarioParams
    from .models.simulate import simulate
    from .vector import vforward_sweep, vreverse_sweep
    from .vector.examples import fanout_graph
    t0 = time.perf_counter()
    parts, ok = [], True

    # fanout-addition on the tape and on the vector graph
    x = 1.7
    g = gradient(lambda v: v[0] ** 2 + v[0] ** 3, [x])[0]
    fg, _ = fanout_graph(5)
    w = np.random.default_rng(10).standard_normal((50, 1))
    s = vreverse_sweep(fg, vforward_sweep(fg, [2.0], w)).sensitivities[0]
    want = float(np.mean(w[:, 0])) * sum(1.0 + 0.001 * i for i in range(5))
    fan = abs(g - (2 * x + 3 * x * x)) <= 1e-14 * abs(g) and abs(s - want) <= 1e-12 * max(abs(want), 1)
    ok &= fan
    parts.append(f"fanout {'ok' if fan else 'BAD'}")

    # tangent process against bumped paths
    p = ScenarioParams(paths=2000, steps=50)
    worst = 0.0
    for theta in ("spot", "rate", "sigma", "maturity"):
        b = simulate(p, theta)
        base = getattr(p, theta)
        eps = 1e-6 * abs(base)
        up = simulate(p.replace(**{theta: base + eps}), theta).X
        dn = simulate(p.replace(**{theta: base - eps}), theta).X
        fd = (up - dn) / (2 * eps)
        scale = np.maximum(np.abs(b.Y).max(axis=1, keepdims=True), 1e-12)
        worst = max(worst, float(np.max(np.abs(fd - b.Y) / scale)))
    ok &= worst <= 1e-6
    parts.append(f"tangent vs bump rel {worst:.1e} (<=1e-6)")

    # martingale property of reconstructed exposures
    cp = ScenarioParams(rate=0.0, steps=50, seed=7)
    surf = cva.input_sensitivity_surface(cp, 400_000)
    expo = cva.reconstruct_exposure(cp, cva.DeltaSurface.from_surface(surf), surf.value.value, 10_000)
    m = expo.values.mean(axis=0)
    se = expo.values.std(axis=0, ddof=1) / math.sqrt(expo.values.shape[0])
    z = np.abs(m[1:] - surf.value.value) / np.hypot(se[1:], surf.value.se)
    mart = float(z.max()) <= 3.0
    ok &= mart
    parts.append(f"martingale max z {z.max():.2f} (<=3)")

    # unit mass of the smoothed Dirac
    a = 0.05
    xs = np.arange(-800, 801) * (a / 100)
    ys = np.asarray(dirac(xs, a))
    mass = float(np.sum((ys[1:] + ys[:-1]) * 0.5) * (a / 100))
    ok &= abs(mass - 1) <= 1e-6
    parts.append(f"dirac mass {mass:.9f}")

    # byte-identical reports across thread counts in repro mode
    with tempfile.TemporaryDirectory() as d:
        scen = os.path.join(d, "s.txt")
        with open(scen, "w") as f:
            f.write("payoff = european_call\nrate = 0\nsteps = 20\npaths = 20000\nseed = 3\n")
        r1 = _cli_bytes(["cva", "--scenario", scen, "--n1", "50000", "--n2", "2000", "--repro", "--threads", "1"])
        r4 = _cli_bytes(["cva", "--scenario", scen, "--n1", "50000", "--n2", "2000", "--repro", "--threads", "4"])
        g1 = _cli_bytes(["greeks", "--method", "pathwise", "--scenario", scen, "--repro", "--threads", "1"])
        g2 = _cli_bytes(["greeks", "--method", "pathwise", "--scenario", scen, "--repro", "--threads", "3"])
    same = r1 == r4 and g1 == g2
    ok &= same
    parts.append(f"repro reports {'identical' if same else 'DIFFER'}")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    return CriterionResult(10, "invariant suite", bool(ok), "; ".join(parts), dt)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10)


def run_all(selected=None, stream=sys.stdout) -> bool:
    ok = True
    for i, fn in enumerate(CRITERIA, 1):
        if selected and i not in selected:
            continue
        try:
            res = fn()
        except Exception as e:  # a crash is a failure with its reason on the line
            res = CriterionResult(i, fn.__name__, False, f"raised {type(e).__name__}: {e}")
        print(res.line(), file=stream, flush=True)
        ok &= res.passed
    return ok


if __name__ == "__main__":
    sel = {int(a) for a in sys.argv[1:]}
    sys.exit(0 if run_all(sel or None) else 1)
