"""Command-line front end.

Exit codes: 0 ok, 2 scenario error, 3 numerical error, 4 self-check failure.
"""
from __future__ import annotations

import argparse
import sys
import time
import traceback

import numpy as np

from .ad.primitives import DomainError, NonSmoothError
from .american import RegressionError, american_greeks_vad, reference_grid
from .models.payoffs import Payoff
from .models.pricing import bs_closed_form, malliavin_gamma, mean_se, pathwise_greeks, price_mc
from .models.scenario import ScenarioError, ScenarioParams, load_scenario
from .models.simulate import simulate
from .report import Report
from .vector.graph import GraphContractError
from .vibrato import VibratoConfig, last_step_frames, vad_second_order, vibrato_first_order

EXIT_OK, EXIT_SCENARIO, EXIT_NUMERICAL, EXIT_SELF_CHECK = 0, 2, 3, 4
NUMERICAL_ERRORS = (DomainError, NonSmoothError, RegressionError, GraphContractError, FloatingPointError,
                    ArithmeticError, ValueError)


class _Clock:
    def __init__(self):
        self.t = time.perf_counter()

    def ms(self) -> float:
        now = time.perf_counter()
        out, self.t = (now - self.t) * 1e3, now
        return out


def _scenario(args) -> ScenarioParams:
    p = load_scenario(args.scenario) if args.scenario else ScenarioParams()
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.paths is not None:
        kw["paths"] = args.paths
    return p.replace(**kw) if kw else p


def _report(args, p: ScenarioParams, command: str) -> Report:
    return Report(command, p.digest(), p.seed, args.repro)


def cmd_price(args, p: ScenarioParams) -> Report:
    rep = _report(args, p, "price")
    payoff = Payoff.from_params(p)
    if payoff.kind == "american_put":
        from .american import longstaff_schwartz, apply_policy
        c = _Clock()
        fit = longstaff_schwartz(simulate(p), payoff)
        est = apply_policy(simulate(p.replace(seed=p.seed + 1)), payoff, fit.policy).price
        rep.add("price", "lsm_two_pass", est.value, est.se, est.n_paths, None, p.steps, p.seed, c.ms())
        return rep
    c = _Clock()
    if p.sigma == 0 and not payoff.path_dependent:
        fwd = p.spot * np.exp(p.rate * p.maturity)
        val = float(np.exp(-p.rate * p.maturity) * payoff.intrinsic(np.array([fwd]))[0])
        rep.add("price", "deterministic", val, 0.0, None, None, None, None, c.ms())
        return rep
    est = price_mc(simulate(p), payoff)
    rep.add("price", "mc", est.value, est.se, est.n_paths, None, p.steps, p.seed, c.ms())
    if payoff.kind in ("european_call", "european_put"):
        bs = bs_closed_form(p)
        rep.add("price", "closed_form", bs.price, 0.0, None, None, None, None, c.ms())
    return rep


def cmd_greeks(args, p: ScenarioParams) -> Report:
    payoff = Payoff.from_params(p)
    if payoff.kind == "american_put":
        return cmd_american(args, p, "greeks")
    rep = _report(args, p, f"greeks:{args.method}")
    c = _Clock()
    if args.method == "pathwise":
        g = pathwise_greeks(p, payoff)
        ms = c.ms()
        rep.add("price", "pathwise", g.price.value, g.price.se, p.paths, None, p.steps, p.seed, ms)
        for name, q in (("spot", "delta"), ("rate", "rho"), ("sigma", "vega"), ("strike", "dstrike")):
            e = g.sensitivities[name]
            rep.add(q, "pathwise", e.value, e.se, p.paths, None, p.steps, p.seed, None)
    elif args.method == "vibrato":
        batch = simulate(p)
        frames = last_step_frames(batch, payoff)
        for theta, q in (("spot", "delta"), ("rate", "rho"), ("sigma", "vega"), ("strike", "dstrike")):
            b = simulate(p, theta) if theta != "spot" else batch
            cfg = VibratoConfig(p.paths, args.inner, theta=theta)
            e = vibrato_first_order(last_step_frames(b, payoff) if theta != "spot" else frames, payoff, p, cfg)
            rep.add(q, "vibrato", e.value, e.se, p.paths, args.inner, p.steps, p.seed, c.ms())
    elif args.method == "vad":
        r = vad_second_order(p, payoff, VibratoConfig(p.paths, args.inner, theta="spot"))
        ms = c.ms()
        rep.add("delta", "vibrato", r.first.value, r.first.se, p.paths, args.inner, p.steps, p.seed, ms)
        rep.add("gamma", "vad", r.second.value, r.second.se, p.paths, args.inner, p.steps, p.seed, None)
        for name, q in (("rate", "d2_spot_rate"), ("sigma", "vanna"), ("strike", "d2_spot_strike")):
            e = r.cross[name]
            rep.add(q, "vad", e.value, e.se, p.paths, args.inner, p.steps, p.seed, None)
    elif args.method == "malliavin":
        e = malliavin_gamma(simulate(p), payoff)
        rep.add("gamma", "malliavin", e.value, e.se, p.paths, None, p.steps, p.seed, c.ms())
    if payoff.kind in ("european_call", "european_put"):
        bs = bs_closed_form(p)
        for q, v in (("price", bs.price), ("delta", bs.delta), ("gamma", bs.gamma), ("vega", bs.vega)):
            rep.add(q, "closed_form", v, 0.0)
    return rep


def cmd_american(args, p: ScenarioParams, command: str = "american") -> Report:
    if getattr(args, "table1", False):
        return cmd_table1(args, p)
    p = p.replace(payoff="american_put")
    rep = _report(args, p, command)
    c = _Clock()
    g = american_greeks_vad(p, n_inner=args.inner)
    ms = c.ms()
    rep.add("price", "lsm_two_pass", g.price.value, g.price.se, p.paths, None, p.steps, p.seed, ms)
    rep.add("delta", "pathwise_frozen_exercise", g.delta.value, g.delta.se, p.paths, None, p.steps, p.seed)
    if g.delta_vibrato is not None:
        rep.add("delta", "vibrato_frozen_exercise", g.delta_vibrato.value, g.delta_vibrato.se, p.paths, args.inner,
                p.steps, p.seed)
    rep.add("gamma", "vad_frozen_exercise", g.gamma.value, g.gamma.se, p.paths, args.inner, p.steps, p.seed)
    rep.add("fit_price", "lsm_in_sample", g.fit_price.value, g.fit_price.se, p.paths, None, p.steps, p.seed)
    rep.notes["immediate_exercise_paths"] = g.excluded
    return rep


def cmd_table1(args, p: ScenarioParams) -> Report:
    base = p.replace(payoff="american_put")
    if args.paths is None and not args.scenario:
        base = base.replace(paths=50_000)
    rep = _report(args, base, "table1")
    ok = 0
    for row in reference_grid(base, n_inner=args.inner):
        tag = f"S={row.spot:g};sigma={row.sigma:g};T={row.maturity:g}"
        zp, zd, zg = row.z_scores()
        ok += row.passes()
        for q, est, ref, z in (("price", row.price, row.ref[3], zp), ("abs_delta", row.delta, row.ref[5], zd),
                               ("gamma", row.gamma, row.ref[8], zg)):
            rep.add(f"{q}[{tag}]", "measured", est.value, est.se, base.paths, args.inner, base.steps, base.seed)
            rep.add(f"{q}[{tag}]", "reference", ref, 0.0)
            rep.add(f"{q}[{tag}]", "z_score", float(z), 0.0)
    rep.notes["rows_within_5se"] = ok
    return rep


def cmd_cva(args, p: ScenarioParams) -> Report:
    from . import cva
    rep = _report(args, p, f"cva:{args.method}")
    credit = cva.CreditParams.from_params(p)
    if args.method == "aad":
        n1 = args.n1 or 1_000_000
        n2 = args.n2 or 10_000
        r = cva.cva_aad(p, credit, n1, n2, threads=args.threads)
        t = r.timings
        rep.add("cva", "aad", r.cva.value, r.cva.se, n2, None, p.steps, p.seed, t["total"] * 1e3)
        v = r.details["value"]
        rep.add("value", "aad_step1", v.value, v.se, n1, None, p.steps, p.seed, t["step1"] * 1e3,
                r.details["reverse_sweeps"])
        ex = mean_se(r.details["exposure"].values[:, -1])
        rep.add("exposure_last_date", "aad_step2", ex.value, ex.se, n2, None, p.steps, p.seed + 1, t["step2"] * 1e3)
        rep.notes.update(n1=n1, n2=n2, buckets=r.details["buckets"], bucket_grid="equal_probability_lognormal",
                         extrapolated_paths=r.details["extrapolated_paths"],
                         excluded_paths=r.details["excluded_paths"])
    else:
        n_outer = args.outer or 2_000
        n_inner = args.nested_inner or 2_000
        r = cva.cva_nested_mc(p, credit, n_outer, n_inner)
        rep.add("cva", "nested", r.cva.value, r.cva.se, n_outer, n_inner, p.steps, p.seed, r.timings["total"] * 1e3)
        rep.notes.update(inner_noise_dominates=r.details["inner_noise_dominates"])
    rep.notes.update(hazard=credit.hazard, lgd=credit.lgd)
    return rep


def cmd_bench(args, p: ScenarioParams) -> Report:
    from .bench import bench_fd_vs_aad
    rep = _report(args, p, "bench")
    r = bench_fd_vs_aad(p, args.params, n_paths=args.bench_paths)
    for row in (r.fd, r.aad):
        rep.add(f"wall_seconds[p={row.n_params}]", row.method, row.seconds, 0.0, args.bench_paths, None, p.steps,
                p.seed, row.seconds * 1e3, row.forward_ops + row.reverse_ops)
    rep.notes.update(aad_over_fd=r.ratio, max_rel_discrepancy=r.max_rel_discrepancy)
    return rep


COMMANDS = {"price": cmd_price, "greeks": cmd_greeks, "american": cmd_american, "table1": cmd_table1,
            "cva": cmd_cva, "bench": cmd_bench}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aadmc", description=__doc__.splitlines()[0])
    ap.add_argument("--self-check", action="store_true", help="run the acceptance suite and exit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="key = value scenario file")
    common.add_argument("--output", "-o", default="-", help="CSV path, '-' for stdout")
    common.add_argument("--seed", type=int)
    common.add_argument("--paths", type=int, help="override the scenario path count")
    common.add_argument("--repro", action="store_true", help="omit wall times for byte-stable reports")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--inner", type=int, default=16, help="inner draws of the vibrato last step")
    sub = ap.add_subparsers(dest="command")
    sub.add_parser("price", parents=[common])
    g = sub.add_parser("greeks", parents=[common])
    g.add_argument("--method", choices=("pathwise", "vibrato", "vad", "malliavin"), default="vad")
    a = sub.add_parser("american", parents=[common])
    a.add_argument("--table1", action="store_true", help="run the 20-row reference grid")
    sub.add_parser("table1", parents=[common])
    c = sub.add_parser("cva", parents=[common])
    c.add_argument("--method", choices=("aad", "nested"), default="aad")
    c.add_argument("--n1", type=int, help="step-1 paths (aad)")
    c.add_argument("--n2", type=int, help="exposure paths (aad)")
    c.add_argument("--outer", type=int, help="outer paths (nested)")
    c.add_argument("--nested-inner", type=int, help="inner re-pricing paths (nested)")
    b = sub.add_parser("bench", parents=[common])
    b.add_argument("--params", type=int, default=200)
    b.add_argument("--bench-paths", type=int, default=5000)
    return ap


def _origin(exc: BaseException) -> str:
    tb = traceback.extract_tb(exc.__traceback__)
    for fr in reversed(tb):
        if "aadmc" in fr.filename:
            mod = fr.filename.split("aadmc", 1)[1].strip("/\\").replace("/", ".").removesuffix(".py")
            return mod or "aadmc"
    return "aadmc"


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.self_check:
        from .acceptance import run_all
        return EXIT_OK if run_all() else EXIT_SELF_CHECK
    if not args.command:
        ap.print_help()
        return EXIT_SCENARIO
    try:
        p = _scenario(args)
    except ScenarioError as e:
        print(f"error: scenario: {e}", file=sys.stderr)
        return EXIT_SCENARIO
    try:
        rep = COMMANDS[args.command](args, p)
        bad = [r.quantity for r in rep.rows if not np.isfinite(r.estimate)]
        if bad:
            raise FloatingPointError(f"non-finite estimate for {', '.join(bad)}")
    except ScenarioError as e:
        print(f"error: scenario: {e}", file=sys.stderr)
        return EXIT_SCENARIO
    except NUMERICAL_ERRORS as e:
        print(f"error: numerical: {_origin(e)}: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    rep.write(args.output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
