import math
import subprocess
import sys

import pytest

from aadmc import acceptance, cli
from aadmc.models.pricing import bs_closed_form
from aadmc.models.scenario import load_scenario
from aadmc.report import COLUMNS, read_rows

SCEN = "scenarios"


def run(argv, tmp_path, capsys=None):
    out = tmp_path / "r.csv"
    code = cli.main(list(argv) + ["--output", str(out)])
    text = out.read_text() if out.exists() else ""
    return code, text


def rows_by(text, quantity=None, method=None):
    return [r for r in read_rows(text)
            if (quantity is None or r["quantity"] == quantity) and (method is None or r["method"] == method)]


def test_price_zero_vol_put_is_exact(tmp_path):
    code, text = run(["price", "--scenario", f"{SCEN}/put_zero_vol.txt"], tmp_path)
    assert code == 0
    (row,) = rows_by(text, "price", "deterministic")
    want = math.exp(-0.06) * (40 - 36 * math.exp(0.06))
    assert float(row["estimate"]) == pytest.approx(want, rel=1e-5)
    assert row["std_error"] == "0"


def test_header_block(tmp_path):
    code, text = run(["price", "--scenario", f"{SCEN}/european_call.txt", "--paths", "2000"], tmp_path)
    assert code == 0
    lines = text.splitlines()
    head = [ln for ln in lines if ln.startswith("#")]
    keys = {ln[2:].split("=", 1)[0] for ln in head}
    assert {"tool", "command", "scenario_sha256", "seed", "host_threads", "repro"} <= keys
    p = load_scenario(f"{SCEN}/european_call.txt").replace(paths=2000)
    assert f"# scenario_sha256={p.digest()}" in head
    assert lines[len(head)] == ",".join(COLUMNS)


def test_price_mc_near_closed_form(tmp_path):
    code, text = run(["price", "--scenario", f"{SCEN}/european_call.txt", "--paths", "20000"], tmp_path)
    assert code == 0
    mc = rows_by(text, "price", "mc")[0]
    ref = bs_closed_form(load_scenario(f"{SCEN}/european_call.txt")).price
    assert float(mc["std_error"]) > 0
    assert abs(float(mc["estimate"]) - ref) <= 3 * float(mc["std_error"]) + 0.02


@pytest.mark.parametrize("method,quantities", [
    ("pathwise", {"price", "delta", "rho", "vega", "dstrike"}),
    ("vibrato", {"delta", "rho", "vega", "dstrike"}),
    ("vad", {"delta", "gamma", "d2_spot_rate", "vanna", "d2_spot_strike"}),
    ("malliavin", {"gamma"}),
])
def test_greeks_methods(tmp_path, method, quantities):
    code, text = run(["greeks", "--method", method, "--scenario", f"{SCEN}/european_call.txt", "--paths", "4000",
                      "--inner", "4"], tmp_path)
    assert code == 0
    got = rows_by(text, method=None)
    stochastic = [r for r in got if r["method"] != "closed_form"]
    assert {r["quantity"] for r in stochastic} == quantities
    assert all(float(r["std_error"]) > 0 for r in stochastic)
    assert all(r["std_error"] == "0" for r in got if r["method"] == "closed_form")


def test_greeks_on_american_scenario_reports_frozen_exercise_rows(tmp_path):
    code, text = run(["greeks", "--method", "vad", "--scenario", f"{SCEN}/american_put.txt", "--paths", "4000",
                      "--inner", "4"], tmp_path)
    assert code == 0
    rows = read_rows(text)
    methods = {(r["quantity"], r["method"]) for r in rows}
    assert ("gamma", "vad_frozen_exercise") in methods
    assert ("delta", "pathwise_frozen_exercise") in methods
    gamma = rows_by(text, "gamma")[0]
    assert float(gamma["estimate"]) > 0 and float(gamma["std_error"]) > 0


def test_cva_both_methods(tmp_path):
    code, text = run(["cva", "--scenario", f"{SCEN}/cva_call.txt", "--n1", "20000", "--n2", "2000"], tmp_path)
    assert code == 0
    assert rows_by(text, "cva", "aad")
    assert "# n1=20000" in text
    code, text = run(["cva", "--method", "nested", "--scenario", f"{SCEN}/cva_call.txt", "--outer", "40",
                      "--nested-inner", "50", "--seed", "3"], tmp_path)
    assert code == 0
    (row,) = rows_by(text, "cva", "nested")
    assert row["paths"] == "40" and row["inner"] == "50" and row["seed"] == "3"


def test_bench_rows(tmp_path):
    code, text = run(["bench", "--scenario", f"{SCEN}/cva_call.txt", "--params", "200", "--bench-paths", "2000"],
                     tmp_path)
    assert code == 0
    rows = read_rows(text)
    assert [r["method"] for r in rows] == ["fd", "aad"]
    fd, aad = (float(r["estimate"]) for r in rows)
    assert aad / fd < 0.2


def test_repro_is_byte_identical(tmp_path):
    argv = ["greeks", "--method", "pathwise", "--scenario", f"{SCEN}/european_call.txt", "--paths", "3000", "--repro"]
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert cli.main(argv + ["--output", str(a)]) == 0
    assert cli.main(argv + ["--threads", "2", "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert all(r["wall_ms"] == "" for r in read_rows(a.read_text()))


def test_scenario_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("spot = 40\nvolatility = 0.2\n")
    code, _ = run(["price", "--scenario", str(bad)], tmp_path)
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("error: scenario:")
    assert f"{bad}:2" in err and "volatility" in err


def test_missing_subcommand_exit_code(capsys):
    assert cli.main([]) == 2


def test_numerical_error_exit_code(tmp_path, capsys):
    scen = tmp_path / "flat.txt"
    scen.write_text("payoff = american_put\nspot = 36\nsigma = 0\nsteps = 50\npaths = 2000\n")
    code, text = run(["american", "--scenario", str(scen)], tmp_path)
    assert code == 3
    assert text == ""
    err = capsys.readouterr().err
    assert err.startswith("error: numerical: american:")


def test_self_check_failure_exit_code(monkeypatch):
    monkeypatch.setattr(acceptance, "run_all", lambda *a, **k: False)
    assert cli.main(["--self-check"]) == 4
    monkeypatch.setattr(acceptance, "run_all", lambda *a, **k: True)
    assert cli.main(["--self-check"]) == 0


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    res = subprocess.run([sys.executable, "-m", "aadmc", "price", "--scenario", f"{SCEN}/put_zero_vol.txt",
                          "--output", str(out)], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert rows_by(out.read_text(), "price")
