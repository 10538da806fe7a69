"""CSV reports with a ``#`` header block that pins tool version, scenario hash, seed and host."""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

from . import __version__

COLUMNS = ("quantity", "method", "estimate", "std_error", "paths", "inner", "steps", "seed", "wall_ms", "ops")


def fmt(x) -> str:
    """Six significant digits for floats; integers and strings verbatim; None as empty."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


@dataclass
class Row:
    quantity: str
    method: str
    estimate: float
    std_error: float = 0.0
    paths: int | None = None
    inner: int | None = None
    steps: int | None = None
    seed: int | None = None
    wall_ms: float | None = None
    ops: int | None = None

    def cells(self, repro: bool):
        vals = [getattr(self, c) for c in COLUMNS]
        if repro:
            vals[COLUMNS.index("wall_ms")] = None
        return [fmt(v) for v in vals]


@dataclass
class Report:
    command: str
    scenario_hash: str
    seed: int
    repro: bool = False
    rows: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def add(self, *args, **kw) -> Row:
        r = Row(*args, **kw)
        self.rows.append(r)
        return r

    def header(self) -> list[str]:
        lines = [f"# tool=aadmc {__version__}", f"# command={self.command}",
                 f"# scenario_sha256={self.scenario_hash}", f"# seed={self.seed}",
                 f"# host_threads={os.cpu_count() or 1}", f"# repro={int(self.repro)}"]
        lines += [f"# {k}={fmt(v)}" for k, v in self.notes.items()]
        return lines

    def to_csv(self) -> str:
        buf = io.StringIO()
        for line in self.header():
            buf.write(line + "\n")
        buf.write(",".join(COLUMNS) + "\n")
        for r in self.rows:
            buf.write(",".join(r.cells(self.repro)) + "\n")
        return buf.getvalue()

    def write(self, path) -> None:
        if path in (None, "-"):
            print(self.to_csv(), end="")
            return
        with open(path, "w", newline="") as f:
            f.write(self.to_csv())


def read_rows(text: str) -> list[dict]:
    """Parse a report back into dicts (header lines skipped)."""
    body = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    cols = body[0].split(",")
    return [dict(zip(cols, ln.split(","))) for ln in body[1:]]
