"""Scenario parameters and the ``key = value`` scenario file format."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass
from pathlib import Path

PAYOFF_KINDS = ("european_call", "european_put", "double_barrier_call", "american_put")
THETAS = ("spot", "rate", "sigma", "strike", "maturity")


class ScenarioError(ValueError):
    """Invalid scenario; the message starts with ``file:line:key`` when parsed from a file."""


@dataclass(frozen=True)
class ScenarioParams:
    spot: float = 40.0
    rate: float = 0.06
    sigma: float = 0.2
    strike: float = 40.0
    maturity: float = 1.0
    steps: int = 50
    paths: int = 100_000
    seed: int = 1
    payoff: str = "european_call"
    barrier_lo: float | None = None
    barrier_hi: float | None = None
    hazard: float = 0.02
    lgd: float = 0.6
    smoothing_a: float | None = None
    groups: int = 10

    def __post_init__(self):
        problems = []
        if not self.spot > 0:
            problems.append(("spot", "must be positive"))
        if not self.sigma >= 0:
            problems.append(("sigma", "must be non-negative"))
        if not self.maturity > 0:
            problems.append(("maturity", "must be positive"))
        if self.steps < 1:
            problems.append(("steps", "must be at least 1"))
        if self.paths < 1:
            problems.append(("paths", "must be at least 1"))
        if self.payoff not in PAYOFF_KINDS:
            problems.append(("payoff", f"must be one of {', '.join(PAYOFF_KINDS)}"))
        if self.barrier_lo is not None and self.barrier_hi is not None and not self.barrier_lo < self.barrier_hi:
            problems.append(("barrier_lo", "must be below barrier_hi"))
        if self.payoff == "double_barrier_call" and (self.barrier_lo is None or self.barrier_hi is None):
            problems.append(("payoff", "double_barrier_call needs barrier_lo and barrier_hi"))
        if self.hazard < 0:
            problems.append(("hazard", "must be non-negative"))
        if not 0 <= self.lgd <= 1:
            problems.append(("lgd", "must lie in [0, 1]"))
        if self.smoothing_a is not None and not self.smoothing_a > 0:
            problems.append(("smoothing_a", "must be positive"))
        if self.groups < 2:
            problems.append(("groups", "must be at least 2"))
        if problems:
            key, msg = problems[0]
            raise ScenarioError(f"<params>:0:{key}: {msg}")

    @property
    def h(self) -> float:
        return self.maturity / self.steps

    @property
    def smoothing(self) -> float:
        """Dirac width; defaults to 5% of the strike."""
        return self.smoothing_a if self.smoothing_a is not None else 0.05 * abs(self.strike)

    def replace(self, **kw) -> "ScenarioParams":
        return dataclasses.replace(self, **kw)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is not None:
                if f.name not in _INT_KEYS | _STR_KEYS:
                    v = repr(float(v))
                lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioParams)}
_INT_KEYS = {"steps", "paths", "seed", "groups"}
_STR_KEYS = {"payoff"}


def _convert(key, raw):
    if key in _STR_KEYS:
        return raw
    if key in _INT_KEYS:
        return int(raw, 0)
    if raw.lower() in ("none", ""):
        return None
    return float(raw)


def parse_scenario_text(text: str, source: str = "<string>") -> ScenarioParams:
    values = {}
    lineno = {}
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ScenarioError(f"{source}:{n}:-: expected 'key = value'")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in _FIELDS:
            raise ScenarioError(f"{source}:{n}:{key}: unknown key")
        if key in values:
            raise ScenarioError(f"{source}:{n}:{key}: duplicate key")
        try:
            values[key] = _convert(key, raw)
        except ValueError:
            raise ScenarioError(f"{source}:{n}:{key}: cannot parse {raw!r}") from None
        lineno[key] = n
    try:
        return ScenarioParams(**values)
    except ScenarioError as e:
        key = str(e).split(":")[2]
        raise ScenarioError(f"{source}:{lineno.get(key, 0)}:{str(e).split(':', 2)[2]}") from None


def load_scenario(path) -> ScenarioParams:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"{path}:0:-: {e.strerror}") from None
    return parse_scenario_text(text, str(path))
