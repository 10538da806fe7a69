"""Payoffs written with ``ramp``/``heaviside`` so every evaluation mode can differentiate them."""
from __future__ import annotations

from dataclasses import dataclass

from ..ad import primitives as P
from .scenario import ScenarioParams


@dataclass(frozen=True)
class Payoff:
    kind: str
    strike: float
    barrier_lo: float | None = None
    barrier_hi: float | None = None
    smoothing_a: float = 2.0

    @classmethod
    def from_params(cls, params: ScenarioParams, kind: str | None = None) -> "Payoff":
        return cls(kind or params.payoff, params.strike, params.barrier_lo, params.barrier_hi, params.smoothing)

    @property
    def is_put(self) -> bool:
        return self.kind in ("european_put", "american_put")

    @property
    def path_dependent(self) -> bool:
        return self.kind == "double_barrier_call"

    def intrinsic(self, x, strike=None):
        """Exercise value at spot ``x``; ``strike`` may be an AD value."""
        k = self.strike if strike is None else strike
        if self.is_put:
            return P.ramp(k - x, self.smoothing_a)
        return P.ramp(x - k, self.smoothing_a)

    def survival(self, x):
        """Indicator of ``L <= x <= U`` at one monitoring date."""
        a = self.smoothing_a
        return P.heaviside(x - self.barrier_lo, a) * P.heaviside(self.barrier_hi - x, a)

    def value(self, columns, strike=None):
        """Undiscounted payoff from the monitored path ``columns[0..n]`` (arrays or AD values).

        Barriers are monitored at every Euler date after the start.
        """
        v = self.intrinsic(columns[-1], strike)
        if self.path_dependent:
            for x in columns[1:]:
                v = v * self.survival(x)
        return v
