"""Finite differences against one adjoint sweep on a graph with ``p`` bumpable inputs."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .cva import DEFAULT_BUCKETS, build_financing_graph
from .models.payoffs import Payoff
from .models.scenario import ScenarioParams
from .models.simulate import outer_normals
from .vector import vforward_sweep, vreverse_with_mean, output_values

FD_BUMP = 1e-6


@dataclass(frozen=True)
class BenchRow:
    method: str
    n_params: int
    seconds: float
    pricings: int
    forward_ops: int
    reverse_ops: int

    def as_dict(self):
        return dict(method=self.method, params=self.n_params, seconds=self.seconds, pricings=self.pricings,
                    forward_ops=self.forward_ops, reverse_ops=self.reverse_ops)


@dataclass(frozen=True)
class BenchResult:
    fd: BenchRow
    aad: BenchRow
    max_rel_discrepancy: float
    fd_sensitivities: np.ndarray
    aad_sensitivities: np.ndarray

    @property
    def ratio(self) -> float:
        """AAD time over FD time."""
        return self.aad.seconds / self.fd.seconds


def financing_cell_map(p: int, n_steps: int):
    """Spread ``p`` parameters over (date group, spot bucket) cells; returns (cell_map, buckets)."""
    if p < 1:
        raise ValueError("need at least one parameter")
    b = min(p, DEFAULT_BUCKETS)
    groups = math.ceil(p / b)

    def cell(k, j):
        return min((k * groups // n_steps) * b + j, p - 1)
    return cell, b


def bench_fd_vs_aad(params: ScenarioParams, p: int, n_paths: int = 5000, repeats: int = 3,
                    bump: float = FD_BUMP) -> BenchResult:
    """Time ``p+1`` one-sided bumped pricings against one forward plus one reverse sweep.

    Both routes share the same normals; each timing is the best of ``repeats``.
    """
    payoff = Payoff.from_params(params)
    cell, b = financing_cell_map(p, params.steps)
    g = build_financing_graph(params, payoff, b, cell).graph
    noise = outer_normals(params, 0, n_paths, params.steps)
    theta = np.zeros(len(g.params))

    def run_fd():
        base = output_values(vforward_sweep(g, theta, noise)).mean()
        out = np.empty(p)
        ops = 0
        for i in range(p):
            th = theta.copy()
            th[i] += bump
            st = vforward_sweep(g, th, noise)
            ops += st.counters.vector_ops + st.counters.scalar_ops
            out[i] = (output_values(st).mean() - base) / bump
        return out, ops

    def run_aad():
        st = vforward_sweep(g, theta, noise)
        res = vreverse_with_mean(g, st, "auto")
        return res.sensitivities, st.counters, res.counters

    fd_t, aad_t = math.inf, math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fd, fd_ops = run_fd()
        fd_t = min(fd_t, time.perf_counter() - t0)
        t0 = time.perf_counter()
        aad, fc, rc = run_aad()
        aad_t = min(aad_t, time.perf_counter() - t0)
    scale = max(np.max(np.abs(aad)), 1e-300)
    disc = float(np.max(np.abs(fd - aad)) / scale)
    fwd_ops = fc.vector_ops + fc.scalar_ops
    return BenchResult(
        BenchRow("fd", p, fd_t, p + 1, fwd_ops + fd_ops, 0),
        BenchRow("aad", p, aad_t, 1, fwd_ops, rc.reverse_vector_ops + rc.reverse_scalar_ops),
        disc, fd, aad)
