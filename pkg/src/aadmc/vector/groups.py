"""Variance of a mean-of-adjoints sensitivity from contiguous path groups."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import VGraph, vforward_sweep, vreverse_with_mean


@dataclass(frozen=True)
class GroupSpec:
    n_groups: int

    def __post_init__(self):
        if self.n_groups < 2:
            raise ValueError(f"need at least 2 groups to estimate a variance, got {self.n_groups}")

    def bounds(self, M: int):
        if M < self.n_groups:
            raise ValueError(f"{M} paths cannot fill {self.n_groups} groups")
        edges = np.linspace(0, M, self.n_groups + 1).round().astype(int)
        return list(zip(edges[:-1], edges[1:]))


def group_sensitivity_variance(graph: VGraph, theta, noise, spec: GroupSpec | int, barrier="auto"):
    """Per-group mean-of-adjoints sensitivities ``s_g``.

    Returns ``(mean, variance)`` where ``mean`` is the size-weighted average of
    the ``s_g`` (the full-sample estimate) and ``variance`` is the sample
    variance of the ``s_g`` divided by ``G``, i.e. the variance of the mean.
    """
    if not isinstance(spec, GroupSpec):
        spec = GroupSpec(int(spec))
    noise = np.asarray(noise, dtype=float)
    sg, w = [], []
    for lo, hi in spec.bounds(noise.shape[0]):
        st = vforward_sweep(graph, theta, noise[lo:hi])
        sg.append(vreverse_with_mean(graph, st, barrier).sensitivities)
        w.append(hi - lo)
    sg = np.array(sg)
    w = np.array(w, dtype=float)
    mean = (sg * w[:, None]).sum(axis=0) / w.sum()
    var = sg.var(axis=0, ddof=1) / spec.n_groups
    return mean, var
