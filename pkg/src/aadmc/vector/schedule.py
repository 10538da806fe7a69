"""Layer assignment and a layered, reproducible reverse executor.

Forward layers are longest-path depths.  In the reverse sweep the adjoint of
a slot read by ``k`` consumers is formed by a pairwise tree of partial sums,
so it occupies ``max(1, ceil(log2 k))`` layers instead of ``k``.  The pairing
order is fixed by consumer id, which makes results independent of how many
worker threads execute a layer.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .graph import (
    Counters, GraphContractError, ReverseResult, VGraph, VState,
    _collect, _resolve_barrier, _seed_map, ceil_log2, local_contributions, _Adjoint,
)


def aggregation_layers(k: int) -> int:
    return max(1, ceil_log2(k)) if k > 0 else 0


def tree_sum(terms):
    """Pairwise sum with a fixed pairing order; returns ``(total, levels)``."""
    terms = list(terms)
    if not terms:
        return 0.0, 0
    levels = 0
    while len(terms) > 1:
        nxt = [terms[i] + terms[i + 1] for i in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            nxt.append(terms[-1])
        terms = nxt
        levels += 1
    return terms[0], levels


@dataclass
class LayerSchedule:
    forward_layer: list          # per node
    adjoint_layer: list          # reverse layer at which each adjoint is final (None if unreached)
    fanout: list                 # differentiable consumers per node
    aggregation: list            # aggregation layers used per node
    forward_depth: int
    reverse_depth: int
    longest_path: int

    @property
    def total_layers(self) -> int:
        return self.forward_depth + self.reverse_depth

    def reverse_layers(self):
        """Nodes grouped by the reverse layer at which their adjoint completes."""
        out = {}
        for i, a in enumerate(self.adjoint_layer):
            if a is not None:
                out.setdefault(a, []).append(i)
        return [out[k] for k in sorted(out)]

    def update_events(self):
        """``(layer, target, tree level)`` for every adjoint update."""
        ev = []
        for j, a in enumerate(self.adjoint_layer):
            if a is None or self.aggregation[j] == 0:
                continue
            first = a - self.aggregation[j] + 1
            for lvl in range(self.aggregation[j]):
                ev.append((first + lvl, j, lvl))
        return ev


def layer_schedule(graph: VGraph, outputs=None) -> LayerSchedule:
    n = len(graph.ops)
    fwd = [0] * n
    for i, rec in enumerate(graph.ops):
        if rec.args:
            fwd[i] = 1 + max(fwd[a] for a in rec.args)
    cons = [[] for _ in range(n)]
    for i in range(n):
        for a in set(graph.differentiable_args(i)):
            cons[a].append(i)
    outs = set(graph.outputs if outputs is None else outputs)
    adj = [None] * n
    agg = [0] * n
    depth = [0] * n   # longest reverse path in edges
    for i in range(n - 1, -1, -1):
        ready = [adj[c] for c in cons[i] if adj[c] is not None]
        if i in outs:
            adj[i] = 0
        if ready:
            agg[i] = aggregation_layers(len(ready))
            adj[i] = max(ready) + agg[i]
            depth[i] = 1 + max(depth[c] for c in cons[i] if adj[c] is not None)
    reached = [a for a in adj if a is not None]
    return LayerSchedule(
        forward_layer=fwd,
        adjoint_layer=adj,
        fanout=[len(c) for c in cons],
        aggregation=agg,
        forward_depth=max(fwd) if fwd else 0,
        reverse_depth=max(reached) if reached else 0,
        longest_path=max(depth) if depth else 0,
    )


def vreverse_layered(graph: VGraph, state: VState, barrier="auto", seed=None,
                     threads: int = 1, schedule: LayerSchedule | None = None) -> ReverseResult:
    """Reverse sweep executed layer by layer with tree-aggregated adjoints.

    Bit-identical for any ``threads``; equal to the sequential sweep up to
    reassociation of the adjoint sums.
    """
    ids = _resolve_barrier(graph, barrier)
    sched = schedule or layer_schedule(graph)
    M = state.n_paths
    vals = state.values
    n = len(graph.ops)
    contribs = [[] for _ in range(n)]
    seeds = _seed_map(graph, seed)
    adj = [None] * n
    cnt = Counters()

    def finalize(i):
        terms = [c for _, c in sorted(contribs[i], key=lambda t: t[0])]
        if i in seeds:
            w = float(seeds[i])
            terms.insert(0, w if graph.ops[i].det else np.full(np.shape(vals[i]) or (M,), w))
        total, _ = tree_sum(terms)
        if graph.ops[i].det and np.ndim(total) and i in ids:
            total = float(np.sum(total)) / M
        return total

    def emit(i):
        g = adj[i]
        out = []
        if graph.ops[i].op in ("param", "const", "random", "random_block", "data"):
            return out
        for item in local_contributions(graph, vals, i, g):
            p, c = item
            if graph.ops[p].det and np.ndim(c):
                c = float(np.sum(c)) / M if p in ids else c.reshape(M, -1).sum(axis=1)
            elif not graph.ops[p].det and np.ndim(c) == 0:
                c = np.full(np.shape(vals[p]), float(c))
            out.append((p, (i, c)))
        return out

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for layer in sched.reverse_layers():
            for i in layer:
                adj[i] = finalize(i)
            work = [i for i in layer]
            results = list(pool.map(emit, work)) if pool else [emit(i) for i in work]
            for res in results:
                for p, item in res:
                    contribs[p].append(item)
                    if np.ndim(item[1]):
                        cnt.reverse_vector_ops += 1
                    else:
                        cnt.reverse_scalar_ops += 2
    finally:
        if pool:
            pool.shutdown()
    wrapped = [None] * n
    for pid in graph.params:
        if adj[pid] is None:
            continue
        a = _Adjoint()
        if np.ndim(adj[pid]):
            a.v = np.asarray(adj[pid])
        else:
            a.s = adj[pid]
        wrapped[pid] = a
    sens, _ = _collect(graph, wrapped, M, False)
    return ReverseResult(sens, None, cnt, tuple(sorted(ids)))
