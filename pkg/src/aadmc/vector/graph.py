"""Path-vectorized computational graph with scalar and vector slots.

A :class:`VGraph` is built once with :class:`VNode` handles (define, then run).
Leaves are scalar parameters, scalar constants and columns of the noise
matrix.  A node is *deterministic* when no random leaf reaches it; those
nodes hold one scalar per sweep, every other node holds one value per path.

Reverse sweeps return path-averaged sensitivities for every parameter.  In
``mean`` mode each deterministic node that receives contributions from
vector consumers (the automatic barrier) has them averaged on arrival, so the
remaining reverse work upstream of the barrier is scalar.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..ad import primitives as P

SMOOTH_OPS = ("exp", "log", "sqrt", "sin", "cos")
KINK_OPS = ("ramp", "heaviside", "dirac")


class GraphContractError(ValueError):
    """Misuse of the graph API: bad seed, invalid barrier, shape mismatch."""


@dataclass(frozen=True)
class OpRec:
    op: str
    args: tuple
    const: object = None
    det: bool = True


@dataclass
class Counters:
    scalar_ops: int = 0
    vector_ops: int = 0
    vector_elems: int = 0
    reverse_scalar_ops: int = 0
    reverse_vector_ops: int = 0
    barrier_means: int = 0

    def merge(self, other: "Counters") -> "Counters":
        for k in self.__dataclass_fields__:
            setattr(self, k, getattr(self, k) + getattr(other, k))
        return self


class VGraph:
    """Recorded operation list; node ids are topologically ordered."""

    def __init__(self):
        self.ops: list[OpRec] = []
        self.params: list[int] = []
        self.param_names: list[str] = []
        self.n_random = 0
        self.outputs: list[int] = []
        self.data_names: list[str] = []
        self._consumers: list[list[int]] | None = None

    # -- building ---------------------------------------------------------------------

    def _add(self, op, args=(), const=None, det=None) -> "VNode":
        args = tuple(args)
        if det is None:
            det = all(self.ops[a].det for a in args)
        self.ops.append(OpRec(op, args, const, det))
        self._consumers = None
        return VNode(self, len(self.ops) - 1)

    def param(self, name: str | None = None) -> "VNode":
        node = self._add("param", (), len(self.params), True)
        self.params.append(node.id)
        self.param_names.append(name or f"p{len(self.params) - 1}")
        return node

    def const(self, value: float) -> "VNode":
        return self._add("const", (), float(value), True)

    def random(self, column: int) -> "VNode":
        self.n_random = max(self.n_random, column + 1)
        return self._add("random", (), int(column), False)

    def random_block(self, column: int, k: int) -> "VNode":
        """Columns ``column .. column+k-1`` flattened path-major: length ``M*k``."""
        self.n_random = max(self.n_random, column + k)
        return self._add("random_block", (), (int(column), int(k)), False)

    def data(self, name: str) -> "VNode":
        """Per-path input supplied at sweep time (not differentiated)."""
        self.data_names.append(name)
        return self._add("data", (), name, False)

    def lift(self, x) -> "VNode":
        if isinstance(x, VNode):
            if x.graph is not self:
                raise GraphContractError("node belongs to another graph")
            return x
        return self.const(x)

    def repeat(self, x: "VNode", k: int) -> "VNode":
        """Each path value repeated ``k`` times, contiguously (inner sub-samples)."""
        return self._add("repeat", (x.id,), int(k))

    def block_mean(self, x: "VNode", k: int) -> "VNode":
        """Mean over contiguous blocks of ``k``; inverse shape of :meth:`repeat`."""
        return self._add("block_mean", (x.id,), int(k))

    def bucketize(self, x: "VNode", edges) -> "VNode":
        """Index of the cell of ``edges`` containing ``x`` (not differentiable)."""
        return self._add("bucketize", (x.id,), np.asarray(edges, dtype=float))

    def choose(self, index: "VNode", options: Sequence) -> "VNode":
        """``out[i] = options[index[i]]``; options may be scalar or vector nodes."""
        opts = [self.lift(o).id for o in options]
        return self._add("choose", (index.id, *opts))

    def output(self, x) -> "VNode":
        x = self.lift(x)
        self.outputs.append(x.id)
        return x

    # -- structure --------------------------------------------------------------------

    def __len__(self):
        return len(self.ops)

    def consumers(self) -> list[list[int]]:
        if self._consumers is None:
            cons = [[] for _ in self.ops]
            for i, rec in enumerate(self.ops):
                for a in set(rec.args):
                    cons[a].append(i)
            self._consumers = cons
        return self._consumers

    def differentiable_args(self, i: int) -> tuple:
        rec = self.ops[i]
        if rec.op == "bucketize":
            return ()
        if rec.op == "choose":
            return rec.args[1:]
        return rec.args

    def auto_barrier(self) -> tuple:
        """Deterministic nodes read by at least one vector node."""
        cons = self.consumers()
        out = []
        for i, rec in enumerate(self.ops):
            if rec.det and any(not self.ops[c].det and i in self.differentiable_args(c) for c in cons[i]):
                out.append(i)
        return tuple(out)

    def dump(self, layers: Mapping[int, int] | None = None) -> str:
        lines = []
        for i, rec in enumerate(self.ops):
            parents = ",".join(map(str, rec.args)) or "-"
            kind = "scalar" if rec.det else "vector"
            layer = "-" if layers is None else str(layers[i])
            lines.append(f"{i} {rec.op} {parents} {kind} {layer}")
        return "\n".join(lines) + "\n"


class VNode:
    """Handle used while building a :class:`VGraph`."""

    __slots__ = ("graph", "id")
    __array_ufunc__ = None  # numpy defers to our reflected operators

    def __init__(self, graph, id):
        self.graph = graph
        self.id = id

    @property
    def deterministic(self) -> bool:
        return self.graph.ops[self.id].det

    def _bin(self, op, other, reflected=False):
        if not isinstance(other, (VNode, int, float, np.integer, np.floating)):
            return NotImplemented
        g = self.graph
        o = g.lift(other)
        a, b = (o, self) if reflected else (self, o)
        return g._add(op, (a.id, b.id))

    def __add__(self, o):
        return self._bin("add", o)

    def __radd__(self, o):
        return self._bin("add", o, True)

    def __sub__(self, o):
        return self._bin("sub", o)

    def __rsub__(self, o):
        return self._bin("sub", o, True)

    def __mul__(self, o):
        return self._bin("mul", o)

    def __rmul__(self, o):
        return self._bin("mul", o, True)

    def __truediv__(self, o):
        return self._bin("div", o)

    def __rtruediv__(self, o):
        return self._bin("div", o, True)

    def __neg__(self):
        return self.graph._add("neg", (self.id,))

    def __pos__(self):
        return self

    def __pow__(self, p):
        if isinstance(p, VNode):
            return P.exp(p * P.log(self))
        return self.graph._add("powc", (self.id,), float(p))

    def __ad_unary__(self, name, a):
        return self.graph._add(name, (self.id,), a if name in KINK_OPS else None)

    def __ad_sincos__(self):
        return self.__ad_unary__("sin", None), self.__ad_unary__("cos", None)

    __lt__ = __le__ = __gt__ = __ge__ = P.nonsmooth_compare

    def __repr__(self):
        rec = self.graph.ops[self.id]
        return f"VNode({self.id}, {rec.op}, {'scalar' if rec.det else 'vector'})"


# -- forward sweep ------------------------------------------------------------------------

@dataclass
class VState:
    graph: VGraph
    values: list
    n_paths: int
    counters: Counters = field(default_factory=Counters)


def _forward_op(rec, vals):
    op = rec.op
    a = [vals[j] for j in rec.args]
    if op == "add":
        return a[0] + a[1]
    if op == "sub":
        return a[0] - a[1]
    if op == "mul":
        return a[0] * a[1]
    if op == "div":
        if np.any(np.asarray(a[1]) == 0):
            raise P.DomainError("division by zero")
        return a[0] / a[1]
    if op == "neg":
        return -a[0]
    if op == "powc":
        return a[0] ** rec.const
    if op in SMOOTH_OPS:
        return P._plain(op, a[0], None)
    if op in KINK_OPS:
        return P._GENERALIZED[op](a[0], rec.const)
    if op == "repeat":
        return np.repeat(a[0], rec.const)
    if op == "block_mean":
        return a[0].reshape(-1, rec.const).mean(axis=1)
    if op == "bucketize":
        return np.searchsorted(rec.const, a[0], side="right")
    if op == "choose":
        idx, opts = a[0], a[1:]
        if all(np.ndim(o) == 0 for o in opts):
            return np.asarray(opts, dtype=float)[idx]
        out = np.empty(idx.shape[0])
        for j, o in enumerate(opts):
            m = idx == j
            out[m] = o[m] if np.ndim(o) else o
        return out
    raise KeyError(op)


def vforward_sweep(graph: VGraph, theta, noise=None, data: Mapping | None = None) -> VState:
    """Evaluate every slot; deterministic slots once as scalars."""
    theta = np.asarray([theta[n] for n in graph.param_names] if isinstance(theta, Mapping) else theta, dtype=float)
    if theta.shape != (len(graph.params),):
        raise GraphContractError(f"expected {len(graph.params)} parameters, got shape {theta.shape}")
    if graph.n_random:
        if noise is None:
            raise GraphContractError("graph has random inputs but no noise was given")
        noise = np.asarray(noise, dtype=float)
        if noise.ndim != 2 or noise.shape[1] != graph.n_random:
            raise GraphContractError(
                f"noise must have shape (M, {graph.n_random}), got {getattr(noise, 'shape', None)}")
        M = noise.shape[0]
    else:
        M = 1 if noise is None else np.asarray(noise).shape[0]
    vals = [None] * len(graph.ops)
    cnt = Counters()
    for i, rec in enumerate(graph.ops):
        if rec.op == "param":
            vals[i] = float(theta[rec.const])
        elif rec.op == "const":
            vals[i] = rec.const
        elif rec.op == "random":
            vals[i] = noise[:, rec.const]
        elif rec.op == "random_block":
            c0, k = rec.const
            vals[i] = np.ascontiguousarray(noise[:, c0:c0 + k]).reshape(-1)
        elif rec.op == "data":
            if data is None or rec.const not in data:
                raise GraphContractError(f"missing data input {rec.const!r}")
            vals[i] = np.asarray(data[rec.const])
            if vals[i].shape[0] != M:
                raise GraphContractError(f"data {rec.const!r} has {vals[i].shape[0]} rows, noise has {M}")
        else:
            v = _forward_op(rec, vals)
            vals[i] = v
            if rec.det:
                cnt.scalar_ops += 1
            else:
                cnt.vector_ops += 1
                cnt.vector_elems += int(np.size(v))
    return VState(graph, vals, M, cnt)


# -- reverse sweep ------------------------------------------------------------------------

def local_contributions(graph: VGraph, vals, i: int, g, reduce_ids=frozenset()):
    """``[(parent, g * d node_i / d parent)]`` for node ``i`` with adjoint ``g``.

    A ``choose`` over scalar options that are all in ``reduce_ids`` yields one
    ``("choose-bincount", ...)`` item instead of a masked vector per option.
    """
    rec = graph.ops[i]
    op = rec.op
    args = rec.args
    if op in ("param", "const", "random", "random_block", "data", "bucketize"):
        return []
    a = [vals[j] for j in args]
    out = vals[i]
    if op == "add":
        return [(args[0], g), (args[1], g)]
    if op == "sub":
        return [(args[0], g), (args[1], -g)]
    if op == "mul":
        return [(args[0], g * a[1]), (args[1], g * a[0])]
    if op == "div":
        q = g / a[1]
        return [(args[0], q), (args[1], -q * out)]
    if op == "neg":
        return [(args[0], -g)]
    if op == "powc":
        p = rec.const
        return [(args[0], g * p * a[0] ** (p - 1.0))] if p != 0 else []
    if op == "exp":
        return [(args[0], g * out)]
    if op == "log":
        return [(args[0], g / a[0])]
    if op == "sqrt":
        return [(args[0], g * 0.5 / out)]
    if op == "sin":
        return [(args[0], g * np.cos(a[0]))]
    if op == "cos":
        return [(args[0], -g * np.sin(a[0]))]
    if op == "ramp":
        return [(args[0], g * P._heaviside_real(a[0]))]
    if op == "heaviside":
        return [(args[0], g * P._dirac_real(a[0], rec.const))]
    if op == "dirac":
        w = rec.const
        return [(args[0], g * out * (-2.0 / (w * w)) * a[0])]
    if op == "repeat":
        return [(args[0], np.broadcast_to(g, out.shape).reshape(-1, rec.const).sum(axis=1))]
    if op == "block_mean":
        return [(args[0], np.repeat(np.broadcast_to(g, out.shape) / rec.const, rec.const))]
    if op == "choose":
        idx = a[0]
        gv = np.broadcast_to(g, idx.shape)
        res = []
        opts = args[1:]
        if np.ndim(idx) > 0 and all(o in reduce_ids for o in opts):
            # scalar options: one bincount instead of a mask per option
            res.append(("choose-bincount", opts, idx, gv))
            return res
        for j, o in enumerate(opts):
            res.append((o, np.where(idx == j, gv, 0.0)))
        return res
    raise KeyError(op)


def _fold(v, M):
    """Per-path form of a contribution headed for a scalar slot."""
    v = np.asarray(v)
    if v.ndim == 0:
        return v
    return v.reshape(M, -1).sum(axis=1)


class _Adjoint:
    """Adjoint accumulator of one slot: exact scalar part plus per-path vector part."""

    __slots__ = ("s", "v", "own")

    def __init__(self):
        self.s = 0.0
        self.v = None
        self.own = False   # v may alias a contribution until the first in-place add

    def add_scalar(self, x):
        self.s = self.s + x

    def add_vector(self, x):
        if self.v is None:
            self.v = x
        elif self.own and self.v.shape == np.shape(x):
            self.v += x
        else:
            self.v = self.v + x
            self.own = True


def _seed_map(graph, seed):
    if seed is None:
        if len(graph.outputs) != 1:
            raise GraphContractError("seed required when the graph has several outputs")
        return {graph.outputs[0]: 1.0}
    if isinstance(seed, Mapping):
        bad = [k for k in seed if k not in graph.outputs]
        if bad:
            raise GraphContractError(f"seed on non-output node(s) {bad}")
        return dict(seed)
    seed = list(seed)
    if len(seed) != len(graph.outputs):
        raise GraphContractError(f"seed has length {len(seed)}, graph has {len(graph.outputs)} outputs")
    return dict(zip(graph.outputs, seed))


def _resolve_barrier(graph, barrier):
    if barrier is None or barrier == "none":
        return frozenset()
    if barrier == "auto":
        return frozenset(graph.auto_barrier())
    ids = frozenset(int(b.id if isinstance(b, VNode) else b) for b in barrier)
    for b in ids:
        if not 0 <= b < len(graph.ops):
            raise GraphContractError(f"barrier node {b} is not in the graph")
        if not graph.ops[b].det:
            raise GraphContractError(f"barrier node {b} ({graph.ops[b].op}) depends on random inputs")
    return ids


@dataclass
class ReverseResult:
    sensitivities: np.ndarray          # path-averaged, one per parameter
    per_path: np.ndarray | None        # (M, p) when requested in plain mode
    counters: Counters
    barrier: tuple = ()


def _run_reverse(graph, state, seed, barrier_ids, keep_vectors):
    M = state.n_paths
    vals = state.values
    adj: list[_Adjoint | None] = [None] * len(graph.ops)
    for k, w in _seed_map(graph, seed).items():
        a = adj[k] = adj[k] or _Adjoint()
        if graph.ops[k].det:
            a.add_scalar(float(w))
        else:
            a.add_vector(np.full(np.shape(vals[k]), float(w)) if np.ndim(vals[k]) else np.full(M, float(w)))
    cnt = Counters()
    for i in range(len(graph.ops) - 1, -1, -1):
        a = adj[i]
        if a is None:
            continue
        rec = graph.ops[i]
        if rec.op in ("param", "const", "random", "random_block", "data"):
            continue
        if rec.det:
            if a.v is not None and (i in barrier_ids or not keep_vectors):
                a.s = a.s + a.v.sum() / M
                a.v = None
                cnt.barrier_means += 1
            parts = []
            if a.s != 0.0 or a.v is None:
                parts.append((a.s, False))
            if a.v is not None:
                parts.append((a.v, True))
        else:
            parts = [(a.v, True)]
        for g, is_vec in parts:
            for item in local_contributions(graph, vals, i, g, barrier_ids):
                if item[0] == "choose-bincount":
                    _, opts, idx, gv = item
                    tot = np.bincount(idx.ravel(), weights=gv.ravel(), minlength=len(opts))[:len(opts)]
                    cnt.reverse_vector_ops += 1
                    for j, o in enumerate(opts):
                        t = adj[o] = adj[o] or _Adjoint()
                        t.add_scalar(tot[j] / M)
                        cnt.reverse_scalar_ops += 1
                    continue
                p, c = item
                t = adj[p] = adj[p] or _Adjoint()
                if graph.ops[p].det:
                    if np.ndim(c) == 0:
                        t.add_scalar(float(c))
                        cnt.reverse_scalar_ops += 2
                    elif keep_vectors and p not in barrier_ids:
                        t.add_vector(_fold(c, M))
                        cnt.reverse_vector_ops += 1
                    else:
                        t.add_scalar(float(np.sum(c)) / M)
                        cnt.reverse_vector_ops += 1
                        cnt.barrier_means += 1
                else:
                    if np.ndim(c) == 0:
                        c = np.full(np.shape(vals[p]), float(c))
                    t.add_vector(np.asarray(c, dtype=float))
                    cnt.reverse_vector_ops += 1
    return adj, cnt


def _collect(graph, adj, M, per_path):
    sens = np.zeros(len(graph.params))
    pp = np.zeros((M, len(graph.params))) if per_path else None
    for k, pid in enumerate(graph.params):
        a = adj[pid]
        if a is None:
            continue
        tot = a.s
        if a.v is not None:
            tot = tot + a.v.sum() / M
            if per_path:
                pp[:, k] += a.v
        if per_path:
            pp[:, k] += a.s
        sens[k] = tot
    return sens, pp


def vreverse_sweep(graph: VGraph, state: VState, seed=None, per_path: bool = False) -> ReverseResult:
    """Plain reverse sweep: vector adjoints all the way down, averaged at the parameters.

    With ``per_path`` the (M, p) matrix of per-path derivatives is returned too.
    """
    adj, cnt = _run_reverse(graph, state, seed, frozenset(), keep_vectors=True)
    sens, pp = _collect(graph, adj, state.n_paths, per_path)
    return ReverseResult(sens, pp, cnt)


def vreverse_with_mean(graph: VGraph, state: VState, barrier="auto", seed=None) -> ReverseResult:
    """Reverse sweep that averages adjoints at the barrier and continues in scalars.

    ``barrier`` is ``"auto"`` (maximal deterministic frontier), ``None`` (no
    barrier: identical to :func:`vreverse_sweep`) or an iterable of node ids,
    each of which must be deterministic.
    """
    ids = _resolve_barrier(graph, barrier)
    adj, cnt = _run_reverse(graph, state, seed, ids, keep_vectors=True)
    sens, _ = _collect(graph, adj, state.n_paths, False)
    return ReverseResult(sens, None, cnt, tuple(sorted(ids)))


def vgradient(graph: VGraph, theta, noise_chunks: Iterable, barrier="auto", per_path=False):
    """Chunked forward+reverse; returns ``(value mean, sensitivities, per-path or None, counters)``.

    ``noise_chunks`` yields noise matrices; results are path-weighted averages.
    """
    total = 0
    val_sum = 0.0
    sens_sum = np.zeros(len(graph.params))
    pps = []
    cnt = Counters()
    out = graph.outputs[0]
    for noise in noise_chunks:
        st = vforward_sweep(graph, theta, noise)
        m = st.n_paths
        if per_path:
            res = vreverse_sweep(graph, st, per_path=True)
            pps.append(res.per_path)
        else:
            res = vreverse_with_mean(graph, st, barrier)
        val_sum += float(np.sum(np.broadcast_to(st.values[out], (m,))))
        sens_sum += res.sensitivities * m
        total += m
        cnt.merge(st.counters).merge(res.counters)
    return val_sum / total, sens_sum / total, (np.vstack(pps) if per_path else None), cnt


def output_values(state: VState, node=None) -> np.ndarray:
    node = state.graph.outputs[0] if node is None else (node.id if isinstance(node, VNode) else node)
    return np.broadcast_to(np.asarray(state.values[node], dtype=float), (state.n_paths,))


def ceil_log2(k: int) -> int:
    return 0 if k <= 1 else math.ceil(math.log2(k))
