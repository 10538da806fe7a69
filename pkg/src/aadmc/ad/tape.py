"""Reverse mode on a recorded tape.

Recording executes ``f`` on :class:`Var` handles.  Every primitive appends a
:class:`Node` holding its parent slots, its primal outputs and its local
partials evaluated at record time, so the reverse sweep never re-runs the
primal.  Value slots ``0..k-1`` are the inputs; each node output gets the next
free slot, hence parents always precede their consumers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import primitives as P

# flop model: primal cost, extra cost to form the local partials at record time
PRIMAL_COST = {
    "add": 1, "sub": 1, "mul": 1, "div": 1, "neg": 1,
    "addc": 1, "subc": 1, "rsubc": 1, "mulc": 1, "divc": 1, "rdivc": 1, "powc": 1,
    "exp": 1, "log": 1, "sqrt": 1, "sin": 1, "cos": 1, "sincos": 2,
    "ramp": 1, "heaviside": 1, "dirac": 4,
}
PARTIAL_COST = {
    "add": 0, "sub": 0, "mul": 0, "div": 2, "neg": 0,
    "addc": 0, "subc": 0, "rsubc": 0, "mulc": 0, "divc": 0, "rdivc": 2, "powc": 2,
    "exp": 0, "log": 1, "sqrt": 1, "sin": 1, "cos": 2, "sincos": 1,
    "ramp": 1, "heaviside": 4, "dirac": 3,
}


@dataclass(frozen=True)
class Node:
    op: str
    args: tuple          # parent value slots
    outs: tuple          # output value slots
    values: tuple        # primal outputs
    partials: tuple      # partials[o][j] = d outs[o] / d args[j]
    consts: tuple = ()   # non-slot operands, kept for replay and dumps


@dataclass
class Tape:
    """Recorded flow graph of one evaluation."""

    n_inputs: int
    inputs: tuple
    nodes: list = field(default_factory=list)
    n_slots: int = 0
    output_slots: tuple = ()
    output_values: tuple = ()
    primal_ops: int = 0
    partial_ops: int = 0
    reverse_ops: int = 0

    def __post_init__(self):
        self.n_slots = self.n_inputs

    def _push(self, op, args, values, partials, consts=()):
        outs = tuple(range(self.n_slots, self.n_slots + len(values)))
        self.n_slots += len(values)
        self.nodes.append(Node(op, tuple(args), outs, tuple(values), tuple(partials), tuple(consts)))
        self.primal_ops += PRIMAL_COST[op]
        self.partial_ops += PARTIAL_COST[op]
        return [Var(self, s, v) for s, v in zip(outs, values)]

    @property
    def primitive_count(self) -> int:
        return len(self.nodes)

    def slot_values(self) -> list:
        vals = list(self.inputs) + [None] * (self.n_slots - self.n_inputs)
        for node in self.nodes:
            for s, v in zip(node.outs, node.values):
                vals[s] = v
        return vals

    def replay(self, x: Sequence[float] | None = None) -> tuple:
        """Re-execute the recorded operations from the inputs.

        With the recorded inputs this reproduces ``output_values`` bit for bit.
        """
        vals = list(self.inputs if x is None else x)
        if len(vals) != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} inputs, got {len(vals)}")
        vals += [0.0] * (self.n_slots - self.n_inputs)
        for node in self.nodes:
            args = [vals[s] for s in node.args]
            outs = _apply(node.op, args, node.consts)
            for s, v in zip(node.outs, outs):
                vals[s] = v
        return tuple(vals[s] if s is not None else c for s, c in zip(self.output_slots, self.output_values))

    def dump(self) -> str:
        """Line-oriented text: ``node-id op parent-ids primal partials``."""
        lines = []
        for i, node in enumerate(self.nodes):
            parents = ",".join(str(a) for a in node.args) or "-"
            primal = ",".join(repr(float(v)) for v in node.values)
            partials = ";".join(",".join(repr(float(p)) for p in row) for row in node.partials) or "-"
            op = node.op if not node.consts else f"{node.op}[{','.join(repr(float(c)) for c in node.consts)}]"
            lines.append(f"{i} {op} {parents} {primal} {partials}")
        return "\n".join(lines) + ("\n" if lines else "")


def _apply(op, args, consts):
    if op == "add":
        return (args[0] + args[1],)
    if op == "sub":
        return (args[0] - args[1],)
    if op == "mul":
        return (args[0] * args[1],)
    if op == "div":
        return (args[0] / args[1],)
    if op == "neg":
        return (-args[0],)
    if op == "addc":
        return (args[0] + consts[0],)
    if op == "subc":
        return (args[0] - consts[0],)
    if op == "rsubc":
        return (consts[0] - args[0],)
    if op == "mulc":
        return (args[0] * consts[0],)
    if op == "divc":
        return (args[0] / consts[0],)
    if op == "rdivc":
        return (consts[0] / args[0],)
    if op == "powc":
        return (args[0] ** consts[0],)
    if op == "sincos":
        return P.sincos(args[0])
    if op in ("ramp", "heaviside", "dirac"):
        return (P.primal_of(op, args[0], consts[0]),)
    return (P.primal_of(op, args[0], None),)


class Var:
    """Handle to one value slot of a tape being recorded."""

    __slots__ = ("tape", "slot", "value")
    __array_ufunc__ = None  # numpy defers to our reflected operators

    def __init__(self, tape, slot, value):
        self.tape = tape
        self.slot = slot
        self.value = value

    def _same(self, other):
        if other.tape is not self.tape:
            raise ValueError("operands recorded on different tapes")

    def __add__(self, o):
        if isinstance(o, Var):
            self._same(o)
            return self.tape._push("add", (self.slot, o.slot), (self.value + o.value,), ((1.0, 1.0),))[0]
        return self.tape._push("addc", (self.slot,), (self.value + o,), ((1.0,),), (o,))[0]

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Var):
            self._same(o)
            return self.tape._push("sub", (self.slot, o.slot), (self.value - o.value,), ((1.0, -1.0),))[0]
        return self.tape._push("subc", (self.slot,), (self.value - o,), ((1.0,),), (o,))[0]

    def __rsub__(self, o):
        return self.tape._push("rsubc", (self.slot,), (o - self.value,), ((-1.0,),), (o,))[0]

    def __mul__(self, o):
        if isinstance(o, Var):
            self._same(o)
            return self.tape._push("mul", (self.slot, o.slot), (self.value * o.value,), ((o.value, self.value),))[0]
        return self.tape._push("mulc", (self.slot,), (self.value * o,), ((o,),), (o,))[0]

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Var):
            self._same(o)
            if o.value == 0:
                raise P.DomainError("division by zero")
            inv = 1.0 / o.value
            q = self.value / o.value
            return self.tape._push("div", (self.slot, o.slot), (q,), ((inv, -q * inv),))[0]
        if o == 0:
            raise P.DomainError("division by zero")
        return self.tape._push("divc", (self.slot,), (self.value / o,), ((1.0 / o,),), (o,))[0]

    def __rtruediv__(self, o):
        if self.value == 0:
            raise P.DomainError("division by zero")
        q = o / self.value
        return self.tape._push("rdivc", (self.slot,), (q,), ((-q / self.value,),), (o,))[0]

    def __neg__(self):
        return self.tape._push("neg", (self.slot,), (-self.value,), ((-1.0,),))[0]

    def __pos__(self):
        return self

    def __pow__(self, p):
        if isinstance(p, Var):
            return P.exp(p * P.log(self))
        y = self.value ** p
        d = p * self.value ** (p - 1) if p != 0 else 0.0
        return self.tape._push("powc", (self.slot,), (y,), ((d,),), (p,))[0]

    def __ad_unary__(self, name, a):
        y = P.primal_of(name, self.value, a)
        d = P.derivative_of(name, self.value, y, a)
        consts = (a,) if name in ("ramp", "heaviside", "dirac") else ()
        return self.tape._push(name, (self.slot,), (y,), ((d,),), consts)[0]

    def __ad_sincos__(self):
        v, w = math.sin(self.value), math.cos(self.value)
        return tuple(self.tape._push("sincos", (self.slot,), (v, w), ((w,), (-v,)))[:2])

    __lt__ = __le__ = __gt__ = __ge__ = P.nonsmooth_compare

    def __repr__(self):
        return f"Var(slot={self.slot}, value={self.value!r})"


def record(f: Callable, x: Sequence[float]):
    """Run ``f`` on recording handles; returns ``(tape, outputs)``."""
    x = tuple(float(v) for v in x)
    tape = Tape(len(x), x)
    out = f([Var(tape, i, v) for i, v in enumerate(x)])
    if not isinstance(out, (tuple, list)):
        out = (out,)
    slots, values = [], []
    for o in out:
        if isinstance(o, Var):
            o._same(Var(tape, 0, 0.0))
            slots.append(o.slot)
            values.append(o.value)
        else:
            slots.append(None)
            values.append(o)
    tape.output_slots = tuple(slots)
    tape.output_values = tuple(values)
    return tape, tuple(values)


def reverse_sweep(tape: Tape, seed: Sequence[float]) -> np.ndarray:
    """Input adjoints ``J^T seed``; fanout contributions add up."""
    seed = tuple(seed)
    if len(seed) != len(tape.output_slots):
        raise ValueError(f"seed has length {len(seed)}, tape has {len(tape.output_slots)} outputs")
    adj = [0.0] * tape.n_slots
    for s, w in zip(tape.output_slots, seed):
        if s is not None:
            adj[s] += w
    ops = 0
    for node in reversed(tape.nodes):
        for o, row in zip(node.outs, node.partials):
            g = adj[o]
            for a, p in zip(node.args, row):
                adj[a] += g * p
                ops += 2
    tape.reverse_ops = ops
    return np.array(adj[:tape.n_inputs], dtype=float)


def reverse_jacobian(tape: Tape) -> np.ndarray:
    """Jacobian by one reverse sweep per output (one row each)."""
    m = len(tape.output_slots)
    rows = []
    for i in range(m):
        seed = [0.0] * m
        seed[i] = 1.0
        rows.append(reverse_sweep(tape, seed))
    return np.array(rows, dtype=float).reshape(m, tape.n_inputs)


def gradient(f: Callable, x: Sequence[float]) -> np.ndarray:
    """Gradient of a scalar function by one record and one reverse sweep."""
    tape, _ = record(f, x)
    return reverse_sweep(tape, [1.0])
