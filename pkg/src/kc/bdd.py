"""FBDD / OBDD / OR-FBDD diagrams: evaluation, structure checks, counting.

Node tuples::

    ("N", var, lo, hi)   decision
    ("O", (children...)) nondeterministic OR
    ("P", child)         no-op
    ("S0",) / ("S1",)    sinks
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from kc.circuit import TruthTable, check_cap, var_columns
from kc.errors import UnassignedVariable


class OrFbdd:
    def __init__(self, nodes: Mapping[int, tuple], root: int):
        self.nodes = dict(nodes)
        self.root = root
        if root not in self.nodes:
            raise ValueError("root is not a node")

    def __len__(self) -> int:
        return len(self.nodes)

    def __repr__(self) -> str:
        return f"<OrFbdd nodes={len(self.nodes)} root={self.root}>"

    def children(self, i: int) -> tuple[int, ...]:
        n = self.nodes[i]
        if n[0] == "N":
            return (n[2], n[3])
        if n[0] == "O":
            return tuple(n[1])
        if n[0] == "P":
            return (n[1],)
        return ()

    def reachable(self) -> list[int]:
        seen = {self.root}
        stack = [self.root]
        while stack:
            for c in self.children(stack.pop()):
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        return sorted(seen)

    def size(self) -> int:
        return len(self.reachable())

    def has_or_nodes(self) -> bool:
        return any(self.nodes[i][0] == "O" for i in self.reachable())

    def topological(self) -> list[int]:
        """Reachable ids, children first.  Raises ``ValueError`` on a cycle."""
        state: dict[int, int] = {}
        order: list[int] = []
        stack = [(self.root, iter(self.children(self.root)))]
        state[self.root] = 1
        while stack:
            node, it = stack[-1]
            for c in it:
                st = state.get(c, 0)
                if st == 1:
                    raise ValueError(f"cycle through node {c}")
                if st == 0:
                    state[c] = 1
                    stack.append((c, iter(self.children(c))))
                    break
            else:
                stack.pop()
                state[node] = 2
                order.append(node)
        return order


def eval_bdd(d: OrFbdd, a: Mapping[int, bool]) -> bool:
    """1 iff some root-to-1-sink path is consistent with ``a``."""
    cache: dict[int, bool] = {}

    def walk(i: int) -> bool:
        if i in cache:
            return cache[i]
        n = d.nodes[i]
        kind = n[0]
        if kind == "S1":
            r = True
        elif kind == "S0":
            r = False
        elif kind == "P":
            r = walk(n[1])
        elif kind == "O":
            r = any(walk(c) for c in n[1])
        else:
            if n[1] not in a:
                raise UnassignedVariable(n[1])
            r = walk(n[3] if a[n[1]] else n[2])
        cache[i] = r
        return r

    return walk(d.root)


def diagram_table(d: OrFbdd, var_order: Sequence[int]) -> TruthTable:
    """Truth table of ``d`` over ``var_order``, one numpy pass per node."""
    check_cap(len(var_order))
    cols = var_columns(tuple(var_order))
    size = 1 << len(var_order)
    tab: dict[int, np.ndarray] = {}
    for i in d.topological():
        n = d.nodes[i]
        kind = n[0]
        if kind == "S1":
            tab[i] = np.ones(size, dtype=bool)
        elif kind == "S0":
            tab[i] = np.zeros(size, dtype=bool)
        elif kind == "P":
            tab[i] = tab[n[1]]
        elif kind == "O":
            acc = np.zeros(size, dtype=bool)
            for c in n[1]:
                acc = acc | tab[c]
            tab[i] = acc
        else:
            if n[1] not in cols:
                raise UnassignedVariable(n[1])
            tab[i] = np.where(cols[n[1]], tab[n[3]], tab[n[2]])
    return TruthTable(tuple(var_order), tab[d.root])


@dataclass(frozen=True)
class PathViolation:
    kind: str  # cycle | read-twice | order
    path: tuple[int, ...]
    var: int | None = None


def _queried_below(d: OrFbdd, order: list[int]) -> dict[int, frozenset[int]]:
    below: dict[int, frozenset[int]] = {}
    for i in order:
        n = d.nodes[i]
        acc = frozenset().union(*(below[c] for c in d.children(i)))
        if n[0] == "N":
            acc = acc | {n[1]}
        below[i] = acc
    return below


def _path(d: OrFbdd, src: int, goal: Callable[[int], bool]) -> list[int]:
    """Some path from ``src`` (exclusive of nothing) to a node satisfying ``goal``."""
    prev = {src: None}
    queue = [src]
    for i in queue:
        for c in d.children(i):
            if c not in prev:
                prev[c] = i
                if goal(c):
                    out = [c]
                    while prev[out[-1]] is not None:
                        out.append(prev[out[-1]])
                    return out[::-1]
                queue.append(c)
    return [src]


def check_structure(d: OrFbdd, order: Sequence[int] | None = None) -> PathViolation | None:
    """Acyclicity, read-once on every path and, if ``order`` is given,
    agreement with that variable order."""
    try:
        topo = d.topological()
    except ValueError as exc:
        return PathViolation("cycle", (), None) if "cycle" in str(exc) else None
    below = _queried_below(d, topo)
    pos = None if order is None else {v: k for k, v in enumerate(order)}
    for i in sorted(topo):
        n = d.nodes[i]
        if n[0] != "N":
            continue
        x = n[1]
        under = below[n[2]] | below[n[3]]
        if x in under:
            head = _path(d, d.root, lambda j: j == i)
            tail = _path(d, i, lambda j: d.nodes[j][0] == "N" and d.nodes[j][1] == x)
            return PathViolation("read-twice", tuple(head + tail[1:]), x)
        if pos is not None:
            if x not in pos:
                return PathViolation("order", (i,), x)
            bad = [y for y in under if y not in pos or pos[y] < pos[x]]
            if bad:
                y = min(bad)
                head = _path(d, d.root, lambda j: j == i)
                tail = _path(d, i, lambda j: d.nodes[j][0] == "N" and d.nodes[j][1] == y)
                return PathViolation("order", tuple(head + tail[1:]), y)
    return None


def count_models_fbdd(d: OrFbdd, n: int) -> int:
    """Exact model count over variables ``1..n`` of an OR-free read-once diagram."""
    if d.has_or_nodes():
        raise ValueError("OR nodes present: path counting would double-count overlapping paths")
    topo = d.topological()
    below = _queried_below(d, topo)
    cnt: dict[int, int] = {}
    for i in topo:
        node = d.nodes[i]
        kind = node[0]
        if kind == "S1":
            cnt[i] = 1
        elif kind == "S0":
            cnt[i] = 0
        elif kind == "P":
            cnt[i] = cnt[node[1]]
        else:
            x, lo, hi = node[1:]
            if x in below[lo] or x in below[hi]:
                raise ValueError(f"variable {x} is read twice below node {i}")
            width = len(below[i]) - 1
            cnt[i] = (cnt[lo] << (width - len(below[lo]))) + (cnt[hi] << (width - len(below[hi])))
    extra = n - len(below[d.root])
    if extra < 0:
        raise ValueError("diagram queries variables outside 1..n")
    return cnt[d.root] << extra


# ---------------------------------------------------------------- OBDD builder

def obdd_from_table(tt: TruthTable, order: Sequence[int]) -> OrFbdd:
    """Reduced OBDD of a truth table under ``order``, built level by level
    from the bottom with a unique table per level."""
    if sorted(order) != sorted(tt.var_order):
        raise ValueError("order must be a permutation of the table's variables")
    n = len(order)
    bitpos = {v: k for k, v in enumerate(tt.var_order)}
    # axis j of the reshaped table is variable var_order[n - 1 - j]
    ids = tt.bits.reshape([2] * n) if n else tt.bits.reshape(())
    if n:
        ids = ids.transpose([n - 1 - bitpos[v] for v in order])
    ids = ids.astype(np.int64)
    nodes: dict[int, tuple] = {0: ("S0",), 1: ("S1",)}
    for k in reversed(range(n)):
        lo, hi = ids[..., 0], ids[..., 1]
        shape = lo.shape
        lo, hi = lo.reshape(-1), hi.reshape(-1)
        out = lo.copy()
        split = lo != hi
        if np.any(split):
            pairs = np.stack([lo[split], hi[split]], axis=1)
            uniq, inverse = np.unique(pairs, axis=0, return_inverse=True)
            base = len(nodes)
            for j, (l, h) in enumerate(uniq.tolist()):
                nodes[base + j] = ("N", order[k], l, h)
            out[split] = base + inverse.reshape(-1)
        ids = out.reshape(shape)
    root = int(ids)
    d = OrFbdd(nodes, root)
    return OrFbdd({i: nodes[i] for i in d.reachable()}, root)


# ---------------------------------------------------------------- one-way protocol

@dataclass
class OneWayProtocol:
    """Alice walks the OBDD on her prefix variables and names the frontier
    node; Bob finishes the walk from there."""

    obdd: OrFbdd
    alice_vars: tuple[int, ...]
    bob_vars: tuple[int, ...]
    frontier: tuple[int, ...]

    @property
    def cost(self) -> int:
        return math.ceil(math.log2(len(self.frontier))) if len(self.frontier) > 1 else 0

    def alice(self, a: Mapping[int, bool]) -> int:
        i = self.obdd.root
        mine = set(self.alice_vars)
        while True:
            n = self.obdd.nodes[i]
            if n[0] == "P":
                i = n[1]
            elif n[0] == "N" and n[1] in mine:
                i = n[3] if a[n[1]] else n[2]
            else:
                return i

    def bob(self, message: int, b: Mapping[int, bool]) -> bool:
        return eval_bdd(OrFbdd(self.obdd.nodes, message), b)

    def run(self, a: Mapping[int, bool], b: Mapping[int, bool]) -> bool:
        return self.bob(self.alice(a), b)


def obdd_to_oneway_protocol(d: OrFbdd, order: Sequence[int], split: int) -> OneWayProtocol:
    if d.has_or_nodes():
        raise ValueError("OR nodes are not allowed in an OBDD")
    if (v := check_structure(d, order)) is not None:
        raise ValueError(f"diagram does not respect the order: {v}")
    if not 0 <= split <= len(order):
        raise ValueError("split index out of range")
    alice_vars, bob_vars = tuple(order[:split]), tuple(order[split:])
    if len(alice_vars) > 20:
        raise ValueError("frontier enumeration is capped at 20 Alice variables")
    proto = OneWayProtocol(d, alice_vars, bob_vars, ())
    frontier = set()
    for mask in range(1 << len(alice_vars)):
        a = {v: bool((mask >> k) & 1) for k, v in enumerate(alice_vars)}
        frontier.add(proto.alice(a))
    proto.frontier = tuple(sorted(frontier))
    return proto


# ---------------------------------------------------------------- text format

def dumps_orfbdd(d: OrFbdd) -> str:
    try:
        ids = d.topological()
    except ValueError:
        ids = d.reachable()
    lines = [f"orfbdd {len(ids)}"]
    for i in ids:
        n = d.nodes[i]
        if n[0] == "N":
            lines.append(f"N {i} {n[1]} {n[2]} {n[3]}")
        elif n[0] == "O":
            lines.append(f"O {i} {len(n[1])} {' '.join(map(str, n[1]))}".rstrip())
        elif n[0] == "P":
            lines.append(f"P {i} {n[1]}")
        else:
            lines.append(f"{n[0]} {i}")
    lines.append(f"root {d.root}")
    return "\n".join(lines) + "\n"


def loads_orfbdd(text: str) -> OrFbdd:
    header = None
    nodes: dict[int, tuple] = {}
    root = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        tok = raw.split()
        if not tok or tok[0] == "c":
            continue
        try:
            if header is None:
                if tok[0] != "orfbdd" or len(tok) != 2:
                    raise ValueError("expected header 'orfbdd <n>'")
                header = int(tok[1])
                continue
            kind = tok[0]
            if kind == "root":
                root = int(tok[1])
                continue
            ident = int(tok[1])
            if ident in nodes:
                raise ValueError(f"duplicate node id {ident}")
            if kind == "N" and len(tok) == 5:
                nodes[ident] = ("N", int(tok[2]), int(tok[3]), int(tok[4]))
            elif kind == "O":
                k = int(tok[2])
                kids = tuple(int(t) for t in tok[3:])
                if len(kids) != k:
                    raise ValueError("child count mismatch")
                nodes[ident] = ("O", kids)
            elif kind == "P" and len(tok) == 3:
                nodes[ident] = ("P", int(tok[2]))
            elif kind in ("S0", "S1") and len(tok) == 2:
                nodes[ident] = (kind,)
            else:
                raise ValueError(f"malformed line {raw!r}")
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if header is None or root is None:
        raise ValueError("missing orfbdd header or root footer")
    if len(nodes) != header:
        raise ValueError(f"header declares {header} nodes, found {len(nodes)}")
    for i in nodes:
        n = nodes[i]
        kids = (n[2], n[3]) if n[0] == "N" else n[1] if n[0] == "O" else (n[1],) if n[0] == "P" else ()
        for c in kids:
            if c not in nodes:
                raise ValueError(f"node {i} points to unknown node {c}")
    return OrFbdd(nodes, root)
