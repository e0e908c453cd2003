"""DNNF to OR-FBDD conversion by light/heavy edge classification.

Every AND node has a light child (the one with fewer AND nodes below it) and
a heavy child.  The output diagram walks the light child first while keeping
the set of pending light edges; reaching a 1-sink below a light child pops
that edge and resumes at the heavy sibling.  Nodes of the output are pairs
``(u, s)`` with ``u`` a node of the DNNF and ``s`` a set of light edges.

Light edges are identified by the id of the AND node they leave, so ``s`` is
a frozenset of AND-node ids.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from kc.bdd import OrFbdd
from kc.circuit import (And, Const, Lit, NnfCircuit, Or, TruthTable, check_cap,
                        check_decomposable, var_columns)
from kc.errors import SizeLimitExceeded

# node kinds of the leafified DNNF
AND, OR, DEC, SINK0, SINK1 = "A", "O", "D", "S0", "S1"


def binarize(c: NnfCircuit) -> NnfCircuit:
    """Rewrite every AND of fan-in k > 2 as a left-associated chain.

    Unary ANDs are spliced out and the empty AND becomes the constant true.
    Already binary circuits come back unchanged.
    """
    nodes: list = []
    remap: dict[int, int] = {}
    changed = False
    for i in c.reachable():
        node = c.nodes[i]
        if isinstance(node, And):
            kids = [remap[k] for k in node.children]
            if len(kids) == 2:
                nodes.append(And(tuple(kids)))
            elif len(kids) == 0:
                changed = True
                nodes.append(Const(True))
            elif len(kids) == 1:
                changed = True
                remap[i] = kids[0]
                continue
            else:
                changed = True
                acc = kids[0]
                for k in kids[1:-1]:
                    nodes.append(And((acc, k)))
                    acc = len(nodes) - 1
                nodes.append(And((acc, kids[-1])))
        elif isinstance(node, Or):
            nodes.append(Or(tuple(remap[k] for k in node.children)))
        else:
            nodes.append(node)
        remap[i] = len(nodes) - 1
    if not changed and len(nodes) == len(c.nodes):
        return c
    return NnfCircuit(tuple(nodes), c.var_count, remap[c.root])


@dataclass
class Dnnf:
    """Binary, leafified DNNF.

    ``nodes`` maps ids to ``("A", l, r)``, ``("O", kids)``, ``("D", var, lo, hi)``,
    ``("S0",)`` or ``("S1",)``; children have smaller ids than parents.
    """

    nodes: dict[int, tuple]
    root: int
    var_count: int

    def children(self, u: int) -> tuple[int, ...]:
        n = self.nodes[u]
        if n[0] == AND:
            return (n[1], n[2])
        if n[0] == OR:
            return tuple(n[1])
        if n[0] == DEC:
            return (n[2], n[3])
        return ()

    @property
    def and_nodes(self) -> list[int]:
        return [u for u, n in self.nodes.items() if n[0] == AND]

    def evaluate(self, a: Mapping[int, bool]) -> bool:
        val: dict[int, bool] = {}
        for u in sorted(self.nodes):
            n = self.nodes[u]
            if n[0] == SINK0:
                val[u] = False
            elif n[0] == SINK1:
                val[u] = True
            elif n[0] == DEC:
                val[u] = val[n[3]] if a[n[1]] else val[n[2]]
            elif n[0] == AND:
                val[u] = val[n[1]] and val[n[2]]
            else:
                val[u] = any(val[k] for k in n[1])
        return val[self.root]

    def truth_table(self, var_order: Sequence[int] | None = None) -> TruthTable:
        order = list(var_order) if var_order is not None else list(range(1, self.var_count + 1))
        check_cap(len(order))
        cols = var_columns(order)
        size = 1 << len(order)
        val: dict[int, np.ndarray] = {}
        for u in sorted(self.nodes):
            n = self.nodes[u]
            if n[0] == SINK0:
                val[u] = np.zeros(size, dtype=bool)
            elif n[0] == SINK1:
                val[u] = np.ones(size, dtype=bool)
            elif n[0] == DEC:
                val[u] = np.where(cols[n[1]], val[n[3]], val[n[2]])
            elif n[0] == AND:
                val[u] = val[n[1]] & val[n[2]]
            else:
                out = np.zeros(size, dtype=bool)
                for k in n[1]:
                    out |= val[k]
                val[u] = out
        return TruthTable(tuple(order), val[self.root])


def leafify(c: NnfCircuit) -> Dnnf:
    """Turn every literal into a decision node with its own 1-sink.

    All 0-branches share a single 0-sink; a constant-true node becomes a
    1-sink of its own.  AND nodes must already be binary.
    """
    nodes: dict[int, tuple] = {0: (SINK0,)}
    remap: dict[int, int] = {}

    def fresh(node: tuple) -> int:
        nodes[len(nodes)] = node
        return len(nodes) - 1

    for i in c.reachable():
        node = c.nodes[i]
        if isinstance(node, Const):
            remap[i] = fresh((SINK1,)) if node.value else 0
        elif isinstance(node, Lit):
            one = fresh((SINK1,))
            if node.lit > 0:
                remap[i] = fresh((DEC, node.var, 0, one))
            else:
                remap[i] = fresh((DEC, node.var, one, 0))
        elif isinstance(node, And):
            if len(node.children) != 2:
                raise ValueError(f"node {i}: AND of fan-in {len(node.children)}; binarize first")
            remap[i] = fresh((AND, remap[node.children[0]], remap[node.children[1]]))
        else:
            remap[i] = fresh((OR, tuple(remap[k] for k in node.children)))
    root = remap[c.root]
    # drop the shared 0-sink when nothing points at it
    used = {k for n in nodes.values() for k in
            ((n[1], n[2]) if n[0] == AND else n[1] if n[0] == OR else n[2:] if n[0] == DEC else ())}
    if 0 not in used and root != 0:
        del nodes[0]
    return Dnnf(nodes, root, c.var_count)


def binarize_and_leafify(c: NnfCircuit) -> Dnnf:
    if check_decomposable(c) is not None:
        raise ValueError("input circuit is not decomposable")
    return leafify(binarize(c))


@dataclass
class EdgeClassification:
    """Per-AND light/heavy children plus AND counts.

    ``m[u]`` counts the AND nodes of the sub-DAG rooted at ``u`` including
    ``u`` itself; ``m_below[u]`` excludes ``u``.
    """

    m: dict[int, int]
    m_below: dict[int, int]
    light: dict[int, int]
    heavy: dict[int, int]

    def tag(self, u: int, v: int) -> str:
        if u in self.light:
            if self.light[u] == v:
                return "light"
            if self.heavy[u] == v:
                return "heavy"
        return "neutral"


def _descendants(d: Dnnf) -> dict[int, frozenset[int]]:
    desc: dict[int, frozenset[int]] = {}
    for u in sorted(d.nodes):
        s = {u}
        for k in d.children(u):
            s |= desc[k]
        desc[u] = frozenset(s)
    return desc


def classify_edges(d: Dnnf) -> EdgeClassification:
    desc = _descendants(d)
    ands = set(d.and_nodes)
    m = {u: len(desc[u] & ands) for u in d.nodes}
    m_below = {u: m[u] - (u in ands) for u in d.nodes}
    light, heavy = {}, {}
    for u in sorted(ands):
        _, l, r = d.nodes[u]
        if m[l] > m[r]:
            l, r = r, l
        light[u], heavy[u] = l, r
    return EdgeClassification(m, m_below, light, heavy)


def light_sets(d: Dnnf, cls: EdgeClassification, limit: int | None = None) -> dict[int, set[frozenset[int]]]:
    """S(u): the light-edge sets of all root-to-u paths."""
    S: dict[int, set[frozenset[int]]] = {u: set() for u in d.nodes}
    S[d.root].add(frozenset())
    total = 1
    for u in sorted(d.nodes, reverse=True):
        if not S[u]:
            continue
        for k in d.children(u):
            if cls.light.get(u) == k and d.nodes[u][0] == AND:
                new = {s | {u} for s in S[u]}
            else:
                new = S[u]
            before = len(S[k])
            S[k] |= new
            total += len(S[k]) - before
            if limit is not None and total > limit:
                raise SizeLimitExceeded(f"more than {limit} light-edge sets")
    return S


def max_light_depth(d: Dnnf, cls: EdgeClassification) -> int:
    """L: the largest number of light edges on a root-to-leaf path."""
    best: dict[int, int] = {}
    for u in sorted(d.nodes):
        n = d.nodes[u]
        if n[0] == AND:
            best[u] = max(best[cls.light[u]] + 1, best[cls.heavy[u]])
        else:
            best[u] = max((best[k] for k in d.children(u)), default=0)
    return best[d.root]


@dataclass
class Conversion:
    fbdd: OrFbdd
    pairs: dict[int, tuple[int, frozenset[int]]]   # output id -> (u, s)
    dnnf: Dnnf
    classification: EdgeClassification
    N: int
    M: int
    L: int
    edge_types: dict[tuple[int, int], int] = field(default_factory=dict)

    @property
    def actual(self) -> int:
        return len(self.pairs)

    @property
    def bound(self) -> int:
        return size_bound(self.N, self.M, self.L)[0]


def size_bound(N: int, M: int, L: int) -> tuple[int, float]:
    """``N * M**L`` (exact, with 0**0 == 1) and ``N * 2**(log2(N)**2)``."""
    if N < 1 or M < 0 or L < 0:
        raise ValueError("need N >= 1, M >= 0, L >= 0")
    exact = N * M ** L
    try:
        quasi = N * 2.0 ** (math.log2(N) ** 2)
    except OverflowError:
        quasi = math.inf
    return exact, quasi


def convert(c: NnfCircuit | Dnnf, limit: int | None = None) -> Conversion:
    """Build the OR-FBDD by forward closure from ``(root, {})``.

    Edge types: 1 pushes a light edge, 2 follows a neutral edge, 3 pops a
    light edge from a 1-sink copy and jumps to the heavy sibling.
    """
    d = c if isinstance(c, Dnnf) else binarize_and_leafify(c)
    cls = classify_edges(d)
    S = light_sets(d, cls, limit)
    desc = _descendants(d)

    ids: dict[tuple[int, frozenset[int]], int] = {}
    out_edges: dict[int, list[tuple[int, int]]] = {}
    queue: deque[tuple[int, frozenset[int]]] = deque()

    def node_id(pair) -> int:
        i = ids.get(pair)
        if i is None:
            i = len(ids)
            if limit is not None and i >= limit:
                raise SizeLimitExceeded(f"more than {limit} output nodes")
            ids[pair] = i
            queue.append(pair)
        return i

    node_id((d.root, frozenset()))
    while queue:
        pair = queue.popleft()
        u, s = pair
        me = ids[pair]
        n = d.nodes[u]
        edges: list[tuple[int, int]] = []
        if n[0] == AND:
            edges.append((node_id((cls.light[u], s | {u})), 1))
        elif n[0] in (OR, DEC):
            for k in d.children(u):
                edges.append((node_id((k, s)), 2))
        elif n[0] == SINK1:
            for z in sorted(s):
                rest = s - {z}
                if u in desc[cls.light[z]] and rest in S[z]:
                    edges.append((node_id((cls.heavy[z], rest)), 3))
        out_edges[me] = edges

    nodes: dict[int, tuple] = {}
    edge_types: dict[tuple[int, int], int] = {}
    for (u, s), i in ids.items():
        n = d.nodes[u]
        kids = [k for k, _ in out_edges[i]]
        for k, t in out_edges[i]:
            edge_types[(i, k)] = t
        if n[0] == DEC:
            nodes[i] = ("N", n[1], kids[0], kids[1])
        elif n[0] == AND:
            nodes[i] = ("P", kids[0])
        elif n[0] == OR:
            nodes[i] = ("O", tuple(kids))
        elif n[0] == SINK0:
            nodes[i] = ("S0",)
        elif not s:
            nodes[i] = ("S1",)
        elif len(kids) == 1:
            nodes[i] = ("P", kids[0])
        else:
            # several (or no) admissible pops: a nondeterministic choice
            nodes[i] = ("O", tuple(kids))
    pairs = {i: p for p, i in ids.items()}
    return Conversion(OrFbdd(nodes, 0), pairs, d, cls, N=len(d.nodes),
                      M=len(d.and_nodes), L=max_light_depth(d, cls), edge_types=edge_types)


# ---------------------------------------------------------------- traces

def accepting_trace(conv: Conversion, a: Mapping[int, bool]) -> list[tuple[int, frozenset[int]]] | None:
    """Some root-to-1-sink path of the output consistent with ``a``, as
    ``(u, s)`` pairs; ``None`` when ``a`` is rejected."""
    f = conv.fbdd
    memo: dict[int, list[int] | None] = {}
    for i in f.topological():
        n = f.nodes[i]
        if n[0] == "S1":
            memo[i] = [i]
        elif n[0] == "S0":
            memo[i] = None
        elif n[0] == "N":
            nxt = memo[n[3] if a[n[1]] else n[2]]
            memo[i] = None if nxt is None else [i] + nxt
        else:
            memo[i] = None
            for k in f.children(i):
                if memo[k] is not None:
                    memo[i] = [i] + memo[k]
                    break
    path = memo[f.root]
    return None if path is None else [conv.pairs[i] for i in path]


@dataclass(frozen=True)
class StackViolation:
    step: int
    detail: str


def check_stack_discipline(trace: Sequence[tuple[int, frozenset[int]]]) -> StackViolation | None:
    """Check that the light-edge sets along a trace behave like a stack.

    Each step keeps the set, adds one new edge (push) or removes one edge
    (pop); pops must remove the most recent unpopped push.  The trace must
    start and end with the empty set.  Steps that change more than one
    element are malformed and raise ``ValueError``.
    """
    if not trace:
        raise ValueError("empty trace")
    sets = [frozenset(s) for _, s in trace]
    if sets[0]:
        return StackViolation(0, "trace does not start from the empty set")
    stack: list[int] = []
    for i in range(1, len(sets)):
        prev, cur = sets[i - 1], sets[i]
        added, removed = cur - prev, prev - cur
        if len(added) + len(removed) > 1:
            raise ValueError(f"step {i}: set changes by more than one edge")
        if added:
            stack.append(next(iter(added)))
        elif removed:
            e = next(iter(removed))
            if not stack or stack[-1] != e:
                return StackViolation(i, f"popped {e} but top of stack is {stack[-1] if stack else None}")
            stack.pop()
    if sets[-1]:
        return StackViolation(len(sets) - 1, "trace ends with pending light edges")
    return None
