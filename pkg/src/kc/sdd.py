"""Sentential decision diagrams over a vtree, with restriction/pruning.

Node tuples::

    ("F",) / ("T",)                      constants, ids 0 and 1 in a manager
    ("L", leaf_vertex, literal)          literal at a vtree leaf
    ("D", vertex, ((prime, sub), ...))   decision node at an internal vertex

Decision nodes are normalized: primes sit exactly at the left child of the
node's vertex and subs at the right child.  Constants may sit at any
vertex.  No trimming is done, so ``{(T, s)}`` stays a decision node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from kc.circuit import (ORACLE_CAP, And, CircuitBuilder, Const, Lit, NnfCircuit,
                        TruthTable, var_columns)
from kc.errors import SizeLimitExceeded, UnassignedVariable
from kc.vtree import Vtree, prune_vtree

FALSE, TRUE = 0, 1


class Sdd:
    """An SDD rooted at ``root`` inside a node table.

    ``nodes`` is anything indexable by node id (a manager's list, or a dict
    for loaded and restricted diagrams).
    """

    def __init__(self, nodes, root: int, vtree: Vtree, pruned: bool = False):
        self.nodes = nodes
        self.root = root
        self.vtree = vtree
        self.pruned = pruned

    def __repr__(self) -> str:
        kind = "PrunedSdd" if self.pruned else "Sdd"
        return f"<{kind} root={self.root} size={self.size()}>"

    def node(self, i: int) -> tuple:
        return self.nodes[i]

    def reachable(self) -> list[int]:
        seen = {self.root}
        stack = [self.root]
        while stack:
            n = self.nodes[stack.pop()]
            if n[0] == "D":
                for p, s in n[2]:
                    for c in (p, s):
                        if c not in seen:
                            seen.add(c)
                            stack.append(c)
        return sorted(seen)

    def size(self) -> int:
        """Circle and box nodes of the graph (terminals included)."""
        ids = self.reachable()
        return len(ids) + sum(len(self.nodes[i][2]) for i in ids if self.nodes[i][0] == "D")

    def size_circle_only(self) -> int:
        return len(self.reachable())

    def decision_count(self) -> int:
        return sum(1 for i in self.reachable() if self.nodes[i][0] == "D")

    def labels(self) -> dict[int, tuple]:
        """Label of every reachable node: kind plus vertex (and literal)."""
        out = {}
        for i in self.reachable():
            n = self.nodes[i]
            out[i] = n[:2] if n[0] == "D" else n
        return out

    def placements(self) -> dict[int, set[int]]:
        """Map node id -> vtree vertices at which it occurs in the graph."""
        out: dict[int, set[int]] = {}
        seen = set()
        stack = [(self.root, self.vtree.root)]
        while stack:
            pair = stack.pop()
            if pair in seen:
                continue
            seen.add(pair)
            i, v = pair
            out.setdefault(i, set()).add(v)
            n = self.nodes[i]
            if n[0] == "D" and v in self.vtree.nodes and not self.vtree.is_leaf(v):
                left, right = self.vtree.left(v), self.vtree.right(v)
                for p, s in n[2]:
                    stack.append((p, left))
                    stack.append((s, right))
        return out

    def evaluate(self, a: Mapping[int, bool], node: int | None = None) -> bool:
        memo: dict[int, bool] = {}

        def ev(i: int) -> bool:
            if i in memo:
                return memo[i]
            n = self.nodes[i]
            if n[0] == "T":
                r = True
            elif n[0] == "F":
                r = False
            elif n[0] == "L":
                var = abs(n[2])
                if var not in a:
                    raise UnassignedVariable(var)
                r = bool(a[var]) == (n[2] > 0)
            else:
                r = any(ev(p) and ev(s) for p, s in n[2])
            memo[i] = r
            return r

        return ev(self.root if node is None else node)

    def tables(self, var_order: Sequence[int], ids: Iterable[int] | None = None) -> dict[int, np.ndarray]:
        """Vectorised truth tables of the sub-DAGs below ``ids`` (default root)."""
        cols = var_columns(var_order)
        size = 1 << len(var_order)
        memo: dict[int, np.ndarray] = {}

        def tab(i: int) -> np.ndarray:
            if i in memo:
                return memo[i]
            n = self.nodes[i]
            if n[0] == "T":
                r = np.ones(size, dtype=bool)
            elif n[0] == "F":
                r = np.zeros(size, dtype=bool)
            elif n[0] == "L":
                var = abs(n[2])
                if var not in cols:
                    raise UnassignedVariable(var)
                r = cols[var] if n[2] > 0 else ~cols[var]
            else:
                r = np.zeros(size, dtype=bool)
                for p, s in n[2]:
                    r = r | (tab(p) & tab(s))
            memo[i] = r
            return r

        for i in (self.root,) if ids is None else ids:
            tab(i)
        return memo

    def truth_table(self, var_order: Sequence[int] | None = None) -> TruthTable:
        order = tuple(sorted(self.vtree.variables)) if var_order is None else tuple(var_order)
        return TruthTable(order, self.tables(order)[self.root].copy())

    def as_circuit(self, var_count: int | None = None) -> NnfCircuit:
        """The SDD read as a d-DNNF (circle = OR, box = AND)."""
        b = CircuitBuilder(var_count or max(self.vtree.variables, default=0))
        mapped: dict[int, int] = {}
        for i in self.reachable():
            n = self.nodes[i]
            if n[0] == "T":
                mapped[i] = b.true()
            elif n[0] == "F":
                mapped[i] = b.false()
            elif n[0] == "L":
                mapped[i] = b.lit(n[2])
            else:
                mapped[i] = b.or_(*(b.and_(mapped[p], mapped[s]) for p, s in n[2]))
        return b.build(mapped[self.root])


class SddManager:
    """Bottom-up apply over one vtree; structurally identical nodes share an id.

    ``compress`` merges elements with equal subs (off by default).
    ``node_limit`` aborts construction once the table grows past it and
    ``op_limit`` once uncached apply calls have paired up that many
    elements.
    """

    def __init__(self, vtree: Vtree, compress: bool = False, node_limit: int | None = None,
                 op_limit: int | None = None):
        self.vtree = vtree
        self.compress = compress
        self.node_limit = node_limit
        self.op_limit = op_limit
        self.ops = 0
        self.nodes: list[tuple] = [("F",), ("T",)]
        self._unique: dict[tuple, int] = {("F",): FALSE, ("T",): TRUE}
        self._cache: dict[tuple, int] = {}
        self._neg: dict[int, int] = {FALSE: TRUE, TRUE: FALSE}

    def _make(self, node: tuple) -> int:
        nid = self._unique.get(node)
        if nid is None:
            nid = len(self.nodes)
            if self.node_limit is not None and nid >= self.node_limit:
                raise SizeLimitExceeded(f"SDD manager exceeded {self.node_limit} nodes")
            self.nodes.append(node)
            self._unique[node] = nid
        return nid

    def sdd(self, root: int) -> Sdd:
        return Sdd(self.nodes, root, self.vtree)

    def decision(self, v: int, elements: Iterable[tuple[int, int]]) -> int:
        elements = [(p, s) for p, s in elements if p != FALSE]
        if self.compress:
            by_sub: dict[int, int] = {}
            for p, s in elements:
                by_sub[s] = self._apply(by_sub[s], p, "or") if s in by_sub else p
            elements = [(p, s) for s, p in by_sub.items()]
        if not elements or all(s == FALSE for _, s in elements):
            return FALSE
        if all(s == TRUE for _, s in elements):
            return TRUE
        return self._make(("D", v, tuple(sorted(elements))))

    def literal(self, lit: int, v: int | None = None) -> int:
        """The literal normalized for vertex ``v`` (default: vtree root)."""
        v = self.vtree.root if v is None else v
        var = abs(lit)
        vt = self.vtree
        if var not in vt.vars_of(v):
            raise ValueError(f"variable {var} is not below vertex {v}")
        if vt.is_leaf(v):
            return self._make(("L", v, lit))
        left, right = vt.left(v), vt.right(v)
        if var in vt.vars_of(left):
            x = self.literal(lit, left)
            return self.decision(v, [(x, TRUE), (self.literal(-lit, left), FALSE)])
        return self.decision(v, [(TRUE, self.literal(lit, right))])

    def negate(self, a: int) -> int:
        r = self._neg.get(a)
        if r is not None:
            return r
        n = self.nodes[a]
        if n[0] == "L":
            r = self._make(("L", n[1], -n[2]))
        else:
            r = self.decision(n[1], [(p, self.negate(s)) for p, s in n[2]])
        self._neg[a] = r
        self._neg[r] = a
        return r

    def conjoin(self, a: int, b: int) -> int:
        return self._apply(a, b, "and")

    def disjoin(self, a: int, b: int) -> int:
        return self._apply(a, b, "or")

    def _apply(self, a: int, b: int, op: str) -> int:
        if op == "and":
            if a == FALSE or b == FALSE:
                return FALSE
            if a == TRUE:
                return b
            if b == TRUE or a == b:
                return a
        else:
            if a == TRUE or b == TRUE:
                return TRUE
            if a == FALSE:
                return b
            if b == FALSE or a == b:
                return a
        if a > b:
            a, b = b, a
        key = (op, a, b)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        na, nb = self.nodes[a], self.nodes[b]
        self.ops += len(na[2]) * len(nb[2]) if na[0] == "D" else 1
        if self.op_limit is not None and self.ops > self.op_limit:
            raise SizeLimitExceeded(f"SDD apply exceeded {self.op_limit} steps")
        if na[0] == "L":
            if nb[0] != "L" or nb[1] != na[1] or nb[2] != -na[2]:
                raise ValueError("apply on literals normalized for different vertices")
            r = FALSE if op == "and" else TRUE
        else:
            if nb[0] != "D" or nb[1] != na[1]:
                raise ValueError("apply on decisions normalized for different vertices")
            elements = []
            for p, s in na[2]:
                for q, t in nb[2]:
                    prime = self._apply(p, q, "and")
                    if prime != FALSE:
                        elements.append((prime, self._apply(s, t, op)))
            r = self.decision(na[1], elements)
        self._cache[key] = r
        return r

    def compile(self, circuit: NnfCircuit) -> Sdd:
        missing = {abs(n.lit) for n in circuit.nodes if isinstance(n, Lit)} - self.vtree.variables
        if missing:
            raise ValueError(f"circuit variables {sorted(missing)} are not in the vtree")
        mapped: dict[int, int] = {}
        for i in circuit.reachable():
            node = circuit.nodes[i]
            if isinstance(node, Const):
                mapped[i] = TRUE if node.value else FALSE
            elif isinstance(node, Lit):
                mapped[i] = self.literal(node.lit)
            else:
                op = "and" if isinstance(node, And) else "or"
                mapped[i] = self._reduce([mapped[c] for c in node.children], op)
        return self.sdd(mapped[circuit.root])

    def _reduce(self, items: list[int], op: str) -> int:
        """Combine operands pairwise, like a balanced tree."""
        if not items:
            return TRUE if op == "and" else FALSE
        while len(items) > 1:
            nxt = [self._apply(items[k], items[k + 1], op) for k in range(0, len(items) - 1, 2)]
            if len(items) % 2:
                nxt.append(items[-1])
            items = nxt
        return items[0]


def compile_circuit(circuit: NnfCircuit, vtree: Vtree, compress: bool = False,
                    node_limit: int | None = None, op_limit: int | None = None) -> Sdd:
    return SddManager(vtree, compress=compress, node_limit=node_limit,
                      op_limit=op_limit).compile(circuit)


# ---------------------------------------------------------------- restriction

def restrict(s: Sdd, rho: Mapping[int, bool]) -> Sdd:
    """Plug ``rho`` in and simplify: constant gates become terminals, false
    elements are dropped, unreachable nodes disappear.

    Surviving nodes keep their ids and labels, so the result is a subgraph of
    ``s``; it respects ``prune_vtree(s.vtree, rho)``.
    """
    rho = {int(k): bool(v) for k, v in rho.items()}
    pv = prune_vtree(s.vtree, rho.keys())
    memo: dict[int, int] = {}
    table: dict[int, tuple] = {FALSE: ("F",), TRUE: ("T",)}

    def go(i: int) -> int:
        if i in memo:
            return memo[i]
        n = s.nodes[i]
        if n[0] in ("T", "F"):
            r = i
        elif n[0] == "L":
            var = abs(n[2])
            if var in rho:
                r = TRUE if rho[var] == (n[2] > 0) else FALSE
            else:
                r = i
                table[i] = n
        else:
            kept = []
            r = None
            for p, sub in n[2]:
                rp, rs = go(p), go(sub)
                if rp == FALSE or rs == FALSE:
                    continue
                if rp == TRUE and rs == TRUE:
                    r = TRUE
                    break
                kept.append((rp, rs))
            if r is None:
                if kept:
                    r = i
                    table[i] = ("D", n[1], tuple(kept))
                else:
                    r = FALSE
        memo[i] = r
        return r

    root = go(s.root)
    result = Sdd(table, root, pv, pruned=True)
    # drop table entries that ended up unreachable
    keep = set(result.reachable())
    result.nodes = {i: table[i] for i in sorted(keep)}
    return result


# ---------------------------------------------------------------- Sdds(v, alpha)

def sdds_at(s: Sdd, v: int) -> set[int]:
    """Nodes of ``s`` that occur at vtree vertex ``v`` (decision nodes labelled
    ``v``, literals at leaf ``v`` and terminals placed there)."""
    if v not in s.vtree.nodes:
        raise ValueError(f"{v} is not a vertex of the vtree")
    return {i for i, where in s.placements().items() if v in where}


# ---------------------------------------------------------------- validation

@dataclass(frozen=True)
class SddViolation:
    node: int
    kind: str  # vtree-respect | overlap | incomplete
    detail: str = ""


@dataclass
class ValidationReport:
    violations: list[SddViolation]
    unknown: list[int]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(s: Sdd) -> ValidationReport:
    """Structural vtree-respect plus semantic partition checks.

    For pruned SDDs only disjointness of primes is required.
    """
    vt = s.vtree
    violations: list[SddViolation] = []
    unknown: list[int] = []
    for i, where in sorted(s.placements().items()):
        n = s.nodes[i]
        for v in sorted(where):
            if n[0] in ("T", "F"):
                continue
            if v not in vt.nodes or vt.is_stub(v):
                violations.append(SddViolation(i, "vtree-respect", f"non-constant node at stub {v}"))
            elif n[0] == "L":
                if not vt.is_leaf(v) or n[1] != v or vt.var(v) != abs(n[2]):
                    violations.append(SddViolation(i, "vtree-respect", f"literal {n[2]} placed at vertex {v}"))
            elif vt.is_leaf(v) or n[1] != v:
                violations.append(SddViolation(i, "vtree-respect", f"decision labelled {n[1]} placed at vertex {v}"))
            elif not n[2]:
                violations.append(SddViolation(i, "incomplete", "decision node without elements"))
    if violations:
        return ValidationReport(violations, unknown)
    for i in s.reachable():
        n = s.nodes[i]
        if n[0] != "D":
            continue
        left = vt.left(n[1])
        lvars = sorted(vt.vars_of(left))
        if len(lvars) > ORACLE_CAP:
            unknown.append(i)
            continue
        primes = [p for p, _ in n[2]]
        tabs = s.tables(lvars, primes)
        cover = np.zeros(1 << len(lvars), dtype=int)
        for p in primes:
            cover += tabs[p]
        if np.any(cover > 1):
            violations.append(SddViolation(i, "overlap", "primes are not pairwise disjoint"))
        elif not s.pruned and not np.all(cover == 1):
            violations.append(SddViolation(i, "incomplete", "primes do not cover every assignment"))
    return ValidationReport(violations, unknown)


# ---------------------------------------------------------------- shells

@dataclass(frozen=True)
class PairViolation:
    pair: tuple[int, int]


def check_shell_disjointness(s: Sdd, b: int, rho: Mapping[int, bool]) -> PairViolation | None:
    """Check that the restricted nodes found at ``b`` are pairwise disjoint."""
    shell = s.vtree.variables - s.vtree.vars_of(b)
    if set(rho) != set(shell):
        raise ValueError("not a shell restriction: its domain must equal Shell(b)")
    r = restrict(s, rho)
    at_b = sorted(sdds_at(r, b))
    if len(at_b) < 2:
        return None
    bvars = sorted(s.vtree.vars_of(b))
    tabs = r.tables(bvars, at_b)
    for x, y in combinations(at_b, 2):
        if np.any(tabs[x] & tabs[y]):
            return PairViolation((x, y))
    return None


def negate_by_literal_flip(s: Sdd) -> Sdd:
    """Flip the sign of every literal; structure and size are unchanged."""
    nodes = {}
    for i in s.reachable():
        n = s.nodes[i]
        nodes[i] = ("L", n[1], -n[2]) if n[0] == "L" else n
    return Sdd(nodes, s.root, s.vtree, s.pruned)


def sdd_lower_bound_from_cc(c: float) -> int:
    """Smallest size allowed for a CC lower bound ``c`` by ``2^(sqrt(c) - 1)``."""
    if c < 0:
        raise ValueError("communication bound must be non-negative")
    return math.ceil(2 ** (math.sqrt(c) - 1))


# ---------------------------------------------------------------- text format

def dumps_sdd(s: Sdd) -> str:
    ids = s.reachable()
    header = "psdd-pruned" if s.pruned else "sdd"
    lines = [f"{header} {len(ids)}"]
    for i in ids:
        n = s.nodes[i]
        if n[0] in ("F", "T"):
            lines.append(f"{n[0]} {i}")
        elif n[0] == "L":
            lines.append(f"L {i} {n[1]} {n[2]}")
        else:
            flat = " ".join(f"{p} {q}" for p, q in n[2])
            lines.append(f"D {i} {n[1]} {len(n[2])} {flat}")
    return "\n".join(lines) + "\n"


def loads_sdd(text: str, vtree: Vtree | None = None) -> Sdd:
    """Parse the SDD text format.  Without a vtree, a placeholder right-linear
    vtree over the mentioned variables is attached (good for counting and
    evaluation, not for validation)."""
    header = None
    nodes: dict[int, tuple] = {}
    last = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        tok = raw.split()
        if not tok or tok[0] == "c":
            continue
        try:
            if header is None:
                if tok[0] not in ("sdd", "psdd-pruned") or len(tok) != 2:
                    raise ValueError("expected header 'sdd <n>' or 'psdd-pruned <n>'")
                header = (tok[0], int(tok[1]))
                continue
            kind, ident = tok[0], int(tok[1])
            if ident in nodes:
                raise ValueError(f"duplicate node id {ident}")
            if kind in ("F", "T") and len(tok) == 2:
                nodes[ident] = (kind,)
            elif kind == "L" and len(tok) == 4:
                nodes[ident] = ("L", int(tok[2]), int(tok[3]))
            elif kind == "D":
                k = int(tok[3])
                flat = [int(t) for t in tok[4:]]
                if len(flat) != 2 * k:
                    raise ValueError("element count mismatch")
                elems = tuple(zip(flat[::2], flat[1::2]))
                for c in flat:
                    if c not in nodes:
                        raise ValueError(f"child {c} must precede its parent")
                nodes[ident] = ("D", int(tok[2]), elems)
            else:
                raise ValueError(f"malformed line {raw!r}")
            last = ident
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if header is None or last is None:
        raise ValueError("missing sdd header or nodes")
    if len(nodes) != header[1]:
        raise ValueError(f"header declares {header[1]} nodes, found {len(nodes)}")
    if vtree is None:
        from kc.vtree import build_vtree
        vs = sorted({abs(n[2]) for n in nodes.values() if n[0] == "L"}) or [1]
        vtree = build_vtree(vs, "right-linear")
    pruned = header[0] == "psdd-pruned"
    return Sdd(nodes, last, vtree, pruned)
