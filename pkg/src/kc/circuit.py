"""NNF circuits, structural checks and the brute-force truth-table oracle.

Nodes are stored in topological order (children before parents); the root
is the last node unless stated otherwise.  Variables are positive integers
``1..var_count``; literals are signed integers in the DIMACS convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from kc.errors import DeterminismError, OracleCapError, UnassignedVariable

ORACLE_CAP = 24


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Lit:
    lit: int

    @property
    def var(self) -> int:
        return abs(self.lit)


@dataclass(frozen=True)
class And:
    children: tuple[int, ...]


@dataclass(frozen=True)
class Or:
    children: tuple[int, ...]


Node = Union[Const, Lit, And, Or]


@dataclass(frozen=True)
class Violation:
    """Witness of a failed structural check."""

    node: int
    kind: str
    var: int | None = None
    detail: str = ""


@dataclass(frozen=True)
class Unknown:
    node: int
    reason: str


@dataclass(frozen=True)
class NnfCircuit:
    nodes: tuple[Node, ...]
    var_count: int
    root: int = -1

    def __post_init__(self):
        if self.root < 0:
            object.__setattr__(self, "root", len(self.nodes) - 1)
        if not 0 <= self.root < len(self.nodes):
            raise ValueError("root id out of range")
        for i, node in enumerate(self.nodes):
            if isinstance(node, Lit):
                if node.lit == 0 or node.var > self.var_count:
                    raise ValueError(f"node {i}: literal {node.lit} outside 1..{self.var_count}")
            elif isinstance(node, (And, Or)):
                for c in node.children:
                    if not 0 <= c < i:
                        raise ValueError(f"node {i}: child {c} does not precede its parent")

    def __len__(self) -> int:
        return len(self.nodes)

    def reachable(self) -> list[int]:
        """Ids reachable from the root, ascending (hence topological)."""
        seen = {self.root}
        stack = [self.root]
        while stack:
            node = self.nodes[stack.pop()]
            if isinstance(node, (And, Or)):
                for c in node.children:
                    if c not in seen:
                        seen.add(c)
                        stack.append(c)
        return sorted(seen)

    def supports(self) -> dict[int, frozenset[int]]:
        sup: dict[int, frozenset[int]] = {}
        for i in self.reachable():
            node = self.nodes[i]
            if isinstance(node, Lit):
                sup[i] = frozenset((node.var,))
            elif isinstance(node, Const):
                sup[i] = frozenset()
            else:
                sup[i] = frozenset().union(*(sup[c] for c in node.children))
        return sup

    def edge_count(self) -> int:
        return sum(len(n.children) for n in self.nodes if isinstance(n, (And, Or)))


class CircuitBuilder:
    """Incremental construction with structural sharing of identical nodes."""

    def __init__(self, var_count: int = 0):
        self.var_count = var_count
        self.nodes: list[Node] = []
        self._unique: dict[Node, int] = {}

    def _add(self, node: Node) -> int:
        nid = self._unique.get(node)
        if nid is None:
            nid = len(self.nodes)
            self.nodes.append(node)
            self._unique[node] = nid
        return nid

    def true(self) -> int:
        return self._add(Const(True))

    def false(self) -> int:
        return self._add(Const(False))

    def lit(self, lit: int) -> int:
        self.var_count = max(self.var_count, abs(lit))
        return self._add(Lit(lit))

    def and_(self, *children: int) -> int:
        return self._add(And(tuple(children)))

    def or_(self, *children: int) -> int:
        return self._add(Or(tuple(children)))

    def build(self, root: int | None = None) -> NnfCircuit:
        return NnfCircuit(tuple(self.nodes), self.var_count,
                          len(self.nodes) - 1 if root is None else root)


def evaluate(circuit: NnfCircuit, a: Mapping[int, bool]) -> bool:
    val: dict[int, bool] = {}
    for i in circuit.reachable():
        node = circuit.nodes[i]
        if isinstance(node, Const):
            val[i] = node.value
        elif isinstance(node, Lit):
            if node.var not in a:
                raise UnassignedVariable(node.var)
            val[i] = bool(a[node.var]) == (node.lit > 0)
        elif isinstance(node, And):
            val[i] = all(val[c] for c in node.children)
        else:
            val[i] = any(val[c] for c in node.children)
    return val[circuit.root]


# ---------------------------------------------------------------- truth tables

@dataclass(frozen=True, eq=False)
class TruthTable:
    """Bit ``i`` is the value under the assignment where ``var_order[k]`` is
    bit ``k`` of ``i``."""

    var_order: tuple[int, ...]
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(set(self.var_order)) != len(self.var_order):
            raise ValueError("duplicate variable in var_order")
        if self.bits.shape != (1 << len(self.var_order),):
            raise ValueError("bit-vector length must be 2^n")

    def __eq__(self, other):
        if not isinstance(other, TruthTable):
            return NotImplemented
        return self.var_order == other.var_order and np.array_equal(self.bits, other.bits)

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def value(self, a: Mapping[int, bool]) -> bool:
        idx = sum(1 << k for k, v in enumerate(self.var_order) if a[v])
        return bool(self.bits[idx])


def check_cap(n: int) -> None:
    if n > ORACLE_CAP:
        raise OracleCapError(f"{n} variables exceeds the {ORACLE_CAP}-variable oracle cap")


def var_columns(var_order: Sequence[int]) -> dict[int, np.ndarray]:
    """Per-variable value columns over all 2^n assignments of ``var_order``."""
    check_cap(len(var_order))
    idx = np.arange(1 << len(var_order), dtype=np.int64)
    return {v: ((idx >> k) & 1).astype(bool) for k, v in enumerate(var_order)}


def node_tables(circuit: NnfCircuit, columns: Mapping[int, np.ndarray],
                ids: Iterable[int] | None = None) -> dict[int, np.ndarray]:
    """Vectorised evaluation of every node in ``ids`` (default: reachable)."""
    size = len(next(iter(columns.values()))) if columns else 1
    ones = np.ones(size, dtype=bool)
    out: dict[int, np.ndarray] = {}
    for i in (circuit.reachable() if ids is None else sorted(ids)):
        node = circuit.nodes[i]
        if isinstance(node, Const):
            out[i] = ones if node.value else ~ones
        elif isinstance(node, Lit):
            if node.var not in columns:
                raise UnassignedVariable(node.var)
            col = columns[node.var]
            out[i] = col if node.lit > 0 else ~col
        elif isinstance(node, And):
            acc = ones
            for c in node.children:
                acc = acc & out[c]
            out[i] = acc
        else:
            acc = ~ones
            for c in node.children:
                acc = acc | out[c]
            out[i] = acc
    return out


def truth_table(circuit: NnfCircuit, var_order: Sequence[int] | None = None) -> TruthTable:
    order = tuple(range(1, circuit.var_count + 1)) if var_order is None else tuple(var_order)
    check_cap(len(order))
    tables = node_tables(circuit, var_columns(order))
    return TruthTable(order, tables[circuit.root].copy())


def table_from_function(fn, var_order: Sequence[int]) -> TruthTable:
    """Tabulate ``fn(assignment_dict) -> bool`` by enumeration."""
    order = tuple(var_order)
    check_cap(len(order))
    bits = np.zeros(1 << len(order), dtype=bool)
    for i in range(len(bits)):
        bits[i] = bool(fn({v: bool((i >> k) & 1) for k, v in enumerate(order)}))
    return TruthTable(order, bits)


def restrict_table(tt: TruthTable, rho: Mapping[int, bool]) -> TruthTable:
    """Table of f|rho over the unassigned variables (order preserved)."""
    bits = tt.bits
    order = list(tt.var_order)
    # peel variables from the highest bit down so earlier axes keep their meaning
    arr = bits.reshape([2] * len(order)) if order else bits
    keep = []
    index = []
    for k in reversed(range(len(order))):
        v = order[k]
        if v in rho:
            index.append(int(bool(rho[v])))
        else:
            index.append(slice(None))
            keep.append(v)
    if order:
        arr = arr[tuple(index)]
    remaining = tuple(reversed(keep))
    return TruthTable(remaining, np.ascontiguousarray(arr).reshape(-1) if remaining
                      else np.array([bool(arr)], dtype=bool))


def count_models_brute(circuit: NnfCircuit) -> int:
    return truth_table(circuit).count()


# ---------------------------------------------------------------- structure

def check_decomposable(circuit: NnfCircuit) -> Violation | None:
    sup = circuit.supports()
    for i in circuit.reachable():
        node = circuit.nodes[i]
        if not isinstance(node, And):
            continue
        seen: set[int] = set()
        for c in node.children:
            shared = seen & sup[c]
            if shared:
                return Violation(i, "shared-variable", min(shared))
            seen |= sup[c]
    return None


def check_deterministic(circuit: NnfCircuit) -> Violation | Unknown | None:
    """Pairwise satisfiability test of OR children via the oracle.

    Returns the first violation found; ``Unknown`` if some OR node's support
    exceeds the oracle cap and no violation was found elsewhere.
    """
    sup = circuit.supports()
    unknown: Unknown | None = None
    everything = sorted(sup[circuit.root])
    # extra free variables do not change whether two children share a model,
    # so one pass over the whole support serves every OR node when it fits
    shared = None
    if len(everything) <= ORACLE_CAP:
        shared = node_tables(circuit, var_columns(everything), set(circuit.reachable()))
    for i in circuit.reachable():
        node = circuit.nodes[i]
        if not isinstance(node, Or) or len(node.children) < 2:
            continue
        if shared is not None:
            tables = shared
        elif len(sup[i]) > ORACLE_CAP:
            unknown = unknown or Unknown(i, f"support of {len(sup[i])} variables exceeds oracle cap")
            continue
        else:
            order = sorted(sup[i])
            tables = node_tables(circuit, var_columns(order), _subcircuit_ids(circuit, i))
        seen = np.zeros_like(tables[node.children[0]])
        for k, b in enumerate(node.children):
            if np.any(seen & tables[b]):
                a = next(a for a in node.children[:k] if np.any(tables[a] & tables[b]))
                return Violation(i, "overlap", detail=f"children {a} and {b} share a model")
            seen = seen | tables[b]
    return unknown


def _subcircuit_ids(circuit: NnfCircuit, top: int) -> set[int]:
    seen = {top}
    stack = [top]
    while stack:
        node = circuit.nodes[stack.pop()]
        if isinstance(node, (And, Or)):
            for c in node.children:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
    return seen


def restrict_circuit(circuit: NnfCircuit, rho: Mapping[int, bool]) -> NnfCircuit:
    """Plug in a partial assignment and propagate constants."""
    b = CircuitBuilder(circuit.var_count)
    mapped: dict[int, int] = {}
    for i in circuit.reachable():
        node = circuit.nodes[i]
        if isinstance(node, Const):
            mapped[i] = b.true() if node.value else b.false()
        elif isinstance(node, Lit):
            if node.var in rho:
                mapped[i] = b.true() if bool(rho[node.var]) == (node.lit > 0) else b.false()
            else:
                mapped[i] = b.lit(node.lit)
        else:
            kids = [mapped[c] for c in node.children]
            absorbing = Const(not isinstance(node, And))
            if any(b.nodes[k] == absorbing for k in kids):
                mapped[i] = b._add(absorbing)
                continue
            kids = [k for k in kids if b.nodes[k] != Const(isinstance(node, And))]
            if not kids:
                mapped[i] = b._add(Const(isinstance(node, And)))
            elif len(kids) == 1:
                mapped[i] = kids[0]
            else:
                mapped[i] = b.and_(*kids) if isinstance(node, And) else b.or_(*kids)
    return b.build(mapped[circuit.root])


# ---------------------------------------------------------------- counting

def weighted_count_ddnnf(circuit: NnfCircuit, weights: Mapping[int, tuple[float, float]] | None = None,
                         assume_deterministic: bool = False):
    """Weighted model count of a d-DNNF over variables ``1..var_count``.

    ``weights[v] = (w_pos, w_neg)``; unlisted variables get ``(1, 1)``.  The
    circuit is smoothed on the fly: an OR child missing variable ``v`` that a
    sibling mentions is multiplied by ``w_pos(v) + w_neg(v)``.  Integer weights
    give an exact integer result.
    """
    if (v := check_decomposable(circuit)) is not None:
        raise DeterminismError(f"circuit is not decomposable at node {v.node} (variable {v.var})")
    if not assume_deterministic:
        det = check_deterministic(circuit)
        if isinstance(det, Violation):
            raise DeterminismError(f"OR node {det.node} is not deterministic: {det.detail}")
        if isinstance(det, Unknown):
            raise DeterminismError(f"determinism of OR node {det.node} unknown: {det.reason}")
    weights = weights or {}

    def w(v: int) -> tuple:
        return weights.get(v, (1, 1))

    def free(vs: Iterable[int]):
        acc = 1
        for v in vs:
            wp, wn = w(v)
            acc = acc * (wp + wn)
        return acc

    sup = circuit.supports()
    val: dict[int, object] = {}
    for i in circuit.reachable():
        node = circuit.nodes[i]
        if isinstance(node, Const):
            val[i] = 1 if node.value else 0
        elif isinstance(node, Lit):
            wp, wn = w(node.var)
            val[i] = wp if node.lit > 0 else wn
        elif isinstance(node, And):
            acc = 1
            for c in node.children:
                acc = acc * val[c]
            val[i] = acc
        else:
            acc = 0
            for c in node.children:
                acc = acc + val[c] * free(sup[i] - sup[c])
            val[i] = acc
    rest = set(range(1, circuit.var_count + 1)) - sup[circuit.root]
    return val[circuit.root] * free(sorted(rest))


# ---------------------------------------------------------------- NNF format

def dumps_nnf(circuit: NnfCircuit) -> str:
    ids = circuit.reachable()
    if ids[-1] != circuit.root:
        # root must be written last; the reachable set is topological so the
        # root is already the maximum unless the array was built oddly
        ids.remove(circuit.root)
        ids.append(circuit.root)
    renum = {old: new for new, old in enumerate(ids)}
    lines = []
    edges = 0
    for old in ids:
        node = circuit.nodes[old]
        if isinstance(node, Const):
            lines.append("T" if node.value else "F")
        elif isinstance(node, Lit):
            lines.append(f"L {node.lit}")
        else:
            kids = " ".join(str(renum[c]) for c in node.children)
            edges += len(node.children)
            if isinstance(node, And):
                lines.append(f"A {len(node.children)} {kids}".rstrip())
            else:
                lines.append(f"O 0 {len(node.children)} {kids}".rstrip())
    header = f"nnf {len(ids)} {edges} {circuit.var_count}"
    return "\n".join([header, *lines]) + "\n"


def loads_nnf(text: str) -> NnfCircuit:
    header = None
    nodes: list[Node] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        tok = raw.split()
        if not tok or tok[0] == "c":
            continue
        try:
            if header is None:
                if tok[0] != "nnf" or len(tok) != 4:
                    raise ValueError("expected header 'nnf <nodes> <edges> <vars>'")
                header = tuple(int(t) for t in tok[1:])
                continue
            kind = tok[0]
            if kind == "L":
                nodes.append(Lit(int(tok[1])))
            elif kind == "A":
                k = int(tok[1])
                kids = tuple(int(t) for t in tok[2:2 + k])
                if len(kids) != k or len(tok) != 2 + k:
                    raise ValueError("child count mismatch")
                nodes.append(And(kids))
            elif kind == "O":
                k = int(tok[2])
                kids = tuple(int(t) for t in tok[3:3 + k])
                if len(kids) != k or len(tok) != 3 + k:
                    raise ValueError("child count mismatch")
                nodes.append(Or(kids))
            elif kind in ("T", "F"):
                nodes.append(Const(kind == "T"))
            else:
                raise ValueError(f"unknown node type {kind!r}")
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if header is None:
        raise ValueError("missing nnf header")
    if len(nodes) != header[0]:
        raise ValueError(f"header declares {header[0]} nodes, found {len(nodes)}")
    edges = sum(len(n.children) for n in nodes if isinstance(n, (And, Or)))
    if edges != header[1]:
        raise ValueError(f"header declares {header[1]} edges, found {edges}")
    return NnfCircuit(tuple(nodes), header[2])
