"""Vtrees, pruned vtrees, balanced-vertex search and shell partitions."""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

LEAF, INTERNAL, STUB = "L", "I", "S"


class Vtree:
    """Full binary tree over variables.

    ``nodes`` maps a vertex id to ``("L", var)``, ``("I", left, right)`` or,
    for pruned vtrees only, ``("S",)``.  Ids are arbitrary integers but every
    child id is smaller than its parent's.
    """

    allow_stubs = False

    def __init__(self, nodes: dict[int, tuple], root: int):
        self.nodes = dict(nodes)
        self.root = root
        self._check()

    def _check(self) -> None:
        if self.root not in self.nodes:
            raise ValueError("root is not a vertex")
        seen_vars: set[int] = set()
        reached = 0
        stack = [self.root]
        while stack:
            v = stack.pop()
            reached += 1
            node = self.nodes[v]
            if node[0] == INTERNAL:
                for c in node[1:]:
                    if c not in self.nodes or c >= v:
                        raise ValueError(f"vertex {v}: bad child {c}")
                    stack.append(c)
            elif node[0] == LEAF:
                if node[1] in seen_vars:
                    raise ValueError(f"variable {node[1]} appears on two leaves")
                seen_vars.add(node[1])
            elif node[0] == STUB:
                if not self.allow_stubs:
                    raise ValueError("stub leaf in an unpruned vtree")
            else:
                raise ValueError(f"unknown vertex kind {node[0]!r}")
        if reached != len(self.nodes):
            raise ValueError("vtree has vertices unreachable from the root or shared children")

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_sexpr()})"

    def is_leaf(self, v: int) -> bool:
        return self.nodes[v][0] != INTERNAL

    def is_stub(self, v: int) -> bool:
        return self.nodes[v][0] == STUB

    def left(self, v: int) -> int:
        return self.nodes[v][1]

    def right(self, v: int) -> int:
        return self.nodes[v][2]

    def var(self, v: int) -> int:
        node = self.nodes[v]
        if node[0] != LEAF:
            raise ValueError(f"vertex {v} is not a variable leaf")
        return node[1]

    @cached_property
    def parent(self) -> dict[int, int]:
        par = {}
        for v, node in self.nodes.items():
            if node[0] == INTERNAL:
                par[node[1]] = v
                par[node[2]] = v
        return par

    @cached_property
    def _vars(self) -> dict[int, frozenset[int]]:
        out: dict[int, frozenset[int]] = {}
        for v in sorted(self.nodes):
            node = self.nodes[v]
            if node[0] == LEAF:
                out[v] = frozenset((node[1],))
            elif node[0] == STUB:
                out[v] = frozenset()
            else:
                out[v] = out[node[1]] | out[node[2]]
        return out

    def vars_of(self, v: int) -> frozenset[int]:
        return self._vars[v]

    @property
    def variables(self) -> frozenset[int]:
        return self._vars[self.root]

    @cached_property
    def leaf_of(self) -> dict[int, int]:
        return {node[1]: v for v, node in self.nodes.items() if node[0] == LEAF}

    def vertices(self) -> list[int]:
        return sorted(self.nodes)

    def internal_vertices(self) -> list[int]:
        return [v for v in sorted(self.nodes) if self.nodes[v][0] == INTERNAL]

    def to_sexpr(self, v: int | None = None) -> str:
        v = self.root if v is None else v
        node = self.nodes[v]
        if node[0] == LEAF:
            return str(node[1])
        if node[0] == STUB:
            return "stub"
        return f"({self.to_sexpr(node[1])},{self.to_sexpr(node[2])})"

    def shape(self, v: int | None = None):
        """Nested-tuple view (vars at leaves, ``None`` for stubs)."""
        v = self.root if v is None else v
        node = self.nodes[v]
        if node[0] == LEAF:
            return node[1]
        if node[0] == STUB:
            return None
        return (self.shape(node[1]), self.shape(node[2]))


class PrunedVtree(Vtree):
    allow_stubs = True


def from_shape(shape) -> Vtree:
    """Build a vtree from nested pairs of variable ids, e.g. ``((1, 2), 3)``."""
    nodes: dict[int, tuple] = {}

    def walk(s) -> int:
        if isinstance(s, int):
            nodes[len(nodes)] = (LEAF, s)
            return len(nodes) - 1
        a, b = s
        left, right = walk(a), walk(b)
        nodes[len(nodes)] = (INTERNAL, left, right)
        return len(nodes) - 1

    root = walk(shape)
    return Vtree(nodes, root)


def build_vtree(vars: Sequence[int], shape: str = "balanced", seed: int | None = None) -> Vtree:
    """Vtree of the given shape over ``vars`` (in the given order).

    ``balanced`` puts the first ``n // 2`` variables on the left;
    ``random`` shuffles the variables and picks every split point uniformly,
    reproducibly from ``seed``.
    """
    vars = list(vars)
    if not vars:
        raise ValueError("cannot build a vtree over no variables")
    if len(set(vars)) != len(vars):
        raise ValueError("duplicate variables")
    if shape == "balanced":
        def split(vs):
            if len(vs) == 1:
                return vs[0]
            h = len(vs) // 2
            return (split(vs[:h]), split(vs[h:]))
        tree = split(vars)
    elif shape == "right-linear":
        tree = vars[-1]
        for v in reversed(vars[:-1]):
            tree = (v, tree)
    elif shape == "left-linear":
        tree = vars[0]
        for v in vars[1:]:
            tree = (tree, v)
    elif shape == "random":
        if seed is None:
            raise ValueError("random vtrees need a seed")
        rng = random.Random(seed)
        rng.shuffle(vars)

        def rsplit(vs):
            if len(vs) == 1:
                return vs[0]
            h = rng.randint(1, len(vs) - 1)
            return (rsplit(vs[:h]), rsplit(vs[h:]))
        tree = rsplit(vars)
    else:
        raise ValueError(f"unknown vtree shape {shape!r}")
    return from_shape(tree)


def find_balanced_vertex(v: Vtree) -> int:
    """Descend into the larger child (left on ties) while the current vertex
    holds more than two thirds of the variables."""
    total = len(v.variables)
    if total < 2:
        raise ValueError("a (1/3,2/3) vertex needs a vtree over at least 2 variables")
    cur = v.root
    while 3 * len(v.vars_of(cur)) > 2 * total:
        left, right = v.left(cur), v.right(cur)
        cur = left if len(v.vars_of(left)) >= len(v.vars_of(right)) else right
    return cur


@dataclass(frozen=True)
class ShellPartition:
    vertex: int
    B: frozenset[int]
    A: frozenset[int]


def shell_partition(v: Vtree, b: int) -> ShellPartition:
    if b not in v.nodes:
        raise ValueError(f"{b} is not a vertex of the vtree")
    inside = v.vars_of(b)
    return ShellPartition(b, inside, v.variables - inside)


def shell_vertex(v: Vtree, A: Iterable[int]) -> int | None:
    """The vertex whose shell is exactly ``A`` (highest such vertex), if any."""
    A = frozenset(A)
    target = v.variables - A
    best = None
    for u in v.vertices():
        if v.vars_of(u) == target and (best is None or u > best):
            best = u
    return best


def prune_vtree(v: Vtree, A: Iterable[int]) -> PrunedVtree:
    """Replace every maximal subtree whose variables all lie in ``A`` by a stub.

    Surviving vertices and stubs keep their ids.
    """
    A = frozenset(A)
    if not A <= v.variables:
        raise ValueError(f"variables {sorted(A - v.variables)} are not in the vtree")
    out: dict[int, tuple] = {}
    stack = [v.root]
    while stack:
        u = stack.pop()
        vs = v.vars_of(u)
        if vs and vs <= A:
            out[u] = (STUB,)
            continue
        node = v.nodes[u]
        out[u] = node
        if node[0] == INTERNAL:
            stack.extend(node[1:])
    return PrunedVtree(out, v.root)


# ---------------------------------------------------------------- text format

def dumps_vtree(v: Vtree) -> str:
    pruned = any(n[0] == STUB for n in v.nodes.values())
    lines = [f"{'pvtree' if pruned else 'vtree'} {len(v.nodes)}"]
    for u in v.vertices():
        node = v.nodes[u]
        if node[0] == LEAF:
            lines.append(f"L {u} {node[1]}")
        elif node[0] == STUB:
            lines.append(f"S {u}")
        else:
            lines.append(f"I {u} {node[1]} {node[2]}")
    return "\n".join(lines) + "\n"


def loads_vtree(text: str) -> Vtree:
    header = None
    nodes: dict[int, tuple] = {}
    order: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        tok = raw.split()
        if not tok or tok[0] == "c":
            continue
        try:
            if header is None:
                if tok[0] not in ("vtree", "pvtree") or len(tok) != 2:
                    raise ValueError("expected header 'vtree <n>' or 'pvtree <n>'")
                header = (tok[0], int(tok[1]))
                continue
            kind, ident = tok[0], int(tok[1])
            if ident in nodes:
                raise ValueError(f"duplicate vertex id {ident}")
            if kind == "L" and len(tok) == 3:
                nodes[ident] = (LEAF, int(tok[2]))
            elif kind == "I" and len(tok) == 4:
                l, r = int(tok[2]), int(tok[3])
                if l not in nodes or r not in nodes:
                    raise ValueError("children must precede their parent")
                nodes[ident] = (INTERNAL, l, r)
            elif kind == "S" and len(tok) == 2:
                if header[0] != "pvtree":
                    raise ValueError("stub in a plain vtree file")
                nodes[ident] = (STUB,)
            else:
                raise ValueError(f"malformed line {raw!r}")
            order.append(ident)
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if header is None:
        raise ValueError("missing vtree header")
    if len(nodes) != header[1]:
        raise ValueError(f"header declares {header[1]} vertices, found {len(nodes)}")
    cls = PrunedVtree if header[0] == "pvtree" else Vtree
    return cls(nodes, order[-1])
