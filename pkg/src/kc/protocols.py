"""Two-party communication: protocols read off SDDs, rectangle covers, the
clique-vs-independent-set simulation, and exact cover search on tiny matrices.

Inputs are indexed by integers: bit ``k`` of a row index is the value of
``row_vars[k]`` and likewise for columns.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from kc.circuit import NnfCircuit, TruthTable, truth_table
from kc.errors import OracleCapError
from kc.sdd import FALSE, TRUE, Sdd, restrict, sdds_at
from kc.vtree import ShellPartition

ENUM_CAP = 20


def _assignment(vars: Sequence[int], index: int) -> dict[int, bool]:
    return {v: bool(index >> k & 1) for k, v in enumerate(vars)}


# ---------------------------------------------------------------- matrices

@dataclass
class CommMatrix:
    row_vars: tuple[int, ...]
    col_vars: tuple[int, ...]
    bits: np.ndarray

    def __post_init__(self):
        self.row_vars = tuple(self.row_vars)
        self.col_vars = tuple(self.col_vars)
        self.bits = np.asarray(self.bits, dtype=bool)
        want = (1 << len(self.row_vars), 1 << len(self.col_vars))
        if self.bits.shape != want:
            raise ValueError(f"matrix shape {self.bits.shape} does not match partition {want}")

    @classmethod
    def from_table(cls, tt: TruthTable, row_vars: Sequence[int], col_vars: Sequence[int]) -> "CommMatrix":
        row_vars, col_vars = tuple(row_vars), tuple(col_vars)
        if set(row_vars) & set(col_vars) or set(row_vars) | set(col_vars) != set(tt.var_order):
            raise ValueError("row and column variables must partition the table's variables")
        n = len(tt.var_order)
        pos = {v: k for k, v in enumerate(tt.var_order)}
        # reshape so that axis j is variable var_order[n - 1 - j]; then put
        # row variables (most significant last) before column variables
        arr = tt.bits.reshape([2] * n) if n else tt.bits.reshape(())
        axes = [n - 1 - pos[v] for v in reversed(row_vars)] + [n - 1 - pos[v] for v in reversed(col_vars)]
        arr = arr.transpose(axes) if n else arr
        return cls(row_vars, col_vars, arr.reshape(1 << len(row_vars), 1 << len(col_vars)))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "CommMatrix":
        """Matrix from explicit 0/1 rows; dimensions must be powers of two."""
        bits = np.array(rows, dtype=bool)
        r, c = bits.shape
        if r & (r - 1) or c & (c - 1):
            raise ValueError("matrix dimensions must be powers of two")
        return cls(tuple(range(1, r.bit_length())), tuple(range(r.bit_length(), r.bit_length() + c.bit_length() - 1)), bits)

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def ones(self) -> int:
        return int(self.bits.sum())


def loads_matrix(text: str) -> CommMatrix:
    """Read a 0/1 grid: one row per line, optional whitespace between digits,
    ``#`` comments and an optional ``P1 <cols> <rows>`` header."""
    rows: list[list[int]] = []
    lines = [l.split("#", 1)[0].strip() for l in text.splitlines()]
    lines = [l for l in lines if l]
    if lines and lines[0].startswith("P1"):
        lines = lines[1:]
        if lines and all(tok.isdigit() and len(tok) > 1 or len(lines[0].split()) == 2 for tok in lines[0].split()):
            lines = lines[1:]
    for l in lines:
        digits = [ch for ch in l if ch in "01"]
        if len(digits) != len(l.replace(" ", "")):
            raise ValueError(f"bad matrix row {l!r}")
        rows.append([int(ch) for ch in digits])
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("matrix rows must be non-empty and of equal length")
    return CommMatrix.from_rows(rows)


@dataclass(frozen=True)
class Rectangle:
    rows: frozenset[int]
    cols: frozenset[int]

    def __len__(self) -> int:
        return len(self.rows) * len(self.cols)

    def intersects(self, other: "Rectangle") -> bool:
        return bool(self.rows & other.rows) and bool(self.cols & other.cols)


@dataclass
class RectangleCover:
    rects: list[Rectangle]
    disjoint: bool = True

    def __len__(self) -> int:
        return len(self.rects)

    def problems(self, M: CommMatrix) -> list[str]:
        """Empty when every rectangle is 1-monochromatic, the union is the
        1-set and (if flagged) the rectangles are pairwise disjoint."""
        out = []
        hits = np.zeros(M.shape, dtype=int)
        for k, r in enumerate(self.rects):
            rows, cols = sorted(r.rows), sorted(r.cols)
            block = M.bits[np.ix_(rows, cols)] if rows and cols else np.ones((0, 0), dtype=bool)
            if not block.all():
                out.append(f"rectangle {k} contains a 0 entry")
            if rows and cols:
                hits[np.ix_(rows, cols)] += 1
        if np.any((hits == 0) & M.bits):
            out.append("some 1 entry is not covered")
        if self.disjoint and np.any(hits > 1):
            out.append("rectangles overlap")
        return out

    def is_disjoint(self) -> bool:
        return not any(a.intersects(b) for a, b in combinations(self.rects, 2))


def row_class_cover(M: CommMatrix) -> RectangleCover:
    """Disjoint 1-cover with one rectangle per distinct nonzero row pattern."""
    groups: dict[bytes, list[int]] = {}
    for r in range(M.shape[0]):
        if M.bits[r].any():
            groups.setdefault(M.bits[r].tobytes(), []).append(r)
    rects = [Rectangle(frozenset(rows), frozenset(np.flatnonzero(M.bits[rows[0]]).tolist()))
             for rows in groups.values()]
    return RectangleCover(rects, True)


# ---------------------------------------------------------------- SDD protocol

@dataclass
class UnambiguousProtocol:
    """Alice (shell variables) names a node found at the split vertex after
    restricting by her input; Bob accepts iff that node is true on his input."""

    sdd: Sdd
    vertex: int
    alice_vars: tuple[int, ...]
    bob_vars: tuple[int, ...]
    alphabet: tuple[int, ...]

    @property
    def cost(self) -> int:
        return math.ceil(math.log2(len(self.alphabet))) if len(self.alphabet) > 1 else 0

    def alice(self, rho: Mapping[int, bool]) -> frozenset[int]:
        r = restrict(self.sdd, {v: rho[v] for v in self.alice_vars})
        if r.root == TRUE:
            # the chain above the split vertex collapsed: f is true on Bob's side
            return frozenset({TRUE})
        return frozenset(i for i in sdds_at(r, self.vertex) if i != FALSE)

    def bob(self, message: int, phi: Mapping[int, bool]) -> bool:
        return self.sdd.evaluate({v: phi[v] for v in self.bob_vars}, node=message)

    def accepted(self, rho: Mapping[int, bool], phi: Mapping[int, bool]) -> list[int]:
        return sorted(m for m in self.alice(rho) if self.bob(m, phi))

    def run(self, rho: Mapping[int, bool], phi: Mapping[int, bool]) -> bool:
        return bool(self.accepted(rho, phi))

    def bob_tables(self) -> dict[int, np.ndarray]:
        """Bob's acceptance vector (indexed by column) for every message."""
        tabs = self.sdd.tables(self.bob_vars, self.alphabet)
        return {m: tabs[m] for m in self.alphabet}


def extract_unambiguous(s: Sdd, part: ShellPartition) -> UnambiguousProtocol:
    vt = s.vtree
    if part.vertex not in vt.nodes:
        raise ValueError(f"vertex {part.vertex} is not in the SDD's vtree")
    if frozenset(part.B) != vt.vars_of(part.vertex) or frozenset(part.A) != vt.variables - vt.vars_of(part.vertex):
        raise ValueError("not a shell partition of the SDD's vtree")
    alphabet = tuple(sorted(sdds_at(s, part.vertex) | {TRUE}))
    return UnambiguousProtocol(s, part.vertex, tuple(sorted(part.A)), tuple(sorted(part.B)), alphabet)


def protocol_matrix(p: UnambiguousProtocol) -> CommMatrix:
    tt = p.sdd.truth_table(p.alice_vars + p.bob_vars)
    return CommMatrix.from_table(tt, p.alice_vars, p.bob_vars)


def cover_from_protocol(p: UnambiguousProtocol) -> RectangleCover:
    """One rectangle per message: the rows whose Alice set contains it times
    the columns where Bob accepts it.  Empty rectangles are left out."""
    n = len(p.alice_vars) + len(p.bob_vars)
    if n > ENUM_CAP:
        raise OracleCapError(f"{n} variables exceed the enumeration cap of {ENUM_CAP}")
    bob = p.bob_tables()
    rows_of: dict[int, set[int]] = {m: set() for m in p.alphabet}
    for r in range(1 << len(p.alice_vars)):
        for m in p.alice(_assignment(p.alice_vars, r)):
            rows_of.setdefault(m, set()).add(r)
    rects = []
    for m in sorted(rows_of):
        cols = frozenset(np.flatnonzero(bob[m]).tolist()) if m in bob else frozenset()
        if rows_of[m] and cols:
            rects.append(Rectangle(frozenset(rows_of[m]), cols))
    cover = RectangleCover(rects, disjoint=True)
    cover.disjoint = cover.is_disjoint()
    return cover


# ---------------------------------------------------------------- clique vs independent set

@dataclass
class CliqueIsInstance:
    """Graph over the rectangles of a disjoint cover: two rectangles are
    adjacent when they share a row.  Row ``r`` gives the clique of rectangles
    meeting it, column ``c`` the independent set of rectangles meeting it."""

    cover: RectangleCover
    closed_nbhd: list[frozenset[int]]
    rows: int
    cols: int

    @classmethod
    def build(cls, cover: RectangleCover, M: CommMatrix) -> "CliqueIsInstance":
        rs = cover.rects
        nb = [frozenset(j for j in range(len(rs)) if rs[i].rows & rs[j].rows or i == j)
              for i in range(len(rs))]
        return cls(cover, nb, M.shape[0], M.shape[1])

    def clique(self, r: int) -> frozenset[int]:
        return frozenset(i for i, rect in enumerate(self.cover.rects) if r in rect.rows)

    def independent_set(self, c: int) -> frozenset[int]:
        return frozenset(i for i, rect in enumerate(self.cover.rects) if c in rect.cols)

    def consistent_with(self, M: CommMatrix) -> bool:
        for r in range(self.rows):
            K = self.clique(r)
            if any(not K <= self.closed_nbhd[i] for i in K):
                return False
            for c in range(self.cols):
                I = self.independent_set(c)
                if any(self.closed_nbhd[i] & I - {i} for i in I):
                    return False
                if bool(K & I) != bool(M.bits[r, c]):
                    return False
        return True


@dataclass(frozen=True)
class Round:
    k: int               # iteration number, starting at 1
    sender: str          # "A" or "B"
    msg: int | None      # node id, None for "no such node"
    bits: int
    nodes_left: int


@dataclass
class Transcript:
    answer: bool
    rounds: list[Round]
    reply_bits: int

    @property
    def comm_bits(self) -> int:
        """Bits exchanged before the answer: node-or-none messages plus
        one-bit membership replies."""
        return sum(r.bits for r in self.rounds) + self.reply_bits

    @property
    def total_bits(self) -> int:
        return self.comm_bits + 1

    @property
    def iterations(self) -> int:
        return len({r.k for r in self.rounds})

    @property
    def iteration_comm_bits(self) -> int:
        """Per-iteration accounting: each elimination iteration is charged
        once, ceil(log2(n + 1)) for its n live nodes; no answer bit."""
        first: dict[int, int] = {}
        for r in self.rounds:
            first.setdefault(r.k, r.bits)
        return sum(first.values())

    @property
    def iteration_bits(self) -> int:
        return self.iteration_comm_bits + 1


@dataclass
class DeterministicProtocol:
    instance: CliqueIsInstance
    g: int

    @property
    def bound(self) -> int:
        return (self.g + 1) ** 2

    def run(self, r: int, c: int) -> Transcript:
        """Run the node-elimination loop on row ``r`` (Alice) and column
        ``c`` (Bob).  Ties go to the lowest node id."""
        inst = self.instance
        K, I = inst.clique(r), inst.independent_set(c)
        nodes = frozenset(range(len(inst.cover)))
        rounds: list[Round] = []
        replies = 0
        it = 0
        while True:
            it += 1
            n = len(nodes)
            if n == 0:
                return Transcript(False, rounds, replies)
            cost = math.ceil(math.log2(n + 1))
            nb = {u: inst.closed_nbhd[u] & nodes for u in nodes}
            cand = sorted(u for u in K & nodes if 2 * len(nb[u]) < n)
            if cand:
                u = cand[0]
                # Bob replies "u is in I" (answer 1) or "continue"
                if u in I:
                    rounds.append(Round(it, "A", u, cost, n))
                    return Transcript(True, rounds, replies)
                # K lies inside N[u]; u itself is not in I
                nodes = nb[u] - {u}
                rounds.append(Round(it, "A", u, cost, len(nodes)))
                if not nodes & I:
                    return Transcript(False, rounds, replies)
                replies += 1
                continue
            rounds.append(Round(it, "A", None, cost, n))
            cand = sorted(v for v in I & nodes if 2 * len(nb[v]) >= n)
            if not cand:
                rounds.append(Round(it, "B", None, cost, n))
                return Transcript(False, rounds, replies)
            v = cand[0]
            if v in K:
                rounds.append(Round(it, "B", v, cost, n))
                return Transcript(True, rounds, replies)
            # I avoids N[v] except v, and v is not in K
            nodes = nodes - nb[v]
            rounds.append(Round(it, "B", v, cost, len(nodes)))
            if not nodes & K:
                return Transcript(False, rounds, replies)
            replies += 1


def yannakakis(cover: RectangleCover, M: CommMatrix) -> DeterministicProtocol:
    if not cover.is_disjoint():
        raise ValueError("the cover must consist of pairwise disjoint rectangles")
    bad = [p for p in cover.problems(M) if p != "rectangles overlap"]
    if bad:
        raise ValueError("; ".join(bad))
    g = math.ceil(math.log2(len(cover))) if len(cover) > 1 else 0
    return DeterministicProtocol(CliqueIsInstance.build(cover, M), g)


@dataclass
class YannakakisReport:
    correct: bool
    max_bits: int
    max_total_bits: int
    bound: int
    max_iteration_bits: int
    max_iterations: int
    halving_ok: bool


def check_protocol(p: DeterministicProtocol, M: CommMatrix) -> YannakakisReport:
    """Run every entry; check answers, the (g+1)^2 budget and that each
    shrinking round leaves at most half of the nodes it started from."""
    correct, halving = True, True
    max_bits = max_total = max_iter_bits = max_iters = 0
    rows, cols = M.shape
    for r in range(rows):
        for c in range(cols):
            t = p.run(r, c)
            correct &= t.answer == bool(M.bits[r, c])
            max_bits = max(max_bits, t.comm_bits)
            max_total = max(max_total, t.total_bits)
            max_iter_bits = max(max_iter_bits, t.iteration_bits)
            max_iters = max(max_iters, t.iterations)
            before = len(p.instance.cover)
            for rd in t.rounds:
                if rd.msg is not None and rd.nodes_left != before:
                    halving &= 2 * rd.nodes_left <= before
                before = rd.nodes_left
    return YannakakisReport(correct, max_bits, max_total, p.bound, max_iter_bits, max_iters, halving)


def random_disjoint_cover(rng: random.Random, g: int, rows: int = 8, cols: int = 8) -> tuple[RectangleCover, CommMatrix]:
    """A matrix built as the union of at most 2**g disjoint random rectangles."""
    rects: list[Rectangle] = []
    for _ in range(rng.randint(1, 2 ** g)):
        for _attempt in range(20):
            R = frozenset(rng.sample(range(rows), rng.randint(1, rows)))
            C = frozenset(rng.sample(range(cols), rng.randint(1, cols)))
            cand = Rectangle(R, C)
            if not any(cand.intersects(o) for o in rects):
                rects.append(cand)
                break
    bits = np.zeros((rows, cols), dtype=bool)
    for rect in rects:
        bits[np.ix_(sorted(rect.rows), sorted(rect.cols))] = True
    M = CommMatrix(tuple(range(1, rows.bit_length())),
                   tuple(range(rows.bit_length(), rows.bit_length() + cols.bit_length() - 1)), bits)
    return RectangleCover(rects, True), M


# ---------------------------------------------------------------- exact search

def _maximal_rectangles_containing(bits: np.ndarray, r: int, c: int, live: np.ndarray) -> list[tuple[int, int]]:
    """All maximal all-live rectangles (as row/column bitmasks) through (r, c)."""
    rows, cols = bits.shape
    out = set()
    col_ok = [j for j in range(cols) if live[r, j]]
    # enumerate column subsets containing c among the live columns of row r
    others = [j for j in col_ok if j != c]
    for k in range(1 << len(others)):
        cm = 1 << c
        for t, j in enumerate(others):
            if k >> t & 1:
                cm |= 1 << j
        rm = 0
        for i in range(rows):
            if all(live[i, j] for j in range(cols) if cm >> j & 1):
                rm |= 1 << i
        # maximal in columns for this row set
        full = 0
        for j in range(cols):
            if all(live[i, j] for i in range(rows) if rm >> i & 1):
                full |= 1 << j
        out.add((rm, full))
    return sorted(out)


def min_disjoint_cover(M: CommMatrix) -> int:
    """Minimum number of pairwise disjoint 1-rectangles partitioning the 1s.

    Exhaustive: the first uncovered 1 must lie in some rectangle made of
    uncovered 1s; we branch over all such rectangles with memoization.
    """
    rows, cols = M.shape
    if rows > 8 or cols > 8:
        raise OracleCapError("exact search is limited to 8 x 8 matrices")
    bits = M.bits

    @lru_cache(maxsize=None)
    def best(live_mask: int) -> int:
        if live_mask == 0:
            return 0
        live = np.array([[live_mask >> (i * cols + j) & 1 for j in range(cols)] for i in range(rows)], dtype=bool)
        first = (live_mask & -live_mask).bit_length() - 1
        r, c = divmod(first, cols)
        res = math.inf
        seen = set()
        for rm, cm in _maximal_rectangles_containing(bits, r, c, live):
            # every sub-rectangle through (r, c) is a candidate; enumerate
            # those generated by subsets of rows/cols of the maximal one
            rlist = [i for i in range(rows) if rm >> i & 1 and i != r]
            clist = [j for j in range(cols) if cm >> j & 1 and j != c]
            for a in range(1 << len(rlist)):
                for b in range(1 << len(clist)):
                    mask = 0
                    rr = [r] + [rlist[t] for t in range(len(rlist)) if a >> t & 1]
                    cc = [c] + [clist[t] for t in range(len(clist)) if b >> t & 1]
                    for i in rr:
                        for j in cc:
                            mask |= 1 << (i * cols + j)
                    if mask in seen:
                        continue
                    seen.add(mask)
                    res = min(res, 1 + best(live_mask & ~mask))
        return res

    start = 0
    for i in range(rows):
        for j in range(cols):
            if bits[i, j]:
                start |= 1 << (i * cols + j)
    return int(best(start))


def unambiguous_cc_exact(M: CommMatrix) -> int:
    """ceil(log2) of the minimum disjoint 1-cover (0 for at most one rectangle)."""
    if M.ones() > 64:
        raise OracleCapError("exact search is limited to 64 ones")
    k = min_disjoint_cover(M)
    return math.ceil(math.log2(k)) if k > 1 else 0


def fooling_set_bound(M: CommMatrix, limit: int = 2000) -> int:
    """Size of a greedily grown 1-fooling set (a lower bound on the number of
    rectangles of any 1-cover)."""
    ones = list(zip(*np.nonzero(M.bits)))
    best = 0
    for start in range(min(len(ones), limit)):
        chosen = [ones[start]]
        for cand in ones:
            r, c = cand
            if all(not (M.bits[r, c2] and M.bits[r2, c]) for r2, c2 in chosen):
                chosen.append(cand)
        best = max(best, len(chosen))
    return best


# ---------------------------------------------------------------- partition scan

@dataclass
class PartitionResult:
    alice: tuple[int, ...]
    bob: tuple[int, ...]
    fooling: int
    exact_cover: int | None
    unambiguous_cc: int | None
    send_all_bits: int


@dataclass
class ScanReport:
    delta: float
    results: list[PartitionResult] = field(default_factory=list)
    sampled: bool = False

    @property
    def min_unambiguous_cc(self) -> int | None:
        vals = [r.unambiguous_cc for r in self.results if r.unambiguous_cc is not None]
        return min(vals) if vals else None

    @property
    def min_fooling_log(self) -> int:
        return min(math.ceil(math.log2(r.fooling)) if r.fooling > 1 else 0 for r in self.results)

    @property
    def min_send_all(self) -> int:
        return min(r.send_all_bits for r in self.results)


def best_partition_scan(f: NnfCircuit, delta: float, max_partitions: int = 200,
                        seed: int = 0, exact: bool = True) -> ScanReport:
    """Look at every variable split whose smaller side holds at least
    ``delta * n`` variables (a seeded sample above ``max_partitions``)."""
    if not 0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    vars_ = list(range(1, f.var_count + 1))
    n = len(vars_)
    if n > 12:
        raise OracleCapError("partition scans are limited to 12 variables")
    lo = math.ceil(delta * n - 1e-12)
    sizes = [k for k in range(max(lo, 1), n - max(lo, 1) + 1)]
    if not sizes:
        raise ValueError(f"no split of {n} variables has both sides of size >= {delta} * {n}")
    splits = [A for k in sizes for A in combinations(vars_, k)]
    report = ScanReport(delta)
    if len(splits) > max_partitions:
        splits = random.Random(seed).sample(splits, max_partitions)
        report.sampled = True
    tt = truth_table(f, vars_)
    for A in splits:
        B = tuple(v for v in vars_ if v not in A)
        M = CommMatrix.from_table(tt, A, B)
        exact_k = cc = None
        if exact and M.shape[0] <= 8 and M.shape[1] <= 8 and M.ones() <= 64:
            exact_k = min_disjoint_cover(M)
            cc = math.ceil(math.log2(exact_k)) if exact_k > 1 else 0
        report.results.append(PartitionResult(
            tuple(A), B, fooling_set_bound(M), exact_k, cc, min(len(A), len(B)) + 1))
    return report
