"""Hard function families and the grid-partition combinatorics used to
reduce them to set disjointness.

Variable numbering (fixed, so files and partitions are reproducible):

* ``h0``, ``qv``, ``h1``: ``R_i`` is ``i``; ``S_i_j`` is ``m + (i-1)*m + j``;
  ``T_j`` is ``m + m*m + j``.
* ``hk``: ``R`` block, then ``S^1`` ... ``S^k`` blocks (row-major), then ``T``.
  All ``k*m*m + 2*m`` variables are declared whatever the level, so the
  numbering does not depend on ``l``.
* ``perm`` / ``rowcol``: ``x_i_j`` is ``(i-1)*n + j``.
* ``disjointness``: ``x_i`` is ``i``, ``y_i`` is ``n + i``.
* ``shifted_eq``: ``x`` block, ``y`` block, then ``ceil(log2 n)`` shift bits
  ``z_t`` (least significant first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import permutations
from typing import Iterable, Mapping

from kc.circuit import CircuitBuilder, NnfCircuit

FAMILIES = ("h0", "qv", "h1", "hk", "perm", "rowcol", "disjointness", "shifted_eq")


@dataclass
class FamilyInstance:
    family: str
    params: dict
    circuit: NnfCircuit
    names: dict[str, int]

    def var(self, name: str) -> int:
        return self.names[name]

    def name_of(self, var: int) -> str:
        for k, v in self.names.items():
            if v == var:
                return k
        raise KeyError(var)

    def dumps_names(self) -> str:
        return "".join(f"{k} {v}\n" for k, v in sorted(self.names.items(), key=lambda kv: kv[1]))


def grid_names(m: int) -> dict[str, int]:
    names = {f"R_{i}": i for i in range(1, m + 1)}
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            names[f"S_{i}_{j}"] = m + (i - 1) * m + j
    for j in range(1, m + 1):
        names[f"T_{j}"] = m + m * m + j
    return names


def _check_pos(name: str, value: int) -> None:
    if not isinstance(value, int) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")


def _grid_family(kind: str, m: int) -> FamilyInstance:
    _check_pos("m", m)
    names = grid_names(m)
    b = CircuitBuilder(m * m + 2 * m)
    terms = []
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            R, S, T = names[f"R_{i}"], names[f"S_{i}_{j}"], names[f"T_{j}"]
            if kind == "h0":
                terms.append(b.and_(b.lit(R), b.lit(S), b.lit(T)))
            else:
                terms.append(b.and_(b.lit(R), b.lit(S)))
                terms.append(b.and_(b.lit(S), b.lit(T)))
                if kind == "qv":
                    terms.append(b.and_(b.lit(R), b.lit(T)))
    b.or_(*terms)
    return FamilyInstance(kind, {"m": m}, b.build(), names)


def hk_names(k: int, m: int) -> dict[str, int]:
    names = {f"R_{i}": i for i in range(1, m + 1)}
    base = m
    for level in range(1, k + 1):
        for i in range(1, m + 1):
            for j in range(1, m + 1):
                names[f"S{level}_{i}_{j}"] = base + (i - 1) * m + j
        base += m * m
    for j in range(1, m + 1):
        names[f"T_{j}"] = base + j
    return names


def _hk(k: int, level: int, m: int) -> FamilyInstance:
    _check_pos("k", k)
    _check_pos("m", m)
    if not 0 <= level <= k:
        raise ValueError(f"level must lie in 0..{k}")
    names = hk_names(k, m)
    b = CircuitBuilder(k * m * m + 2 * m)
    terms = []
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            if level == 0:
                pair = (names[f"R_{i}"], names[f"S1_{i}_{j}"])
            elif level == k:
                pair = (names[f"S{k}_{i}_{j}"], names[f"T_{j}"])
            else:
                pair = (names[f"S{level}_{i}_{j}"], names[f"S{level + 1}_{i}_{j}"])
            terms.append(b.and_(b.lit(pair[0]), b.lit(pair[1])))
    b.or_(*terms)
    return FamilyInstance("hk", {"k": k, "level": level, "m": m}, b.build(), names)


def _matrix_names(n: int) -> dict[str, int]:
    return {f"x_{i}_{j}": (i - 1) * n + j for i in range(1, n + 1) for j in range(1, n + 1)}


def _perm(n: int) -> FamilyInstance:
    """One AND per permutation: exactly the permuted cells are 1."""
    _check_pos("n", n)
    names = _matrix_names(n)
    b = CircuitBuilder(n * n)
    terms = []
    for sigma in permutations(range(1, n + 1)):
        lits = []
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                v = names[f"x_{i}_{j}"]
                lits.append(b.lit(v if sigma[i - 1] == j else -v))
        terms.append(b.and_(*lits))
    b.or_(*terms)
    return FamilyInstance("perm", {"n": n}, b.build(), names)


def _rowcol(n: int) -> FamilyInstance:
    _check_pos("n", n)
    names = _matrix_names(n)
    b = CircuitBuilder(n * n)
    terms = []
    for i in range(1, n + 1):
        terms.append(b.and_(*(b.lit(-names[f"x_{i}_{j}"]) for j in range(1, n + 1))))
    for j in range(1, n + 1):
        terms.append(b.and_(*(b.lit(-names[f"x_{i}_{j}"]) for i in range(1, n + 1))))
    b.or_(*terms)
    return FamilyInstance("rowcol", {"n": n}, b.build(), names)


def _disjointness(n: int) -> FamilyInstance:
    """The intersection test OR_i (x_i AND y_i)."""
    _check_pos("n", n)
    names = {f"x_{i}": i for i in range(1, n + 1)}
    names.update({f"y_{i}": n + i for i in range(1, n + 1)})
    b = CircuitBuilder(2 * n)
    b.or_(*(b.and_(b.lit(i), b.lit(n + i)) for i in range(1, n + 1)))
    return FamilyInstance("disjointness", {"n": n}, b.build(), names)


def shift_bits(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


def _shifted_eq(n: int) -> FamilyInstance:
    """y equals x cyclically shifted by the number written in z:
    ``y_k == x_{((k - 1 - s) mod n) + 1}``.  Shift values of n or more wrap
    around modulo n."""
    _check_pos("n", n)
    nz = shift_bits(n)
    names = {f"x_{i}": i for i in range(1, n + 1)}
    names.update({f"y_{i}": n + i for i in range(1, n + 1)})
    names.update({f"z_{t}": 2 * n + t for t in range(1, nz + 1)})
    b = CircuitBuilder(2 * n + nz)
    terms = []
    for s in range(1 << nz):
        lits = [b.lit(names[f"z_{t + 1}"] if s >> t & 1 else -names[f"z_{t + 1}"]) for t in range(nz)]
        for k in range(1, n + 1):
            x = names[f"x_{(k - 1 - s) % n + 1}"]
            y = names[f"y_{k}"]
            lits.append(b.or_(b.and_(b.lit(x), b.lit(y)), b.and_(b.lit(-x), b.lit(-y))))
        terms.append(b.and_(*lits))
    b.or_(*terms)
    return FamilyInstance("shifted_eq", {"n": n}, b.build(), names)


def gen(family: str, size: int, k: int | None = None, level: int | None = None) -> FamilyInstance:
    """Generate a family member.  ``size`` is ``m`` for the grid families and
    ``n`` otherwise; ``hk`` additionally needs ``k`` and ``level``."""
    if family in ("h0", "qv", "h1"):
        return _grid_family(family, size)
    if family == "hk":
        if k is None or level is None:
            raise ValueError("hk needs k and level")
        return _hk(k, level, size)
    if family == "perm":
        return _perm(size)
    if family == "rowcol":
        return _rowcol(size)
    if family == "disjointness":
        return _disjointness(size)
    if family == "shifted_eq":
        return _shifted_eq(size)
    raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")


# ---------------------------------------------------------------- grid partitions

@dataclass(frozen=True)
class GridPartition:
    """Which cells of the m x m grid belong to Alice (the rest are Bob's),
    optionally with the sides of the R and T variables."""

    m: int
    alice: frozenset[tuple[int, int]]
    alice_R: frozenset[int] = frozenset()
    alice_T: frozenset[int] = frozenset()

    @classmethod
    def from_vars(cls, m: int, alice_vars: Iterable[int]) -> "GridPartition":
        A = set(alice_vars)
        names = grid_names(m)
        cells = frozenset((i, j) for i in range(1, m + 1) for j in range(1, m + 1)
                          if names[f"S_{i}_{j}"] in A)
        return cls(m, cells,
                   frozenset(i for i in range(1, m + 1) if names[f"R_{i}"] in A),
                   frozenset(j for j in range(1, m + 1) if names[f"T_{j}"] in A))

    @property
    def bob(self) -> frozenset[tuple[int, int]]:
        return frozenset((i, j) for i in range(1, self.m + 1) for j in range(1, self.m + 1)) - self.alice

    def transpose(self) -> "GridPartition":
        return GridPartition(self.m, frozenset((j, i) for i, j in self.alice), self.alice_T, self.alice_R)


@dataclass(frozen=True)
class WSets:
    rows: frozenset[int]
    cols: frozenset[int]
    delta: Fraction
    bound_ok: bool


def w_sets(p: GridPartition, delta: Fraction | float | None = None) -> WSets:
    """Rows and columns that the partition splits into two nonempty pieces.

    The bound check is ``max(|W_Row|, |W_Col|) >= sqrt(delta) * m`` whenever
    both sides hold at least ``delta * m^2`` cells; without ``delta`` the
    largest admissible value ``min(|A|, |B|) / m^2`` is used.  It is done in
    exact arithmetic by comparing squares.
    """
    m = p.m
    A, B = p.alice, p.bob
    rows = frozenset(i for i in range(1, m + 1)
                     if any((i, j) in A for j in range(1, m + 1)) and any((i, j) in B for j in range(1, m + 1)))
    cols = frozenset(j for j in range(1, m + 1)
                     if any((i, j) in A for i in range(1, m + 1)) and any((i, j) in B for i in range(1, m + 1)))
    small = min(len(A), len(B))
    d = Fraction(small, m * m) if delta is None else Fraction(delta).limit_denominator(10 ** 6)
    if small < d * m * m:
        ok = True  # hypothesis fails, the bound says nothing
    else:
        ok = max(len(rows), len(cols)) ** 2 >= d * m * m
    return WSets(rows, cols, d, ok)


@dataclass
class Reduction:
    """Partial assignment turning a grid family into set disjointness."""

    rho: dict[int, bool]
    transposed: bool
    support: list[int]                     # the rows (or columns) i kept
    pairs: list[tuple[int, int, int, str]] = field(default_factory=list)
    # per kept index: (index, unary var, S var, side of the unary var "A"/"B")

    def residual_terms(self) -> list[tuple[int, int]]:
        return [(u, s) for _, u, s, _ in self.pairs]


def qv_reduction(inst: FamilyInstance, alice_vars: Iterable[int]) -> Reduction:
    """Fix variables so that the formula collapses to ``OR_i R_i S_{i j_i}``
    over the split rows, each conjunct straddling the partition.

    Works on the side with more split lines: rows when ``|W_Row| >= |W_Col|``,
    otherwise columns with the roles of ``R`` and ``T`` exchanged.  The
    non-chosen unary block is set to 0 (to 1 for ``h0``).
    """
    if inst.family not in ("qv", "h1", "h0"):
        raise ValueError("the reduction applies to qv, h1 and h0")
    m = inst.params["m"]
    names = inst.names
    A = frozenset(alice_vars)
    part = GridPartition.from_vars(m, A)
    ws = w_sets(part)
    transposed = len(ws.rows) < len(ws.cols)
    lines = sorted(ws.cols if transposed else ws.rows)
    if not lines:
        raise ValueError("no row or column is split by the partition; no reduction exists")

    def S(i: int, j: int) -> int:
        return names[f"S_{j}_{i}"] if transposed else names[f"S_{i}_{j}"]

    near, far = ("T", "R") if transposed else ("R", "T")
    rho: dict[int, bool] = {}
    far_value = inst.family == "h0"
    for j in range(1, m + 1):
        rho[names[f"{far}_{j}"]] = far_value
    pairs = []
    for i in range(1, m + 1):
        u = names[f"{near}_{i}"]
        if i not in lines:
            rho[u] = False
            continue
        u_side = u in A
        ji = None
        for j in range(1, m + 1):
            sv = S(i, j)
            if (sv in A) == u_side:
                rho[sv] = False
            elif ji is None:
                ji = j
            else:
                rho[sv] = False
        assert ji is not None
        pairs.append((i, u, S(i, ji), "A" if u_side else "B"))
    return Reduction(rho, transposed, lines, pairs)


# ---------------------------------------------------------------- reference bounds

@dataclass
class BoundReport:
    family: str
    param: int
    cc_bound: float | None
    sdd_bound: float | None
    below_hypothesis: bool
    note: str = ""

    def lines(self) -> list[str]:
        out = [f"family {self.family} param {self.param}"]
        if self.cc_bound is not None:
            out.append(f"cc_bound {self.cc_bound:g}")
        if self.sdd_bound is not None:
            out.append(f"sdd_bound {self.sdd_bound:g}")
        if self.below_hypothesis:
            out.append("below m >= 6 hypothesis")
        if self.note:
            out.append(f"note {self.note}")
        return out


def family_bounds(family: str, param: int, k: int | None = None) -> BoundReport:
    """Reference values of the published lower-bound formulas (not facts
    about any particular instance)."""
    if family in ("qv", "h0", "h1"):
        cc = param / 3
        sdd = 2 ** (math.sqrt(param / 3) - 1) if family != "h0" else None
        return BoundReport(family, param, cc, sdd, param < 6)
    if family == "hk":
        if not k:
            raise ValueError("hk needs k")
        cc = param / (9 * k)
        return BoundReport(family, param, cc, 2 ** (math.sqrt(param / k) / 3 - 1), param < 6)
    if family == "disjointness":
        return BoundReport(family, param, None, None, False,
                           f"deterministic cc {param + 1} via send-all")
    if family in ("perm", "rowcol"):
        return BoundReport(family, param, None, None, False, "OR-FBDD size 2^Omega(n), no explicit constant")
    if family == "shifted_eq":
        return BoundReport(family, param, None, None, False, "cc Omega(n), no explicit constant")
    raise ValueError(f"unknown family {family!r}")


def direct_eval(inst: FamilyInstance, a: Mapping[int, bool]) -> bool:
    """Evaluate a family member straight from its definition (no circuit)."""
    f, p, nm = inst.family, inst.params, inst.names
    val = lambda name: bool(a[nm[name]])  # noqa: E731
    if f in ("h0", "qv", "h1"):
        m = p["m"]
        for i in range(1, m + 1):
            for j in range(1, m + 1):
                R, S, T = val(f"R_{i}"), val(f"S_{i}_{j}"), val(f"T_{j}")
                if f == "h0" and R and S and T:
                    return True
                if f != "h0" and (R and S or S and T):
                    return True
                if f == "qv" and R and T:
                    return True
        return False
    if f == "hk":
        k, level, m = p["k"], p["level"], p["m"]
        for i in range(1, m + 1):
            for j in range(1, m + 1):
                left = val(f"R_{i}") if level == 0 else val(f"S{level}_{i}_{j}")
                right = val(f"T_{j}") if level == k else val(f"S{level + 1}_{i}_{j}")
                if left and right:
                    return True
        return False
    if f in ("perm", "rowcol"):
        n = p["n"]
        M = [[val(f"x_{i}_{j}") for j in range(1, n + 1)] for i in range(1, n + 1)]
        if f == "perm":
            return all(sum(r) == 1 for r in M) and all(sum(c) == 1 for c in zip(*M))
        return any(not any(r) for r in M) or any(not any(c) for c in zip(*M))
    if f == "disjointness":
        n = p["n"]
        return any(val(f"x_{i}") and val(f"y_{i}") for i in range(1, n + 1))
    if f == "shifted_eq":
        n = p["n"]
        s = sum(1 << t for t in range(shift_bits(n)) if val(f"z_{t + 1}")) % n
        x = [val(f"x_{i}") for i in range(1, n + 1)]
        y = [val(f"y_{i}") for i in range(1, n + 1)]
        return y == [x[(k - s) % n] for k in range(n)]
    raise ValueError(f)
