"""Experiment runner: representation sizes against family parameters, as CSV."""

from __future__ import annotations

import csv
import io
import random
import time
from dataclasses import dataclass, field

from kc.bdd import obdd_from_table
from kc.circuit import ORACLE_CAP, truth_table
from kc.dnnf2orfbdd import convert
from kc.errors import OracleCapError, SizeLimitExceeded
from kc.families import family_bounds, gen
from kc.sdd import compile_circuit
from kc.vtree import build_vtree

COLUMNS = ["family", "param", "repr", "strategy", "seed", "size", "size_circle_only",
           "paper_bound", "wall_ms", "status"]
STRATEGIES = ("balanced", "right-linear", "random-restarts")
REPRS = ("sdd", "obdd", "orfbdd")


@dataclass
class ExperimentSpec:
    family: str
    params: list[int]
    repr: str = "sdd"
    strategy: str = "balanced"
    restarts: int = 1
    seed: int = 0
    k: int | None = None
    level: int | None = None
    compress: bool = False
    node_limit: int | None = 2_000_000
    op_limit: int | None = None
    timing: bool = True

    def __post_init__(self):
        if not self.params:
            raise ValueError("empty parameter range")
        if self.repr not in REPRS:
            raise ValueError(f"unknown representation {self.repr!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown vtree strategy {self.strategy!r}")
        if self.strategy == "random-restarts" and self.restarts < 1:
            raise ValueError("random-restarts needs at least one restart")


@dataclass
class SizeRecord:
    family: str
    param: int
    repr: str
    strategy: str
    seed: int
    size: int | None
    size_circle_only: int | None
    paper_bound: str
    wall_ms: int
    status: str = "ok"
    extra: dict = field(default_factory=dict)

    def row(self) -> list:
        return [self.family, self.param, self.repr, self.strategy, self.seed,
                "" if self.size is None else self.size,
                "" if self.size_circle_only is None else self.size_circle_only,
                self.paper_bound, self.wall_ms, self.status]


def _paper_bound(spec: ExperimentSpec, param: int, conv=None) -> str:
    if spec.repr == "orfbdd" and conv is not None:
        return str(conv.bound)
    if spec.repr != "sdd":
        return ""
    try:
        rep = family_bounds(spec.family, param, spec.k)
    except ValueError:
        return ""
    return "" if rep.sdd_bound is None else f"{rep.sdd_bound:.6g}"


def _seeds(spec: ExperimentSpec) -> list[int]:
    if spec.strategy == "random-restarts":
        return [spec.seed + r for r in range(spec.restarts)]
    return [spec.seed]


def _measure(spec: ExperimentSpec, circuit, seed: int):
    """Size pair for one vtree / order choice."""
    n = circuit.var_count
    vars_ = list(range(1, n + 1))
    shape = "random" if spec.strategy == "random-restarts" else spec.strategy
    if spec.repr == "sdd":
        vt = build_vtree(vars_, shape, seed if shape == "random" else None)
        s = compile_circuit(circuit, vt, compress=spec.compress,
                            node_limit=spec.node_limit, op_limit=spec.op_limit)
        return s.size(), s.size_circle_only()
    # obdd
    if n > ORACLE_CAP:
        raise OracleCapError(f"{n} variables exceed the truth-table cap")
    # balanced and right-linear both read as the natural variable order
    order = list(vars_)
    if shape == "random":
        random.Random(seed).shuffle(order)
    d = obdd_from_table(truth_table(circuit), order)
    decisions = sum(1 for i in d.reachable() if d.nodes[i][0] == "N")
    return d.size(), decisions


def run_experiment(spec: ExperimentSpec) -> list[SizeRecord]:
    """One row per parameter; random restarts keep the smallest size (ties
    go to the lower seed) and report the seed that produced it."""
    records = []
    for param in spec.params:
        t0 = time.perf_counter()
        inst = gen(spec.family, param, k=spec.k, level=spec.level)
        if spec.repr == "orfbdd":
            try:
                conv = convert(inst.circuit, limit=spec.node_limit)
            except SizeLimitExceeded:
                records.append(SizeRecord(spec.family, param, spec.repr, "n/a", spec.seed, None, None,
                                          "", _ms(spec, t0), "skipped"))
                continue
            inner = sum(1 for n in conv.fbdd.nodes.values() if n[0] not in ("S0", "S1"))
            rec = SizeRecord(spec.family, param, spec.repr, "n/a", spec.seed, conv.actual, inner,
                             _paper_bound(spec, param, conv), _ms(spec, t0))
            rec.extra = {"N": conv.N, "M": conv.M, "L": conv.L}
            records.append(rec)
            continue
        best = None
        for seed in _seeds(spec):
            try:
                size, circles = _measure(spec, inst.circuit, seed)
            except (SizeLimitExceeded, OracleCapError):
                continue
            if best is None or size < best[0]:
                best = (size, circles, seed)
        if best is None:
            records.append(SizeRecord(spec.family, param, spec.repr, spec.strategy, spec.seed,
                                      None, None, _paper_bound(spec, param), _ms(spec, t0), "skipped"))
        else:
            records.append(SizeRecord(spec.family, param, spec.repr, spec.strategy, best[2],
                                      best[0], best[1], _paper_bound(spec, param), _ms(spec, t0)))
    records.sort(key=lambda r: (r.family, r.param, r.seed))
    return records


def _ms(spec: ExperimentSpec, t0: float) -> int:
    return round((time.perf_counter() - t0) * 1000) if spec.timing else 0


def to_csv(records: list[SizeRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def parse_range(text: str) -> list[int]:
    """``"2..5"``, ``"3"`` or ``"2,4,6"``."""
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise ValueError(f"empty range {text!r}")
        return list(range(lo, hi + 1))
    return [int(t) for t in text.split(",") if t.strip()]
