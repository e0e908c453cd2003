import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from kc.circuit import restrict_table, truth_table
from kc.families import (FAMILIES, GridPartition, direct_eval, family_bounds, gen, grid_names, qv_reduction,
                         w_sets)

import oracles


def grid_pred(kind, m):
    R = lambda a, i: a[i]                       # noqa: E731
    S = lambda a, i, j: a[m + (i - 1) * m + j]  # noqa: E731
    T = lambda a, j: a[m + m * m + j]           # noqa: E731

    def f(a):
        for i in range(1, m + 1):
            for j in range(1, m + 1):
                r, s, t = R(a, i), S(a, i, j), T(a, j)
                if kind == "h0" and r and s and t:
                    return True
                if kind in ("qv", "h1") and (r and s or s and t):
                    return True
                if kind == "qv" and r and t:
                    return True
        return False
    return f


def shifted_pred(n):
    nz = math.ceil(math.log2(n)) if n > 1 else 0

    def f(a):
        s = sum(1 << t for t in range(nz) if a[2 * n + t + 1])
        x = [a[i] for i in range(1, n + 1)]
        y = [a[n + i] for i in range(1, n + 1)]
        return all(y[k] == x[(k - s) % n] for k in range(n))
    return f


def count(inst):
    return oracles.count(lambda a: oracles.eval_nnf(inst.circuit, a), range(1, inst.circuit.var_count + 1))


@pytest.mark.parametrize("family,size,want", [
    ("h0", 1, 1), ("qv", 1, 4), ("h1", 1, 3),
    ("h0", 2, 95), ("qv", 2, 222), ("h1", 2, 209),
    ("perm", 2, 2), ("perm", 3, 6), ("rowcol", 2, 9), ("rowcol", 3, 247),
    ("disjointness", 3, 37), ("shifted_eq", 2, 8), ("shifted_eq", 3, 32),
])
def test_model_counts(family, size, want):
    assert count(gen(family, size)) == want


@pytest.mark.parametrize("family,size", [("h0", 1), ("qv", 1), ("h1", 1), ("h0", 2), ("qv", 2), ("h1", 2)])
def test_grid_families_match_definition(family, size):
    inst = gen(family, size)
    n = inst.circuit.var_count
    assert n == 2 * size + size * size
    pred = grid_pred(family, size)
    for a in oracles.assignments(range(1, n + 1)):
        assert oracles.eval_nnf(inst.circuit, a) == pred(a) == direct_eval(inst, a)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_matrix_families_match_predicates(n):
    for fam, pred in (("perm", oracles.perm_pred(n)), ("rowcol", oracles.rowcol_pred(n))):
        inst = gen(fam, n)
        for a in oracles.assignments(range(1, n * n + 1)):
            assert oracles.eval_nnf(inst.circuit, a) == pred(a) == direct_eval(inst, a)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_shifted_eq_and_disjointness(n):
    inst = gen("shifted_eq", n)
    pred = shifted_pred(n)
    for a in oracles.assignments(range(1, inst.circuit.var_count + 1)):
        assert oracles.eval_nnf(inst.circuit, a) == pred(a) == direct_eval(inst, a)
    inst = gen("disjointness", n)
    for a in oracles.assignments(range(1, 2 * n + 1)):
        want = any(a[i] and a[n + i] for i in range(1, n + 1))
        assert oracles.eval_nnf(inst.circuit, a) == want == direct_eval(inst, a)


def test_perm_accepts_exactly_permutation_matrices():
    inst = gen("perm", 2)
    ok = [a for a in oracles.assignments(range(1, 5)) if oracles.eval_nnf(inst.circuit, a)]
    grids = sorted(tuple(int(a[v]) for v in range(1, 5)) for a in ok)
    assert grids == [(0, 1, 1, 0), (1, 0, 0, 1)]


def test_hk_levels():
    k, m = 2, 2
    for level in range(k + 1):
        inst = gen("hk", m, k=k, level=level)
        assert inst.circuit.var_count == k * m * m + 2 * m
        names = inst.names

        def pred(a):
            for i in range(1, m + 1):
                for j in range(1, m + 1):
                    left = a[names[f"R_{i}"]] if level == 0 else a[names[f"S{level}_{i}_{j}"]]
                    right = a[names[f"T_{j}"]] if level == k else a[names[f"S{level + 1}_{i}_{j}"]]
                    if left and right:
                        return True
            return False

        tt = truth_table(inst.circuit)
        assert tt.bits.tolist() == oracles.table(pred, range(1, inst.circuit.var_count + 1))
        # the middle level pairs four disjoint S pairs: 4096 * (1 - (3/4)^4)
        assert int(tt.bits.sum()) == (2496, 2800, 2496)[level]
    assert gen("hk", 2, k=2, level=2).names["T_1"] == 2 + 8 + 1


def test_names_and_numbering():
    inst = gen("qv", 3)
    assert inst.var("R_2") == 2 and inst.var("S_2_3") == 3 + 3 + 3 and inst.var("T_1") == 3 + 9 + 1
    assert inst.name_of(13) == "T_1"
    assert grid_names(3) == inst.names
    text = inst.dumps_names()
    assert "S_2_3" in text
    assert gen("perm", 3).var("x_2_1") == 4
    assert gen("shifted_eq", 4).var("z_2") == 10


@pytest.mark.parametrize("args", [("qv", 0), ("hk", 2), ("bogus", 2), ("perm", -1)])
def test_bad_parameters(args):
    with pytest.raises(ValueError):
        gen(*args)
    with pytest.raises(ValueError):
        gen("hk", 2, k=1, level=3)
    assert "hk" in FAMILIES


# ---------------------------------------------------------------- W sets

def cells(m, pred):
    return frozenset((i, j) for i in range(1, m + 1) for j in range(1, m + 1) if pred(i, j))


def test_w_sets_row_split():
    p = GridPartition(4, cells(4, lambda i, j: i <= 2))
    ws = w_sets(p, Fraction(1, 2))
    assert ws.rows == frozenset() and ws.cols == {1, 2, 3, 4}
    assert ws.bound_ok


def test_w_sets_checkerboard():
    p = GridPartition(2, cells(2, lambda i, j: (i + j) % 2 == 0))
    ws = w_sets(p)
    assert ws.rows == {1, 2} and ws.cols == {1, 2}


def test_w_sets_everything_to_alice():
    p = GridPartition(3, cells(3, lambda i, j: True))
    ws = w_sets(p, 0)
    assert not ws.rows and not ws.cols and ws.bound_ok


@settings(max_examples=500, deadline=None)
@given(st.integers(4, 8), st.integers(0, 10 ** 9))
def test_split_lines_bound(m, seed):
    rng = random.Random(seed)
    bias = rng.random()
    A = cells(m, lambda i, j: rng.random() < bias)
    delta = Fraction(min(len(A), m * m - len(A)), m * m)
    ws = w_sets(GridPartition(m, A), delta)
    assert ws.bound_ok
    assert max(len(ws.rows), len(ws.cols)) ** 2 >= delta * m * m


# ---------------------------------------------------------------- reduction to disjointness

def residual_ok(inst, red):
    tt = restrict_table(truth_table(inst.circuit), red.rho)
    free = tt.var_order
    want = oracles.table(lambda a: any(a[u] and a[s] for u, s in red.residual_terms()), free)
    return tt.bits.tolist() == want


def test_reduction_m2_row_split():
    inst = gen("qv", 2)
    nm = inst.names
    # R_1 and S_1_1 with Alice, S_1_2 with Bob; row 2 entirely with Alice
    alice = {nm["R_1"], nm["S_1_1"], nm["R_2"], nm["S_2_1"], nm["S_2_2"], nm["T_1"]}
    red = qv_reduction(inst, alice)
    assert not red.transposed and red.support == [1]
    assert red.pairs == [(1, nm["R_1"], nm["S_1_2"], "A")]
    assert red.rho[nm["R_2"]] is False
    assert residual_ok(inst, red)


def test_reduction_h0_sets_far_block_to_one():
    inst = gen("h0", 2)
    nm = inst.names
    alice = {nm["R_1"], nm["S_1_1"], nm["R_2"], nm["S_2_1"], nm["S_2_2"], nm["T_1"]}
    red = qv_reduction(inst, alice)
    assert red.rho[nm["T_1"]] is True and red.rho[nm["T_2"]] is True
    assert residual_ok(inst, red)


def test_reduction_needs_a_split_line():
    inst = gen("qv", 2)
    with pytest.raises(ValueError):
        qv_reduction(inst, set(range(1, 9)))


@settings(max_examples=150, deadline=None)
@given(st.sampled_from(["qv", "h1", "h0"]), st.integers(2, 3), st.integers(0, 10 ** 9))
def test_reduction_pairs_straddle(family, m, seed):
    rng = random.Random(seed)
    inst = gen(family, m)
    n = inst.circuit.var_count
    alice = {v for v in range(1, n + 1) if rng.random() < 0.5}
    part = GridPartition.from_vars(m, alice)
    ws = w_sets(part)
    if not ws.rows and not ws.cols:
        with pytest.raises(ValueError):
            qv_reduction(inst, alice)
        return
    red = qv_reduction(inst, alice)
    assert len(red.support) == max(len(ws.rows), len(ws.cols))
    for _, u, s, side in red.pairs:
        assert (u in alice) != (s in alice)
        assert (side == "A") == (u in alice)
    if n <= 15:
        assert residual_ok(inst, red)


# ---------------------------------------------------------------- published bounds

def test_qv_bounds():
    r = family_bounds("qv", 12)
    assert r.cc_bound == 4 and r.sdd_bound == 2 and not r.below_hypothesis
    assert family_bounds("qv", 3).below_hypothesis
    assert "below m >= 6 hypothesis" in family_bounds("qv", 3).lines()


def test_hk_bound():
    r = family_bounds("hk", 36, k=2)
    assert r.sdd_bound == pytest.approx(2 ** (math.sqrt(18) / 3 - 1))
    assert r.cc_bound == 2
    with pytest.raises(ValueError):
        family_bounds("hk", 36)
