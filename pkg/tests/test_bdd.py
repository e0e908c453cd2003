import random

import pytest
from hypothesis import given, settings, strategies as st

from kc.bdd import (OrFbdd, check_structure, count_models_fbdd, diagram_table, dumps_orfbdd, eval_bdd, loads_orfbdd,
                    obdd_from_table, obdd_to_oneway_protocol)
from kc.circuit import loads_nnf, table_from_function, truth_table
from kc.errors import UnassignedVariable

import oracles


def and2():
    return OrFbdd({0: ("S0",), 1: ("S1",), 2: ("N", 2, 0, 1), 3: ("N", 1, 0, 2)}, 3)


def or2():
    return OrFbdd({0: ("S0",), 1: ("S1",), 2: ("N", 2, 0, 1), 3: ("N", 1, 2, 1)}, 3)


def test_eval_and():
    d = and2()
    assert eval_bdd(d, {1: True, 2: True})
    assert not eval_bdd(d, {1: True, 2: False})


def test_eval_needs_queried_variable():
    with pytest.raises(UnassignedVariable):
        eval_bdd(and2(), {1: True})
    # a variable that is never reached need not be assigned
    assert not eval_bdd(and2(), {1: False})


def test_eval_or_and_noop_nodes():
    d = OrFbdd({0: ("S0",), 1: ("S1",), 2: ("N", 1, 0, 1), 3: ("N", 2, 0, 1),
                4: ("O", (2, 3)), 5: ("P", 4)}, 5)
    for a in oracles.assignments([1, 2]):
        assert eval_bdd(d, a) == (a[1] or a[2])
    assert eval_bdd(OrFbdd({0: ("O", ())}, 0), {}) is False


def test_fig3_conversion_is_equivalent(fixtures):
    from kc.dnnf2orfbdd import convert
    c = loads_nnf((fixtures / "fig3.nnf").read_text())
    d = convert(c).fbdd
    for a in oracles.assignments(range(1, 5)):
        assert eval_bdd(d, a) == oracles.eval_nnf(c, a)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 8))
def test_diagram_table_matches_path_semantics(seed, n):
    from kc.dnnf2orfbdd import convert
    c = oracles.random_binary_dnnf(random.Random(seed), n)
    d = convert(c).fbdd
    order = list(range(1, n + 1))
    assert diagram_table(d, order).bits.tolist() == oracles.table(
        lambda a: oracles.eval_diagram(d.nodes, d.root, a), order)


def test_diagram_table_needs_every_queried_variable():
    with pytest.raises(UnassignedVariable):
        diagram_table(and2(), [1])


def test_read_twice_is_reported():
    d = OrFbdd({0: ("S0",), 1: ("S1",), 2: ("N", 1, 0, 1), 3: ("N", 1, 0, 2)}, 3)
    v = check_structure(d)
    assert v.kind == "read-twice" and v.var == 1
    assert v.path[0] == 3 and v.path[-1] == 2


def test_diamond_is_ok():
    # x then y on both branches, sharing the y node
    d = OrFbdd({0: ("S0",), 1: ("S1",), 2: ("N", 2, 0, 1), 3: ("N", 1, 2, 2)}, 3)
    assert check_structure(d) is None
    assert check_structure(d, [1, 2]) is None


def test_order_violation_on_one_path():
    # the low branch queries y before x
    d = OrFbdd({0: ("S0",), 1: ("S1",), 2: ("N", 1, 0, 1), 3: ("N", 2, 0, 2),
                4: ("N", 1, 0, 1), 5: ("N", 2, 4, 1)}, 5)
    assert check_structure(d) is None
    v = check_structure(d, [1, 2])
    assert v is not None and v.kind == "order"


def test_cycle_is_reported():
    d = OrFbdd({0: ("S0",), 1: ("P", 2), 2: ("N", 1, 0, 1)}, 2)
    assert check_structure(d).kind == "cycle"


def test_counting_examples(fixtures):
    assert count_models_fbdd(and2(), 2) == 1
    assert count_models_fbdd(or2(), 2) == 3
    c = loads_nnf((fixtures / "fig1.nnf").read_text())
    tt = truth_table(c)
    assert count_models_fbdd(obdd_from_table(tt, [1, 2, 3, 4]), 4) == 6
    assert count_models_fbdd(obdd_from_table(tt, [4, 3, 2, 1]), 4) == 6


def test_counting_rejects_or_nodes():
    d = OrFbdd({0: ("S0",), 1: ("S1",), 2: ("O", (0, 1))}, 2)
    with pytest.raises(ValueError):
        count_models_fbdd(d, 1)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(1, 8))
def test_obdd_matches_truth_table(seed, n):
    rng = random.Random(seed)
    c = oracles.random_formula(rng, n)
    order = list(range(1, n + 1))
    rng.shuffle(order)
    d = obdd_from_table(truth_table(c), order)
    assert check_structure(d, order) is None
    assert not d.has_or_nodes()
    for a in oracles.assignments(range(1, n + 1)):
        assert eval_bdd(d, a) == oracles.eval_nnf(c, a)
        assert eval_bdd(d, a) == oracles.eval_diagram(d.nodes, d.root, a)
    assert count_models_fbdd(d, n) == oracles.count(lambda a: oracles.eval_nnf(c, a), range(1, n + 1))


def test_obdd_is_reduced():
    # x1 xor x2 has one node per level plus the two sinks, except level 2 needs two
    tt = table_from_function(lambda a: a[1] != a[2], [1, 2])
    assert obdd_from_table(tt, [1, 2]).size() == 5


def test_structure_stable_under_file_permutation():
    d = or2()
    text = dumps_orfbdd(d).splitlines()
    body, footer = text[1:-1], text[-1]
    shuffled = "\n".join([text[0]] + body[::-1] + [footer]) + "\n"
    e = loads_orfbdd(shuffled)
    assert check_structure(e) is None and e.nodes == d.nodes


def test_roundtrip_with_or_nodes():
    d = OrFbdd({0: ("S0",), 1: ("S1",), 2: ("N", 1, 0, 1), 3: ("O", (2, 1)), 4: ("P", 3), 5: ("O", ())}, 4)
    e = loads_orfbdd(dumps_orfbdd(d))
    assert e.root == 4 and e.nodes[3] == ("O", (2, 1))


@pytest.mark.parametrize("text", [
    "orfbdd 1\nS1 0\n",
    "orfbdd 2\nS1 0\nN 1 1 0 7\nroot 1\n",
    "orfbdd 1\nQ 0\nroot 0\n",
    "orfbdd 2\nS1 0\nroot 0\n",
])
def test_malformed_orfbdd_rejected(text):
    with pytest.raises(ValueError):
        loads_orfbdd(text)


# ---------------------------------------------------------------- one-way protocol

def test_protocol_and_split_after_x1():
    p = obdd_to_oneway_protocol(and2(), [1, 2], 1)
    assert len(p.frontier) == 2 and p.cost == 1
    for a in oracles.assignments([1, 2]):
        assert p.run({1: a[1]}, {2: a[2]}) == (a[1] and a[2])


def test_protocol_empty_split():
    p = obdd_to_oneway_protocol(and2(), [1, 2], 0)
    assert p.frontier == (and2().root,) and p.cost == 0


def test_protocol_disjointness_interleaved():
    n = 3
    order = [v for i in range(1, n + 1) for v in (i, n + i)]
    f = lambda a: any(a[i] and a[n + i] for i in range(1, n + 1))
    d = obdd_from_table(table_from_function(f, range(1, 2 * n + 1)), order)
    p = obdd_to_oneway_protocol(d, order, n)
    for a in oracles.assignments(range(1, 2 * n + 1)):
        alice = {v: a[v] for v in order[:n]}
        bob = {v: a[v] for v in order[n:]}
        assert p.run(alice, bob) == f(a)
    assert p.cost <= max(1, (d.size() - 1).bit_length())


def test_protocol_rejects_unordered():
    d = OrFbdd({0: ("S0",), 1: ("S1",), 2: ("N", 1, 0, 1), 3: ("N", 2, 0, 2)}, 3)
    with pytest.raises(ValueError):
        obdd_to_oneway_protocol(d, [1, 2], 1)
