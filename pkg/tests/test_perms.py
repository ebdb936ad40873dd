import json
import math
from itertools import combinations, product

import pytest
from hypothesis import given, settings, strategies as st

from boxsym.perms import (
    Condition, FixSpec, Permutation, Truncation, TruncationError, act_on_condition,
    conjugate_fixspec, fixspec_fixing, fixspec_from_dict, group_closure, intersect_fixspecs,
    is_within_block, make_partition, parse_cycles, within_block_generators,
)

T6 = Truncation(6, 1)


def perms(n):
    return st.permutations(range(n)).map(lambda xs: Permutation(tuple(xs)))


def test_make_partition_examples():
    p = make_partition(0, T6)
    assert p.blocks == ((0, 1), (2, 3), (4, 5)) and p.singletons == ()
    q = make_partition(1, T6)
    assert q.blocks == ((1, 2), (3, 4)) and q.singletons == (0, 5)
    one = make_partition(0, Truncation(1, 1))
    assert one.blocks == () and one.singletons == (0,)


@given(st.integers(0, 1), st.integers(1, 12))
def test_partition_covers_coordinates(delta, n):
    bp = make_partition(delta, Truncation(n, 1))
    cells = [c for b in bp.blocks for c in b] + list(bp.singletons)
    assert sorted(cells) == list(range(n))


def test_within_block_generators_examples():
    assert [str(g) for g in within_block_generators(make_partition(0, T6), 6)] == ["(0 1)", "(2 3)", "(4 5)"]
    assert [str(g) for g in within_block_generators(make_partition(1, T6), 6)] == ["(1 2)", "(3 4)"]
    assert within_block_generators(make_partition(1, Truncation(1, 1)), 1) == []


def test_group_closure_examples():
    assert group_closure([Permutation.transposition(2, 0, 1)]).order == 2
    gp = within_block_generators(make_partition(0, T6), 6)
    gq = within_block_generators(make_partition(1, T6), 6)
    assert group_closure(gp + gq).order == 720
    assert group_closure(gp).order == 8


def test_group_closure_budget():
    gens = [Permutation.transposition(6, i, i + 1) for i in range(5)]
    res = group_closure(gens, budget=100)
    assert res.truncated and res.elements is None and res.order == 100


@settings(max_examples=20, deadline=None)
@given(st.randoms(use_true_random=False))
def test_closure_invariant_under_generator_order(rnd):
    gens = within_block_generators(make_partition(0, T6), 6) + within_block_generators(
        make_partition(1, T6), 6)
    shuffled = gens[:]
    rnd.shuffle(shuffled)
    assert group_closure(shuffled).elements == group_closure(gens).elements


def test_closure_invariant_under_block_respecting_relabeling():
    gp = within_block_generators(make_partition(0, T6), 6)
    sigma = Permutation.from_cycles(6, [(0, 2, 4), (1, 3, 5)])  # permutes P-blocks
    conj = [sigma.compose(g).compose(sigma.inverse()) for g in gp]
    assert group_closure(conj).order == group_closure(gp).order
    assert set(conj) == set(gp)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_tail_generation(n):
    tr = Truncation(n, 1)
    gens = within_block_generators(make_partition(0, tr), n) + within_block_generators(
        make_partition(1, tr), n)
    assert group_closure(gens).order == math.factorial(n)


def test_permutation_basics():
    p = Permutation.from_cycles(4, [(0, 1, 2)])
    assert p.support == {0, 1, 2}
    assert p.compose(p.inverse()).is_identity()
    assert str(Permutation.identity(3)) == "()"
    assert parse_cycles("(0 1)(2 3)", 4) == Permutation((1, 0, 3, 2))
    assert parse_cycles("()", 3).is_identity()
    with pytest.raises(ValueError):
        parse_cycles("(0 1", 4)
    with pytest.raises(TruncationError):
        Permutation.transposition(1, 0, 1)
    with pytest.raises(ValueError):
        Permutation((0, 0))


@given(perms(5))
def test_cycle_notation_roundtrip(p):
    assert parse_cycles(p.cycle_notation(), 5) == p


def test_act_on_condition_examples():
    p = Condition.of({(0, 2): 1})
    assert act_on_condition(Permutation.transposition(3, 0, 1), p) == Condition.of({(1, 2): 1})
    assert act_on_condition(Permutation.identity(3), p) == p
    q = Condition.of({(0, 0): 1, (3, 1): 0})
    pi = Permutation.from_cycles(4, [(0, 1), (2, 3)])
    assert act_on_condition(pi, q) == Condition.of({(1, 0): 1, (2, 1): 0})


def _small_conditions():
    cells = [(c, m) for c in range(4) for m in range(2)]
    yield Condition()
    for k in (1, 2):
        for cs in combinations(cells, k):
            for vs in product((0, 1), repeat=k):
                yield Condition.of(zip(cs, vs))


def test_action_is_a_group_action_exhaustively():
    group = sorted(group_closure([Permutation.transposition(4, 0, 1),
                                  Permutation.from_cycles(4, [(0, 1, 2, 3)])]).elements)
    assert len(group) == 24
    conds = list(_small_conditions())
    for p in conds:
        for pi in group:
            moved = act_on_condition(pi, p)
            assert act_on_condition(pi.inverse(), moved) == p
        for pi, sigma in zip(group, reversed(group)):
            assert act_on_condition(pi.compose(sigma), p) == act_on_condition(
                pi, act_on_condition(sigma, p))


def test_condition_order_and_errors():
    a = Condition.of({(0, 0): 1})
    b = Condition.of({(0, 0): 1, (1, 0): 0})
    assert b.extends(a) and not a.extends(b)
    assert not a.compatible(Condition.of({(0, 0): 0}))
    with pytest.raises(ValueError):
        Condition((((0, 0), 1), ((0, 0), 0)))
    with pytest.raises(ValueError):
        Condition.of({(0, 0): 2})
    assert not Condition.of({(7, 0): 1}).fits(T6)


def test_conjugate_fixspec_examples():
    bp = make_partition(0, T6)
    h = FixSpec(frozenset(), {1: frozenset({2})})
    assert conjugate_fixspec(Permutation.identity(6), h, bp) == h
    assert conjugate_fixspec(Permutation.transposition(6, 2, 3), h, bp).fixed_coords == {1: {3}}
    whole = FixSpec(frozenset({0}))
    assert conjugate_fixspec(Permutation.transposition(6, 0, 1), whole, bp) == whole
    with pytest.raises(ValueError):
        conjugate_fixspec(Permutation.transposition(6, 1, 2), h, bp)


def test_conjugation_law_on_elements():
    """pi Fix(C) pi^-1 = Fix(pi C) as element sets."""
    bp = make_partition(0, T6)
    h = FixSpec(frozenset({2}), {1: frozenset({2})})
    for pi in group_closure(within_block_generators(bp, 6)).elements:
        lhs = {pi.compose(g).compose(pi.inverse()) for g in h.elements(bp, 6)}
        rhs = set(conjugate_fixspec(pi, h, bp).elements(bp, 6))
        assert lhs == rhs


def test_intersection_contains_a_fixspec():
    bp = make_partition(1, Truncation(8, 1))
    a = FixSpec(frozenset({0}), {1: frozenset({3})})
    b = FixSpec(frozenset({2}), {})
    c = intersect_fixspecs(a, b)
    assert set(c.elements(bp, 8)) <= set(a.elements(bp, 8)) & set(b.elements(bp, 8))


def test_fixspec_contents_and_json():
    bp = make_partition(0, T6)
    h = fixspec_fixing(bp, {0, 1, 2})
    assert h.fixed_blocks == {0} and h.fixed_coords == {1: {2}}
    assert h.moved_blocks(bp) == [2]
    assert h.fixed_coordinates(bp) == {0, 1, 2, 3}
    assert len(h.elements(bp, 6)) == 2
    assert all(h.contains(g, bp) for g in h.elements(bp, 6))
    assert not h.contains(Permutation.transposition(6, 0, 1), bp)
    doc = json.loads(h.to_json(bp))
    assert doc["delta"] == 0 and doc["blocks"] == [[0, 1], [2, 3], [4, 5]]
    assert fixspec_from_dict(doc) == h
    assert FixSpec.trivial(bp).elements(bp, 6) == [Permutation.identity(6)]
    assert is_within_block(Permutation.transposition(6, 4, 5), bp)
