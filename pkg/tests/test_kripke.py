import json

import pytest

from oracles import parent_arrays, s4_models, s4_valid
from boxsym.kripke import (
    BudgetExceeded, Countermodel, Frame, KripkeModel, ModelError, Theorem, decide_s4, evaluate,
    frame_properties, model_from_dict, model_to_json, reflexive_transitive_closure,
    search_countermodel, unravel,
)
from boxsym.modal import Atom, Box, Diamond, enumerate_formulas, modal_depth, parse_formula, to_box_form
from boxsym.template import modal_types

DOT2 = parse_formula("<>[]p0 -> []<>p0")


def fork():
    rel = reflexive_transitive_closure(3, [(0, 1), (0, 2)])
    return KripkeModel(Frame(3, rel, 0), {0: frozenset({1})})


def test_eval_examples():
    one = KripkeModel(Frame(1, frozenset({(0, 0)})), {0: frozenset({0})})
    assert evaluate(one, 0, Box(Atom(0)))
    assert evaluate(fork(), 0, Diamond(Box(Atom(0))))
    assert not evaluate(fork(), 0, Box(Diamond(Atom(0))))


def test_eval_errors():
    with pytest.raises(ModelError):
        evaluate(fork(), 3, Atom(0))
    with pytest.raises(ModelError):
        evaluate(fork(), 0, Atom(5))


def test_frame_properties_examples():
    assert frame_properties(Frame(1, frozenset({(0, 0)}))).as_dict() == {
        "reflexive": True, "transitive": True, "directed": True}
    assert frame_properties(fork().frame).as_dict() == {
        "reflexive": True, "transitive": True, "directed": False}
    assert frame_properties(Frame(2, frozenset())).as_dict() == {
        "reflexive": False, "transitive": True, "directed": True}


def test_decide_examples():
    assert isinstance(decide_s4(parse_formula("[]p0 -> p0")), Theorem)
    assert isinstance(decide_s4(parse_formula("[]p0 -> [][]p0")), Theorem)
    r = decide_s4(to_box_form(DOT2))
    assert isinstance(r, Countermodel)
    assert json.loads(model_to_json(r.model, r.world)) == {
        "worlds": 3, "edges": [[0, 0], [0, 1], [0, 2], [1, 1], [2, 2]],
        "valuation": {"p0": [1]}, "root": 0}


def test_decide_rejects_diamonds_and_reports_budget():
    with pytest.raises(ValueError):
        decide_s4(DOT2)
    with pytest.raises(BudgetExceeded):
        decide_s4(to_box_form(parse_formula("[]<>p0 -> <>[]p0")), budget=1)


def test_countermodels_are_s4_and_small():
    for f in enumerate_formulas(6, 1):
        g = to_box_form(f)
        r = decide_s4(g)
        if isinstance(r, Countermodel):
            props = frame_properties(r.model.frame)
            assert props.reflexive and props.transitive
            assert not evaluate(r.model, r.world, g)
            assert r.model.world_count <= 3


def test_two_atom_agreement_with_oracle():
    models = list(s4_models(3, 2))
    for f in list(enumerate_formulas(5, 2))[::3]:
        if modal_depth(f) <= 2:
            assert decide_s4(to_box_form(f)).is_theorem == s4_valid(f, models), f


def test_search_countermodel_matches_decision():
    r = search_countermodel(to_box_form(DOT2), max_worlds=3)
    assert r is not None and not evaluate(r[0], r[1], DOT2)
    assert search_countermodel(parse_formula("[]p0 -> p0"), max_worlds=3) is None


def test_model_json_roundtrip():
    m = fork()
    assert model_from_dict(json.loads(model_to_json(m, 0))) == m
    assert model_to_json(m, 0) == model_to_json(m, 0)


def test_unravel_examples():
    one = KripkeModel(Frame(1, frozenset({(0, 0)})), {0: frozenset()})
    tree, paths = unravel(one, 0, 2)
    assert tree.world_count == 1 and paths == [(0,)]
    tree, paths = unravel(fork(), 0, 2)
    assert paths == [(0,), (0, 1), (0, 2)]
    assert not evaluate(tree, 0, DOT2)
    chain = KripkeModel(Frame(2, reflexive_transitive_closure(2, [(0, 1)])), {0: frozenset({1})})
    tree, paths = unravel(chain, 0, 1)
    assert tree.world_count == 2
    for f in enumerate_formulas(5, 1):
        if modal_depth(f) <= 1:
            assert evaluate(tree, 0, f) == evaluate(chain, 0, f)


def _models_3(posets_only=False):
    for n, succ, val in s4_models(3, 1):
        rel = frozenset((i, j) for i in range(n) for j in range(n) if succ[i] >> j & 1)
        if posets_only and any((j, i) in rel for i, j in rel if i != j):
            continue
        yield KripkeModel(Frame(n, rel), {0: frozenset(w for w in range(n) if val[0] >> w & 1)})


@pytest.mark.xfail(strict=True, reason="a truncated tree has reflexive leaves; worlds in a "
                   "proper cluster or below the cut change type (see test below)")
def test_unravel_preserves_depth_types_on_all_small_models():
    for m in _models_3():
        for w in range(m.world_count):
            for k in range(3):
                tree, _ = unravel(m, w, k)
                assert modal_types(tree, k, [0])[0] == modal_types(m, k, [0])[w]


def test_complete_unraveling_of_partial_orders_is_exact():
    """Depth 2 exhausts every strict path in a 3-world partial order."""
    for m in _models_3(posets_only=True):
        for w in range(m.world_count):
            tree, _ = unravel(m, w, 2)
            for k in range(4):
                assert modal_types(tree, k, [0])[0] == modal_types(m, k, [0])[w]


def test_lost_refutations_are_valid_on_all_small_trees():
    """When unraveling at modal depth loses a refutation, no finite tree refutes the formula."""
    trees = []
    for n, parents in parent_arrays(5):
        rel = reflexive_transitive_closure(n, [(p, i) for i, p in enumerate(parents) if p is not None])
        for mask in range(1 << n):
            trees.append(KripkeModel(Frame(n, rel, 0),
                                     {0: frozenset(x for x in range(n) if mask >> x & 1)}))
    lost = []
    for f in enumerate_formulas(6, 1):
        g = to_box_form(f)
        r = decide_s4(g)
        if isinstance(r, Countermodel):
            tree, _ = unravel(r.model, r.world, modal_depth(g))
            if evaluate(tree, 0, g):
                lost.append(g)
    assert lost, "expected cluster-only refutations such as <>(<>p0 -> []p0)"
    for g in lost:
        assert all(evaluate(t, 0, g) for t in trees)


def test_mckinsey_holds_on_every_small_tree():
    f = parse_formula("[]<>p0 -> <>[]p0")
    for n, parents in parent_arrays(5):
        rel = reflexive_transitive_closure(n, [(p, i) for i, p in enumerate(parents) if p is not None])
        for mask in range(1 << n):
            m = KripkeModel(Frame(n, rel, 0), {0: frozenset(x for x in range(n) if mask >> x & 1)})
            assert evaluate(m, 0, f)
