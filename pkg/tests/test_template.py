import dataclasses
import json

import pytest

from oracles import parent_arrays
from boxsym.kripke import Frame, KripkeModel, evaluate, frame_properties, \
    reflexive_transitive_closure
from boxsym.names import Name, check_name
from boxsym.perms import Condition, FixSpec, Truncation, TruncationError, partition_on
from boxsym.template import (
    DOT2, NoSiblingsError, RealizedModel, TemplateError, build_template, check_pi_proxies,
    descriptor_json, dot2_demo, is_persistent, realize, sibling_pairs, sibling_report,
    tree_model, two_branch_tree, verify_pmorphism,
)

T16 = Truncation(16, 1)


def chain(n):
    return Frame(n, frozenset((i, i + 1) for i in range(n - 1)), 0)


def toy():
    return build_template(two_branch_tree(), {0: {2}}, T16)


def test_single_node_has_no_edges():
    td = build_template(Frame(1, frozenset(), 0), {}, T16)
    assert td.edges == () and td.node_count == 1
    assert td.filter_state == ((),)


def test_chain_has_edges_but_no_signals():
    td = build_template(chain(3), {0: {0, 1, 2}}, T16)
    assert len(td.edges) == 2
    assert all(e.signal is None for e in td.edges)
    assert [e.label for e in td.edges] == ["P", "P"]
    assert sibling_pairs(td, 1) == [] and sibling_pairs(td, 2) == []


def test_toy_labels_windows_and_signals():
    td = toy()
    assert [(e.parent, e.child, e.label) for e in td.edges] == [
        (0, 1, "P"), (1, 2, "P"), (1, 3, "Q")]
    assert td.signal_width == 6
    pairs = sibling_pairs(td, 2)
    assert [(a.child, b.child) for a, b in pairs] == [(2, 3)]
    assert pairs[0][0].signal is not None and pairs[0][1].signal is not None
    assert td.edges[0].signal is None
    assert set(td.signal_coords[2]) <= set(td.windows[2])
    # windows are pairwise disjoint
    seen = [c for js in td.windows.values() for c in js]
    assert len(seen) == len(set(seen))
    (c,) = td.atomic[(2, 0)]
    assert c in td.windows[3] and c not in td.signal_coords.get(3, ())


def test_filters_accumulate_and_fix_parent_atoms():
    td = build_template(chain(3), {0: {0, 1, 2}}, T16)
    e1, e2 = td.edges
    assert set(td.atomic[(0, 0)]) <= e1.fixspec.fixed_coordinates(e1.partition)
    assert set(td.atomic[(1, 0)]) <= e2.fixspec.fixed_coordinates(e2.partition)
    assert [d for d, _ in td.filter_state[2]] == [1, 2]
    assert td.filter_state[2][:1] == td.filter_state[1]


def test_truncation_too_small():
    with pytest.raises(TruncationError, match="deficit"):
        build_template(two_branch_tree(), {0: {2}}, Truncation(6, 1))
    td = build_template(two_branch_tree(), {0: {2}}, Truncation(9, 1))
    assert td.signal_width == 4


def test_rejects_non_trees():
    with pytest.raises(TemplateError):
        build_template(Frame(3, frozenset({(0, 2), (1, 2)}), 0), {}, T16)
    with pytest.raises(TemplateError):
        build_template(chain(2), {0: {5}}, T16)


def test_closed_tree_input_matches_edge_input():
    closed = Frame(4, reflexive_transitive_closure(4, two_branch_tree().relation), 0)
    assert descriptor_json(build_template(closed, {0: {2}}, T16)) == descriptor_json(toy())


def test_realize_chain_is_persistent():
    td = build_template(chain(3), {0: {1, 2}}, T16)
    rm = realize(td)
    assert rm.model.valuation[0] == {1, 2}
    assert is_persistent(rm.model)
    assert verify_pmorphism(rm, tree_model(td)).passed


def test_realize_toy_relation():
    rm = realize(toy())
    rel = rm.model.frame.relation
    loops = {(w, w) for w in range(4)}
    assert loops <= rel
    assert {(0, 1), (1, 2), (1, 3)} <= rel
    assert rel - loops - {(0, 1), (1, 2), (1, 3)} == {(0, 2), (0, 3)}
    props = frame_properties(rm.model.frame)
    assert props.reflexive and props.transitive and not props.directed


def persistent_valuations(n, parent):
    """Single-letter valuations closed upward along parent links."""
    for mask in range(1 << n):
        ws = {w for w in range(n) if mask >> w & 1}
        if all(parent[w] not in ws or w in ws for w in range(1, n)):
            yield {0: ws}


@pytest.mark.parametrize("n, parent", [t for t in parent_arrays(4)])
def test_realization_invariants_on_small_trees(n, parent):
    frame = Frame(n, frozenset((parent[i], i) for i in range(1, n)), 0)
    for val in persistent_valuations(n, parent):
        td = build_template(frame, val, T16)
        rm = realize(td)
        assert is_persistent(rm.model)
        rep = verify_pmorphism(rm, tree_model(td), depth=2, enum_size=4)
        assert rep.passed, rep.summary()
        assert check_pi_proxies(td).passed


def test_non_persistent_valuation_breaks_atoms():
    td = build_template(chain(2), {0: {0}}, T16)
    rm = realize(td)
    assert rm.model.valuation[0] == {0, 1}
    rep = verify_pmorphism(rm, tree_model(td))
    assert rep.clause("atoms").passed is False
    assert rep.clause("forth").passed and rep.clause("back").passed


def test_verify_catches_dropped_edge():
    td = toy()
    rm = realize(td)
    rel = rm.model.frame.relation - {(1, 3), (0, 3)}
    broken = RealizedModel(KripkeModel(Frame(4, rel, 0), rm.model.valuation),
                           rm.projection, rm.stages, td)
    rep = verify_pmorphism(broken, tree_model(td))
    assert rep.clause("back").passed is False
    assert rep.clause("forth").passed


def test_verify_catches_bad_projection():
    td = toy()
    rm = realize(td)
    moved = dataclasses.replace(rm, projection=(0, 1, 2, 2))
    rep = verify_pmorphism(moved, tree_model(td))
    assert rep.clause("surjective").passed is False


def test_sibling_report_needs_siblings():
    td = build_template(chain(3), {}, T16)
    with pytest.raises(NoSiblingsError):
        sibling_report(td, 1, Truncation(6, 1))


def test_sibling_report_structure_and_clause_a():
    td = toy()
    rep = sibling_report(td, 2, Truncation(6, 1), corpus_size=20)
    assert [c.name for c in rep.clauses] == ["a", "b", "c"]
    assert rep.clause("a").passed
    detail = rep.clause("a").detail["pairs"]
    assert {d["signal"]: d["opposite_gens"] for d in detail} == {"P": False, "Q": False}
    assert rep.conclusion in ("amalgamation impossible at this truncation",
                              "non-amalgamation not established at this truncation")
    with pytest.raises(TruncationError):
        sibling_report(td, 2, Truncation(8, 1))


def test_sibling_report_excludes_names_moved_by_a_sibling_group():
    td = toy()
    one_pair = Name.of([(check_name(0), Condition.of({(0, 0): 1}))])
    rep = sibling_report(td, 2, Truncation(6, 1), corpus_size=0,
                         extra_candidates=[one_pair, check_name(2)])
    b = rep.clause("b").detail["pairs"][0]
    assert b["candidates"] == 1 and len(b["excluded"]) == 1
    assert rep.passed


def test_dot2_demo():
    model, root, f = dot2_demo()
    assert f == DOT2
    assert not evaluate(model, root, f)
    props = frame_properties(model.frame)
    assert props.reflexive and props.transitive and not props.directed


def test_pi_proxies_on_toy_and_negative_controls():
    td = toy()
    rep = check_pi_proxies(td)
    assert rep.passed
    assert rep.clause("PI-3").passed is None
    # PI-1: an edge reaching into a deeper window
    e = td.edges[0]
    bad_edge = dataclasses.replace(e, partition=partition_on(0, td.windows[2]),
                                   fixspec=FixSpec())
    bad = dataclasses.replace(td, edges=(bad_edge,) + td.edges[1:])
    assert check_pi_proxies(bad).clause("PI-1").passed is False
    # PI-4: a child that forgets its parent's filter
    state = list(td.filter_state)
    state[2] = state[2][1:]
    bad = dataclasses.replace(td, filter_state=tuple(state))
    assert check_pi_proxies(bad).clause("PI-4").passed is False


def test_descriptor_json_is_stable():
    a, b = descriptor_json(toy()), descriptor_json(toy())
    assert a == b
    doc = json.loads(a)
    assert doc["nodes"] == 4 and len(doc["edges"]) == 3
