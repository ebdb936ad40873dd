import pytest
from hypothesis import given, settings, strategies as st

from oracles import mask_eval, preorders
from boxsym.modal import (
    And, Atom, Box, Diamond, Implies, Not, ParseError, LexError,
    enumerate_formulas, has_diamond, modal_depth, parse_formula, size, to_box_form, to_text,
)


def formulas(atoms=2):
    leaves = st.builds(Atom, st.integers(0, atoms - 1))
    return st.recursive(leaves, lambda sub: st.one_of(
        st.builds(Not, sub), st.builds(Box, sub), st.builds(Diamond, sub),
        st.builds(And, sub, sub), st.builds(Implies, sub, sub)), max_leaves=8)


def test_parse_examples():
    assert parse_formula("[]p0 -> p0") == Implies(Box(Atom(0)), Atom(0))
    assert parse_formula("<>[]p0 -> []<>p0") == Implies(Diamond(Box(Atom(0))), Box(Diamond(Atom(0))))


def test_dangling_operator_reports_end_of_input():
    with pytest.raises(ParseError) as exc:
        parse_formula("[]p0 ->")
    assert exc.value.position == len("[]p0 ->")
    assert "end of input" in str(exc.value)


@pytest.mark.parametrize("text", ["", "   ", "(p0", "p0)", "p0 p1", "& p0", "[]"])
def test_parse_errors(text):
    with pytest.raises(ParseError):
        parse_formula(text)


def test_lex_error_position():
    with pytest.raises(LexError) as exc:
        parse_formula("p0 & q")
    assert exc.value.position == 5


def test_precedence_and_associativity():
    a, b, c = Atom(0), Atom(1), Atom(2)
    assert parse_formula("p0 -> p1 -> p2") == Implies(a, Implies(b, c))
    assert parse_formula("p0 & p1 -> p2") == Implies(And(a, b), c)
    assert parse_formula("~p0 & []p1") == And(Not(a), Box(b))
    assert parse_formula("p0 | p1 & p2") == Implies(Not(a), And(b, c))
    assert parse_formula("p0 <-> p1") == And(Implies(a, b), Implies(b, a))
    assert parse_formula("□p0 → ◇p0") == Implies(Box(a), Diamond(a))


@given(formulas())
def test_parse_print_roundtrip(f):
    assert parse_formula(to_text(f)) == f
    assert to_text(parse_formula(to_text(f))) == to_text(f)


def test_box_form_examples():
    assert to_box_form(Diamond(Atom(0))) == Not(Box(Not(Atom(0))))
    assert to_box_form(Box(Atom(0))) == Box(Atom(0))
    assert to_box_form(Diamond(Diamond(Atom(0)))) == Not(Box(Not(Not(Box(Not(Atom(0)))))))


def test_box_form_preserves_truth_exhaustively():
    """All S4 frames with <= 4 worlds, every valuation of 2 atoms."""
    sample = [f for f in enumerate_formulas(5, 2) if has_diamond(f)][::40]
    sample.append(parse_formula("<>[]p0 -> []<>p1"))
    frames = [(n, s) for n in range(1, 5) for s in preorders(n)]
    for f in sample:
        g = to_box_form(f)
        assert not has_diamond(g)
        for n, succ in frames:
            for v0 in range(1 << n):
                for v1 in range(1 << n):
                    val = {0: v0, 1: v1}
                    assert mask_eval(f, n, succ, val) == mask_eval(g, n, succ, val)


def test_modal_depth_examples():
    assert modal_depth(Atom(0)) == 0
    assert modal_depth(Box(Atom(0))) == 1
    assert modal_depth(parse_formula("<>[]p0 -> []<>p0")) == 2


@settings(max_examples=50)
@given(formulas())
def test_box_form_keeps_depth(f):
    assert modal_depth(to_box_form(f)) == modal_depth(f)


def test_enumeration_counts_by_size():
    fs = list(enumerate_formulas(4, 1))
    assert len(set(fs)) == len(fs)
    assert max(size(f) for f in fs) == 4
    assert sum(size(f) == 1 for f in fs) == 1
