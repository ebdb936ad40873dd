"""Modal formulas: AST, ASCII syntax, canonical printer and structural measures.

Concrete syntax::

    p0 p1 ...      atoms
    ~A             negation          (also ¬)
    []A  <>A       box / diamond     (also □ ◇)
    A & B          conjunction       (also ∧)
    A | B          disjunction       (also ∨), desugared to ~A -> B
    A -> B         implication       (also →), right-associative
    A <-> B        biconditional     (also ↔), desugared to (A -> B) & (B -> A)

Unary operators bind tightest, then ``&``, ``|``, ``->``, ``<->``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union


class Formula:
    """Base class of the formula AST. Nodes are immutable and hashable."""

    __slots__ = ()

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Atom(Formula):
    index: int

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"atom index must be non-negative, got {self.index}")


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Box(Formula):
    sub: Formula


@dataclass(frozen=True)
class Diamond(Formula):
    sub: Formula


UNARY = (Not, Box, Diamond)
BINARY = (And, Implies)

FormulaLike = Union[Formula, str]


def as_formula(f: FormulaLike) -> Formula:
    return parse_formula(f) if isinstance(f, str) else f


# -- syntax errors ---------------------------------------------------------


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, position: int, text: str):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.position = position
        self.text = text


class LexError(FormulaSyntaxError):
    pass


class ParseError(FormulaSyntaxError):
    pass


# -- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<atom>p(?P<idx>\d+))
  | (?P<iff><->|↔)
  | (?P<imp>->|→)
  | (?P<box>\[\]|□)
  | (?P<dia><>|◇)
  | (?P<not>~|¬)
  | (?P<and>&|∧)
  | (?P<or>\||∨)
  | (?P<lpar>\()
  | (?P<rpar>\))
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    pos: int
    value: int | None = None


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise LexError(f"unknown token {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind == "idx":
            kind = "atom"
        if kind != "ws":
            value = int(m.group("idx")) if kind == "atom" else None
            tokens.append(Token(kind, pos, value))
        pos = m.end()
    tokens.append(Token("end", len(text)))
    return tokens


# -- parser ----------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str):
        tok = self.tok
        where = "end of input" if tok.kind == "end" else f"token {tok.kind!r}"
        raise ParseError(f"{message} (found {where})", tok.pos, self.text)

    def parse(self) -> Formula:
        f = self.iff()
        if self.tok.kind != "end":
            self.fail("unexpected trailing input")
        return f

    def iff(self) -> Formula:
        left = self.implication()
        if self.tok.kind == "iff":
            self.advance()
            right = self.iff()
            return And(Implies(left, right), Implies(right, left))
        return left

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.tok.kind == "imp":
            self.advance()
            return Implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.tok.kind == "or":
            self.advance()
            left = Implies(Not(left), self.conjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.unary()
        while self.tok.kind == "and":
            self.advance()
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        kind = self.tok.kind
        if kind == "not":
            self.advance()
            return Not(self.unary())
        if kind == "box":
            self.advance()
            return Box(self.unary())
        if kind == "dia":
            self.advance()
            return Diamond(self.unary())
        if kind == "atom":
            return Atom(self.advance().value)
        if kind == "lpar":
            self.advance()
            f = self.iff()
            if self.tok.kind != "rpar":
                self.fail("unbalanced parenthesis, expected ')'")
            self.advance()
            return f
        self.fail("expected a formula")


def parse_formula(text: str) -> Formula:
    """Parse ASCII (or Unicode) modal syntax into a `Formula`.

    Raises `LexError` for unknown characters and `ParseError` for malformed
    input; both carry the offending position.
    """
    if not text or not text.strip():
        raise ParseError("empty formula", 0, text)
    return _Parser(text).parse()


# -- printer ---------------------------------------------------------------


def to_text(f: Formula) -> str:
    """Canonical printer: binary connectives always parenthesized."""
    if isinstance(f, Atom):
        return f"p{f.index}"
    if isinstance(f, Not):
        return "~" + to_text(f.sub)
    if isinstance(f, Box):
        return "[]" + to_text(f.sub)
    if isinstance(f, Diamond):
        return "<>" + to_text(f.sub)
    if isinstance(f, And):
        return f"({to_text(f.left)} & {to_text(f.right)})"
    if isinstance(f, Implies):
        return f"({to_text(f.left)} -> {to_text(f.right)})"
    raise TypeError(f"not a formula: {f!r}")


# -- transformations and measures -----------------------------------------


def to_box_form(f: Formula) -> Formula:
    """Rewrite every ``<>A`` as ``~[]~A``."""
    if isinstance(f, Atom):
        return f
    if isinstance(f, Diamond):
        return Not(Box(Not(to_box_form(f.sub))))
    if isinstance(f, Not):
        return Not(to_box_form(f.sub))
    if isinstance(f, Box):
        return Box(to_box_form(f.sub))
    return type(f)(to_box_form(f.left), to_box_form(f.right))


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, Atom):
        return ()
    if isinstance(f, UNARY):
        return (f.sub,)
    return (f.left, f.right)


def modal_depth(f: Formula) -> int:
    if isinstance(f, Atom):
        return 0
    inner = max((modal_depth(c) for c in children(f)), default=0)
    return inner + 1 if isinstance(f, (Box, Diamond)) else inner


def size(f: Formula) -> int:
    """Number of AST nodes."""
    return 1 + sum(size(c) for c in children(f))


def subformulas(f: Formula) -> set[Formula]:
    out = {f}
    for c in children(f):
        out |= subformulas(c)
    return out


def atoms(f: Formula) -> set[int]:
    return {g.index for g in subformulas(f) if isinstance(g, Atom)}


def has_diamond(f: Formula) -> bool:
    return any(isinstance(g, Diamond) for g in subformulas(f))


def enumerate_formulas(max_size: int, atom_count: int = 1,
                       diamonds: bool = True) -> Iterator[Formula]:
    """All formulas with at most ``max_size`` nodes, smallest first."""
    by_size: dict[int, list[Formula]] = {1: [Atom(i) for i in range(atom_count)]}
    unary = (Not, Box, Diamond) if diamonds else (Not, Box)
    for n in range(2, max_size + 1):
        level = [op(g) for op in unary for g in by_size[n - 1]]
        for k in range(1, n - 1):
            for op in BINARY:
                for a in by_size[k]:
                    for b in by_size[n - 1 - k]:
                        level.append(op(a, b))
        by_size[n] = level
    for n in range(1, max_size + 1):
        yield from by_size.get(n, [])


# Convenience constructors used across the package.

def Or(a: Formula, b: Formula) -> Formula:
    return Implies(Not(a), b)


def top() -> Formula:
    return Implies(Atom(0), Atom(0))


def bottom() -> Formula:
    return Not(top())


def conj(items: list[Formula]) -> Formula:
    if not items:
        return top()
    out = items[0]
    for g in items[1:]:
        out = And(out, g)
    return out


def disj(items: list[Formula]) -> Formula:
    if not items:
        return bottom()
    out = items[0]
    for g in items[1:]:
        out = Or(out, g)
    return out
