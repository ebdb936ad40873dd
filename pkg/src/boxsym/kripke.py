"""Finite Kripke frames and models, S4 decision with countermodels, unraveling.

Worlds are the integers ``0..world_count-1``. Relations are frozensets of
ordered pairs. Truth sets are computed bottom-up as Python sets, which keeps
evaluation linear in the formula size for a fixed model.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .modal import (And, Atom, Box, Diamond, Formula, Implies, Not, atoms,
                    has_diamond, to_text)

Pair = tuple[int, int]


class ModelError(ValueError):
    """Out-of-range world or atom, or a malformed frame."""


@dataclass(frozen=True)
class Frame:
    world_count: int
    relation: frozenset[Pair]
    root: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "relation", frozenset(self.relation))
        n = self.world_count
        if n < 1:
            raise ModelError("a frame needs at least one world")
        for a, b in self.relation:
            if not (0 <= a < n and 0 <= b < n):
                raise ModelError(f"edge {(a, b)} leaves the {n} worlds")
        if self.root is not None and not 0 <= self.root < n:
            raise ModelError(f"root {self.root} out of range")

    @property
    def worlds(self) -> range:
        return range(self.world_count)

    def successors(self, w: int) -> list[int]:
        return sorted(v for (u, v) in self.relation if u == w)

    def successor_map(self) -> dict[int, frozenset[int]]:
        succ: dict[int, set[int]] = {w: set() for w in self.worlds}
        for a, b in self.relation:
            succ[a].add(b)
        return {w: frozenset(s) for w, s in succ.items()}

    def is_s4(self) -> bool:
        props = frame_properties(self)
        return props.reflexive and props.transitive


@dataclass(frozen=True)
class KripkeModel:
    frame: Frame
    valuation: Mapping[int, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        val = {int(p): frozenset(ws) for p, ws in dict(self.valuation).items()}
        for p, ws in val.items():
            bad = [w for w in ws if not 0 <= w < self.frame.world_count]
            if bad:
                raise ModelError(f"valuation of p{p} mentions worlds {bad}")
        object.__setattr__(self, "valuation", dict(sorted(val.items())))

    def __hash__(self):
        return hash((self.frame, tuple(self.valuation.items())))

    @property
    def world_count(self) -> int:
        return self.frame.world_count


def reflexive_transitive_closure(n: int, edges: Iterable[Pair]) -> frozenset[Pair]:
    reach = [{w} for w in range(n)]
    for a, b in edges:
        reach[a].add(b)
    changed = True
    while changed:
        changed = False
        for w in range(n):
            extra = set().union(*(reach[v] for v in reach[w])) - reach[w]
            if extra:
                reach[w] |= extra
                changed = True
    return frozenset((w, v) for w in range(n) for v in reach[w])


# -- evaluation ------------------------------------------------------------


def truth_set(m: KripkeModel, f: Formula, _cache: dict | None = None) -> frozenset[int]:
    """The set of worlds of ``m`` where ``f`` holds."""
    cache = {} if _cache is None else _cache
    if f in cache:
        return cache[f]
    worlds = frozenset(m.frame.worlds)
    if isinstance(f, Atom):
        if f.index not in m.valuation:
            raise ModelError(f"atom p{f.index} is not in the valuation domain")
        out = m.valuation[f.index]
    elif isinstance(f, Not):
        out = worlds - truth_set(m, f.sub, cache)
    elif isinstance(f, And):
        out = truth_set(m, f.left, cache) & truth_set(m, f.right, cache)
    elif isinstance(f, Implies):
        out = (worlds - truth_set(m, f.left, cache)) | truth_set(m, f.right, cache)
    elif isinstance(f, (Box, Diamond)):
        inner = truth_set(m, f.sub, cache)
        succ = m.frame.successor_map()
        if isinstance(f, Box):
            out = frozenset(w for w in worlds if succ[w] <= inner)
        else:
            out = frozenset(w for w in worlds if succ[w] & inner)
    else:
        raise TypeError(f"not a formula: {f!r}")
    cache[f] = frozenset(out)
    return cache[f]


def evaluate(m: KripkeModel, w: int, f: Formula) -> bool:
    if not 0 <= w < m.world_count:
        raise ModelError(f"world {w} out of range for {m.world_count} worlds")
    return w in truth_set(m, f)


@dataclass(frozen=True)
class FrameProperties:
    reflexive: bool
    transitive: bool
    directed: bool

    def as_dict(self) -> dict[str, bool]:
        return {"reflexive": self.reflexive, "transitive": self.transitive,
                "directed": self.directed}


def frame_properties(fr: Frame) -> FrameProperties:
    rel = fr.relation
    succ = fr.successor_map()
    reflexive = all((w, w) in rel for w in fr.worlds)
    transitive = all((a, c) in rel for (a, b) in rel for c in succ[b])
    directed = all(
        succ[u] & succ[v]
        for w in fr.worlds for u in succ[w] for v in succ[w]
    )
    return FrameProperties(reflexive, transitive, directed)


# -- serialization ---------------------------------------------------------


def model_to_dict(m: KripkeModel, root: int | None = None) -> dict:
    root = m.frame.root if root is None else root
    return {
        "worlds": m.world_count,
        "edges": [list(e) for e in sorted(m.frame.relation)],
        "valuation": {f"p{p}": sorted(ws) for p, ws in m.valuation.items()},
        "root": root,
    }


def model_from_dict(doc: Mapping) -> KripkeModel:
    val = {int(k.lstrip("p")): frozenset(v) for k, v in doc.get("valuation", {}).items()}
    frame = Frame(int(doc["worlds"]), frozenset(tuple(e) for e in doc["edges"]),
                  doc.get("root"))
    return KripkeModel(frame, val)


def model_to_json(m: KripkeModel, root: int | None = None) -> str:
    return json.dumps(model_to_dict(m, root), sort_keys=True)


# -- S4 tableau ------------------------------------------------------------
#
# Signed formulas (True = asserted, False = denied) over the box form. A
# tableau node is a saturated, clash-free set; F[]A spawns a successor seeded
# with every T[]B of the node plus FA. A seed contained in a node already on
# the current path is satisfied by a back-link to that node.

Signed = tuple[bool, Formula]


class BudgetExceeded(RuntimeError):
    def __init__(self, budget: int):
        super().__init__(f"S4 tableau exceeded its node budget of {budget}")
        self.budget = budget


class DecisionError(RuntimeError):
    """Internal failure: an extracted countermodel did not refute the input."""


@dataclass(frozen=True)
class Theorem:
    formula: Formula
    nodes: int

    is_theorem = True


@dataclass(frozen=True)
class Countermodel:
    formula: Formula
    model: KripkeModel
    world: int
    nodes: int

    is_theorem = False


def _key(s: Signed) -> tuple[str, bool]:
    return (to_text(s[1]), s[0])


class _Tableau:
    def __init__(self, budget: int):
        self.budget = budget
        self.nodes = 0
        self.unsat: set[frozenset[Signed]] = set()

    def saturations(self, seed: frozenset[Signed]) -> Iterator[frozenset[Signed]]:
        yield from self._saturate(set(seed), sorted(seed, key=_key))

    def _saturate(self, done: set[Signed], todo: list[Signed]) -> Iterator[frozenset[Signed]]:
        # stack-free recursion over beta-branching; alpha rules are applied eagerly
        while todo:
            sign, f = todo.pop(0)
            if (not sign, f) in done:
                return
            expand: list[Signed] = []
            branches: list[list[Signed]] | None = None
            if isinstance(f, Not):
                expand = [(not sign, f.sub)]
            elif isinstance(f, And):
                if sign:
                    expand = [(True, f.left), (True, f.right)]
                else:
                    branches = [[(False, f.left)], [(False, f.right)]]
            elif isinstance(f, Implies):
                if sign:
                    branches = [[(False, f.left)], [(True, f.right)]]
                else:
                    expand = [(True, f.left), (False, f.right)]
            elif isinstance(f, Box) and sign:
                expand = [(True, f.sub)]
            if branches is not None:
                for extra in branches:
                    new = [s for s in extra if s not in done]
                    if any((not s[0], s[1]) in done for s in new):
                        continue
                    yield from self._saturate(done | set(new), todo + new)
                return
            for s in expand:
                if (not s[0], s[1]) in done:
                    return
                if s not in done:
                    done.add(s)
                    todo.append(s)
        if not any((not s, f) in done for (s, f) in done):
            yield frozenset(done)

    def expand(self, seed: frozenset[Signed], path: list["_Node"]) -> "_Node | None":
        if seed in self.unsat:
            return None
        for sat in self.saturations(seed):
            self.nodes += 1
            if self.nodes > self.budget:
                raise BudgetExceeded(self.budget)
            node = _Node(sat)
            boxes = {s for s in sat if s[0] and isinstance(s[1], Box)}
            demands = sorted((s for s in sat if not s[0] and isinstance(s[1], Box)), key=_key)
            ok = True
            for _, f in demands:
                child_seed = frozenset(boxes | {(False, f.sub)})
                target = next((a for a in path + [node] if child_seed <= a.formulas), None)
                if target is not None:
                    node.links.append(target)
                    continue
                child = self.expand(child_seed, path + [node])
                if child is None:
                    ok = False
                    break
                node.children.append(child)
            if ok:
                return node
        self.unsat.add(seed)
        return None


class _Node:
    def __init__(self, formulas: frozenset[Signed]):
        self.formulas = formulas
        self.children: list[_Node] = []
        self.links: list[_Node] = []


def _extract(root: _Node, letters: Iterable[int]) -> KripkeModel:
    order: list[_Node] = []
    index: dict[int, int] = {}

    def visit(node: _Node):
        index[id(node)] = len(order)
        order.append(node)
        for c in node.children:
            visit(c)

    visit(root)
    edges = []
    for node in order:
        for other in node.children + node.links:
            edges.append((index[id(node)], index[id(other)]))
    n = len(order)
    rel = reflexive_transitive_closure(n, edges)
    val = {p: frozenset(i for i, node in enumerate(order) if (True, Atom(p)) in node.formulas)
           for p in sorted(letters)}
    return KripkeModel(Frame(n, rel, 0), val)


def restrict(m: KripkeModel, keep: Iterable[int]) -> tuple[KripkeModel, dict[int, int]]:
    """Submodel on ``keep`` (renumbered in order); returns the old->new map."""
    keep = sorted(set(keep))
    new = {w: i for i, w in enumerate(keep)}
    rel = frozenset((new[a], new[b]) for (a, b) in m.frame.relation if a in new and b in new)
    root = new.get(m.frame.root) if m.frame.root is not None else None
    val = {p: frozenset(new[w] for w in ws if w in new) for p, ws in m.valuation.items()}
    return KripkeModel(Frame(len(keep), rel, root), val), new


def _greedy_shrink(m: KripkeModel, world: int, f: Formula) -> tuple[KripkeModel, int]:
    keep = set(m.frame.worlds)
    changed = True
    while changed:
        changed = False
        for w in sorted(keep):
            if w == world:
                continue
            trial, new = restrict(m, keep - {w})
            if not evaluate(trial, new[world], f):
                keep.discard(w)
                changed = True
    out, new = restrict(m, keep)
    return out, new[world]


def minimize_countermodel(m: KripkeModel, world: int, f: Formula) -> tuple[KripkeModel, int]:
    """Shrink a countermodel by greedy world removal.

    Every refuting world is tried as the new root: its generated submodel
    still refutes ``f``, and greedy removal runs from there. The smallest
    result wins, ties broken by canonical bitsets.
    """
    bad = sorted(set(m.frame.worlds) - truth_set(m, f))
    if world not in bad:
        raise ModelError(f"world {world} does not refute {to_text(f)}")
    succ = m.frame.successor_map()
    best = None
    for w in bad:
        sub, new = restrict(m, succ[w] | {w})
        small, root = _greedy_shrink(sub, new[w], f)
        canon = canonical_form(small, root)
        score = (canon.world_count, relation_bits(canon.world_count, canon.frame.relation),
                 valuation_bits(canon.world_count, canon.valuation))
        if best is None or score < best[0]:
            best = (score, canon)
    return best[1], 0


def relation_bits(n: int, rel: Iterable[Pair]) -> int:
    return sum(1 << (a * n + b) for a, b in rel)


def valuation_bits(n: int, val: Mapping[int, Iterable[int]]) -> int:
    return sum(1 << (p * n + w) for p, ws in val.items() for w in ws)


def canonical_form(m: KripkeModel, world: int, max_worlds: int = 7) -> KripkeModel:
    """Relabel so ``world`` is 0 and (relation bits, valuation bits) is least.

    Models above ``max_worlds`` are only rerooted, not searched.
    """
    n = m.world_count
    others = [w for w in m.frame.worlds if w != world]
    perms = itertools.permutations(others) if n <= max_worlds else [tuple(others)]
    best = None
    for perm in perms:
        order = (world,) + tuple(perm)
        new = {old: i for i, old in enumerate(order)}
        rel = frozenset((new[a], new[b]) for a, b in m.frame.relation)
        val = {p: frozenset(new[w] for w in ws) for p, ws in m.valuation.items()}
        score = (relation_bits(n, rel), valuation_bits(n, val))
        if best is None or score < best[0]:
            best = (score, rel, val)
    _, rel, val = best
    return KripkeModel(Frame(n, rel, 0), val)


def decide_s4(f: Formula, budget: int = 200_000, minimize: bool = True) -> Theorem | Countermodel:
    """Decide S4-validity of a box-form formula.

    Returns `Theorem` or a `Countermodel` whose model is reflexive,
    transitive and refutes ``f`` at the returned world (world 0). The model
    is checked by `evaluate` before it is returned. Raises `BudgetExceeded`
    when the tableau grows beyond ``budget`` nodes.
    """
    if has_diamond(f):
        raise ValueError("decide_s4 expects a box-normalized formula; apply to_box_form first")
    tab = _Tableau(budget)
    root = tab.expand(frozenset({(False, f)}), [])
    if root is None:
        return Theorem(f, tab.nodes)
    model = _extract(root, sorted(atoms(f)))
    if evaluate(model, 0, f):
        raise DecisionError(f"extracted model does not refute {to_text(f)}")
    world = 0
    if minimize:
        model, world = minimize_countermodel(model, world, f)
    props = frame_properties(model.frame)
    if evaluate(model, world, f) or not (props.reflexive and props.transitive):
        raise DecisionError(f"minimized countermodel for {to_text(f)} failed verification")
    return Countermodel(f, model, world, tab.nodes)


# -- bounded exhaustive search ---------------------------------------------


def preorders(n: int) -> Iterator[frozenset[Pair]]:
    """All reflexive-transitive relations on n worlds, by increasing bitset."""
    off = [(a, b) for a in range(n) for b in range(n) if a != b]
    diag = [(w, w) for w in range(n)]
    found = []
    for mask in range(1 << len(off)):
        rel = set(diag) | {off[i] for i in range(len(off)) if mask >> i & 1}
        if all((a, c) in rel for (a, b) in rel for (b2, c) in rel if b2 == b):
            found.append(frozenset(rel))
    found.sort(key=lambda r: relation_bits(n, r))
    return iter(found)


def s4_models(max_worlds: int, atom_indices: Iterable[int]) -> Iterator[KripkeModel]:
    """Every reflexive-transitive model up to ``max_worlds`` worlds, ordered by
    (world count, relation bits, valuation bits)."""
    letters = sorted(set(atom_indices))
    for n in range(1, max_worlds + 1):
        for rel in preorders(n):
            frame = Frame(n, rel, 0)
            for vbits in range(1 << (n * len(letters))):
                val = {p: frozenset(w for w in range(n) if vbits >> (i * n + w) & 1)
                       for i, p in enumerate(letters)}
                yield KripkeModel(frame, val)


def search_countermodel(f: Formula, max_worlds: int = 3,
                        atom_indices: Iterable[int] | None = None) -> tuple[KripkeModel, int] | None:
    """First refuting (model, world) in the fixed enumeration order, or None."""
    letters = atoms(f) if atom_indices is None else set(atom_indices) | atoms(f)
    for m in s4_models(max_worlds, letters):
        bad = sorted(set(m.frame.worlds) - truth_set(m, f))
        if bad:
            return m, bad[0]
    return None


# -- unraveling ------------------------------------------------------------


def unravel(m: KripkeModel, w0: int, depth: int) -> tuple[KripkeModel, list[tuple[int, ...]]]:
    """Unravel ``m`` from ``w0`` into a tree of R-paths of length <= depth.

    Paths never repeat their last world: reflexive steps add nothing once the
    tree is closed reflexively. Returns the tree model (reflexive-transitive
    closure of the tree, root 0) and, per tree node, its path; the original
    world of node ``i`` is ``paths[i][-1]``.
    """
    if not 0 <= w0 < m.world_count:
        raise ModelError(f"world {w0} out of range")
    succ = m.frame.successor_map()
    paths: list[tuple[int, ...]] = [(w0,)]
    edges: list[Pair] = []
    frontier = [0]
    for _ in range(depth):
        nxt = []
        for i in frontier:
            last = paths[i][-1]
            for v in sorted(succ[last]):
                if v == last:
                    continue
                paths.append(paths[i] + (v,))
                edges.append((i, len(paths) - 1))
                nxt.append(len(paths) - 1)
        frontier = nxt
    n = len(paths)
    rel = reflexive_transitive_closure(n, edges)
    val = {p: frozenset(i for i, path in enumerate(paths) if path[-1] in ws)
           for p, ws in m.valuation.items()}
    return KripkeModel(Frame(n, rel, 0), val), paths


def tree_edges(fr: Frame) -> frozenset[Pair]:
    """Covering pairs of a (closed) tree order: its parent->child edges."""
    strict = {(a, b) for (a, b) in fr.relation if a != b}
    succ: dict[int, set[int]] = {w: set() for w in fr.worlds}
    for a, b in strict:
        succ[a].add(b)
    return frozenset((a, b) for (a, b) in strict
                     if not any(c != b and (c, b) in strict for c in succ[a]))
