"""Compile a finite rooted tree into per-edge symmetric-system data and check it.

Coordinates come in per-depth windows ``J_1, J_2, ...`` of one global
truncation. Edges out of a depth-``d`` node work on ``J_{d+1}``: a signal
region paired by P or Q, followed by fresh coordinates for the atomic names
of the nodes at depth ``d``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .kripke import (
    Frame,
    KripkeModel,
    model_to_dict,
    reflexive_transitive_closure,
    tree_edges,
    truth_set,
)
from .modal import (Atom, Box, Diamond, Formula, Implies, atoms as formula_atoms,
                    enumerate_formulas, modal_depth, to_text)
from .names import (
    EMPTY,
    Assignment,
    Name,
    NoWitnessAtTruncation,
    SignalSpec,
    doubly_invariant_corpus,
    eval_name,
    evaluation_support,
    is_fixed_by,
    refute_selector,
    signal_invariance_check,
    tenacious_relocation,
)
from .perms import (
    BlockPartition,
    Condition,
    FixSpec,
    Truncation,
    TruncationError,
    act_on_condition,
    fixspec_fixing,
    partition_on,
    within_block_generators,
)

SIGNAL_WIDTHS = (6, 4)


class TemplateError(ValueError):
    pass


class NoSiblingsError(TemplateError):
    """The requested depth has no pair of siblings."""


# -- reports ---------------------------------------------------------------


@dataclass
class Clause:
    name: str
    passed: bool | None  # None: recorded but not machine-checkable
    narration: str
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "narration": self.narration,
                "detail": self.detail}


@dataclass
class Report:
    title: str
    clauses: list[Clause] = field(default_factory=list)
    conclusion: str = ""

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.clauses)

    def clause(self, name: str) -> Clause:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"title": self.title, "passed": self.passed, "conclusion": self.conclusion,
                "clauses": [c.to_dict() for c in self.clauses]}

    def summary(self) -> str:
        marks = {True: "pass", False: "FAIL", None: "n/a"}
        lines = [f"{self.title}: {'pass' if self.passed else 'FAIL'}"]
        lines += [f"  {c.name}: {marks[c.passed]} - {c.narration}" for c in self.clauses]
        if self.conclusion:
            lines.append(f"  => {self.conclusion}")
        return "\n".join(lines)


# -- descriptors -----------------------------------------------------------


@dataclass(frozen=True)
class Edge:
    parent: int
    child: int
    depth: int  # depth of the child; the edge acts on J_depth
    label: str  # "P" or "Q"
    partition: BlockPartition
    fixspec: FixSpec
    signal: SignalSpec | None

    def to_dict(self) -> dict:
        return {"parent": self.parent, "child": self.child, "depth": self.depth,
                "label": self.label, "partition": self.partition.to_dict(),
                "filter": self.fixspec.to_dict(self.partition),
                "signal": self.signal.to_dict() if self.signal else None}


@dataclass(frozen=True)
class TemplateDescriptor:
    node_count: int
    root: int
    parent: tuple[int | None, ...]
    depth: tuple[int, ...]
    windows: Mapping[int, tuple[int, ...]]        # d -> J_d
    signal_coords: Mapping[int, tuple[int, ...]]  # d -> signal region of J_d
    atomic: Mapping[tuple[int, int], tuple[int, ...]]  # (node, atom) -> F_{w,p}
    codes: tuple[frozenset[int], ...]             # local code per node
    atoms: tuple[int, ...]
    edges: tuple[Edge, ...]
    filter_state: tuple[tuple[tuple[int, FixSpec], ...], ...]  # per node, along its path
    trunc: Truncation
    signal_width: int

    def children(self, w: int) -> list[int]:
        return [e.child for e in self.edges if e.parent == w]

    def edge_into(self, v: int) -> Edge | None:
        for e in self.edges:
            if e.child == v:
                return e
        return None

    def ancestors_or_self(self, v: int) -> list[int]:
        out = [v]
        while self.parent[out[-1]] is not None:
            out.append(self.parent[out[-1]])
        return out[::-1]

    def atomic_name(self, w: int, p: int) -> Name:
        """``tau_{w,p}``: the statement that bit 0 of every coordinate in F_{w,p} is 0."""
        cond = Condition.of(((c, 0), 0) for c in self.atomic[(w, p)])
        return Name.of([(EMPTY, cond)])

    def to_dict(self) -> dict:
        return {
            "nodes": self.node_count, "root": self.root,
            "parent": list(self.parent), "depth": list(self.depth),
            "windows": {str(d): list(js) for d, js in sorted(self.windows.items())},
            "signal_coords": {str(d): list(js) for d, js in sorted(self.signal_coords.items())},
            "atomic": [{"node": w, "atom": p, "coords": list(cs)}
                       for (w, p), cs in sorted(self.atomic.items())],
            "codes": [sorted(c) for c in self.codes],
            "edges": [e.to_dict() for e in self.edges],
            "filter_state": [[{"depth": d, **h.to_dict()} for d, h in st]
                             for st in self.filter_state],
            "truncation": {"coords": self.trunc.coord_count, "bits": self.trunc.bit_depth},
            "signal_width": self.signal_width,
        }


def _tree_structure(tree: Frame) -> tuple[int, list[int | None], list[int]]:
    edges = tree_edges(tree) if tree.is_s4() else frozenset(
        (a, b) for a, b in tree.relation if a != b)
    parent: list[int | None] = [None] * tree.world_count
    for a, b in sorted(edges):
        if parent[b] is not None:
            raise TemplateError(f"node {b} has two parents; not a tree")
        parent[b] = a
    roots = [w for w in tree.worlds if parent[w] is None]
    if len(roots) != 1:
        raise TemplateError(f"expected one root, found {roots}")
    root = roots[0]
    if tree.root is not None and tree.root != root:
        raise TemplateError(f"declared root {tree.root} is not the tree root {root}")
    depth = [0] * tree.world_count
    order, seen = [root], {root}
    for w in order:
        for v in sorted(b for a, b in edges if a == w):
            if v in seen:
                raise TemplateError("cycle in tree")
            seen.add(v)
            depth[v] = depth[w] + 1
            order.append(v)
    if len(order) != tree.world_count:
        raise TemplateError("tree is not connected")
    return root, parent, depth


def build_template(tree: Frame, valuation: Mapping[int, Iterable[int]],
                   trunc: Truncation) -> TemplateDescriptor:
    """Allocate coordinate windows, labels, filters, signals and atomic names.

    ``tree`` may be given by its parent->child edges or by their
    reflexive-transitive closure.
    """
    root, parent, depth = _tree_structure(tree)
    n = tree.world_count
    val = {p: frozenset(ws) for p, ws in valuation.items()}
    for p, ws in val.items():
        if not ws <= set(range(n)):
            raise TemplateError(f"valuation of p{p} leaves the tree")
    atoms = tuple(sorted(val))
    codes = tuple(frozenset(p for p in atoms if w in val[p]) for w in range(n))
    max_depth = max(depth)
    by_depth = {d: [w for w in range(n) if depth[w] == d] for d in range(max_depth + 1)}

    # window J_{d+1} serves edges out of depth d and atomic names at depth d
    atomic_need = {d + 1: sum(len(codes[w]) for w in by_depth[d]) for d in by_depth}
    edge_depths = set(range(1, max_depth + 1))
    for width in SIGNAL_WIDTHS:
        need = sum(atomic_need.values()) + width * len(edge_depths)
        if need <= trunc.coord_count:
            break
    else:
        raise TruncationError(
            f"template needs {need} coordinates with the smallest signal width "
            f"{SIGNAL_WIDTHS[-1]}, truncation has {trunc.coord_count} "
            f"(deficit {need - trunc.coord_count})")

    windows, signals, atomic = {}, {}, {}
    nxt = 0
    for d in sorted(set(atomic_need) | edge_depths):
        sig = tuple(range(nxt, nxt + width)) if d in edge_depths else ()
        nxt += len(sig)
        start = nxt
        for w in by_depth.get(d - 1, []):
            for p in sorted(codes[w]):
                atomic[(w, p)] = (nxt,)
                nxt += 1
        js = sig + tuple(range(start, nxt))
        if js:
            windows[d] = js
            signals[d] = sig

    labels = {root: "P"}
    for d in range(1, max_depth + 1):
        for w in by_depth[d - 1]:
            kids = sorted(v for v in by_depth[d] if parent[v] == w)
            for i, v in enumerate(kids):
                first = labels[w]
                labels[v] = first if i % 2 == 0 else ("Q" if first == "P" else "P")

    edges = []
    state: list[tuple] = [()] * n
    for d in range(1, max_depth + 1):
        for v in by_depth[d]:
            w = parent[v]
            delta = "PQ".index(labels[v])
            bp = partition_on(delta, windows[d])
            own = [c for p in sorted(codes[w]) for c in atomic[(w, p)]]
            h = fixspec_fixing(bp, own)
            siblings = [u for u in by_depth[d] if parent[u] == w]
            sig = SignalSpec.of(partition_on(delta, signals[d])) if len(siblings) > 1 else None
            edges.append(Edge(w, v, d, labels[v], bp, h, sig))
            state[v] = state[w] + ((d, h),)
    return TemplateDescriptor(n, root, tuple(parent), tuple(depth), windows, signals, atomic,
                              codes, atoms, tuple(edges), tuple(state), trunc, width)


def tree_model(td: TemplateDescriptor) -> KripkeModel:
    """The closed tree with the valuation the template was built for."""
    rel = reflexive_transitive_closure(td.node_count, [(e.parent, e.child) for e in td.edges])
    val = {p: frozenset(w for w in range(td.node_count) if p in td.codes[w]) for p in td.atoms}
    return KripkeModel(Frame(td.node_count, rel, td.root), val)


# -- realization -----------------------------------------------------------


@dataclass(frozen=True)
class Stage:
    """Stage data of a finite realization: decided cells and the accumulated filter."""

    decided: Condition
    filter_state: tuple[tuple[int, FixSpec], ...]

    def assignment(self, trunc: Truncation) -> Assignment:
        """Decided bits as given; undecided bits read as 1 (untoggled)."""
        cols = {c: [1] * trunc.bit_depth for c in range(trunc.coord_count)}
        for (c, m), v in self.decided.entries:
            cols[c][m] = v
        return Assignment.from_columns(trunc, cols)


@dataclass(frozen=True)
class RealizedModel:
    model: KripkeModel
    projection: tuple[int, ...]
    stages: tuple[Stage, ...]
    descriptor: TemplateDescriptor

    def to_dict(self) -> dict:
        return {"model": model_to_dict(self.model, self.model.frame.root),
                "projection": list(self.projection),
                "decided": [s.decided.to_dict() for s in self.stages]}


def realize(td: TemplateDescriptor) -> RealizedModel:
    """One world per rooted path; atoms read off the atomic names at each stage."""
    n = td.node_count
    rel = reflexive_transitive_closure(n, [(e.parent, e.child) for e in td.edges])
    stages = []
    for v in range(n):
        cells = {}
        for w in td.ancestors_or_self(v):
            for p in sorted(td.codes[w]):
                for c in td.atomic[(w, p)]:
                    cells[(c, 0)] = 0
        stages.append(Stage(Condition.of(cells), td.filter_state[v]))
    val = {}
    for p in td.atoms:
        owners = [w for w in range(n) if p in td.codes[w]]
        names = [td.atomic_name(w, p) for w in owners]
        val[p] = frozenset(v for v in range(n)
                           if any(eval_name(x, stages[v].assignment(td.trunc)) for x in names))
    model = KripkeModel(Frame(n, rel, td.root), val)
    return RealizedModel(model, tuple(range(n)), tuple(stages), td)


# -- p-morphism verification -----------------------------------------------


def modal_types(m: KripkeModel, depth: int, atoms: Sequence[int]) -> list:
    """Depth-k types: worlds share them iff they agree on all formulas of depth <= k."""
    succ = m.frame.successor_map()
    base = [tuple(w in m.valuation.get(p, ()) for p in atoms) for w in m.frame.worlds]
    types = list(base)
    for _ in range(depth):
        types = [(base[w], frozenset(types[u] for u in succ[w])) for w in m.frame.worlds]
    return types


def verify_pmorphism(rm: RealizedModel, tree_closed: KripkeModel,
                     sample: Sequence[Formula] = (), depth: int = 2,
                     enum_size: int = 5) -> Report:
    m, f, proj = rm.model, tree_closed, rm.projection
    rep = Report("p-morphism")
    rm_rel, f_rel = m.frame.relation, f.frame.relation

    bad = sorted((x, y) for x, y in rm_rel if (proj[x], proj[y]) not in f_rel)
    rep.clauses.append(Clause("forth", not bad,
                              "every realized step projects to a step of the tree",
                              {"edges_checked": len(rm_rel), "violations": bad[:10]}))
    bad = []
    for x in m.frame.worlds:
        targets = {proj[y] for y in m.frame.successors(x)}
        bad += [(x, u) for u in f.frame.successors(proj[x]) if u not in targets]
    rep.clauses.append(Clause("back", not bad,
                              "every tree step from a projected world lifts to a realized step",
                              {"violations": bad[:10]}))
    missing = sorted(set(f.frame.worlds) - set(proj))
    rep.clauses.append(Clause("surjective", not missing, "every tree node is realized",
                              {"missing": missing}))

    atoms = sorted(set(m.valuation) | set(f.valuation))
    bad = [(x, p) for x in m.frame.worlds for p in atoms
           if (x in m.valuation.get(p, ())) != (proj[x] in f.valuation.get(p, ()))]
    rep.clauses.append(Clause("atoms", not bad,
                              "each world and its projection agree on every letter",
                              {"violations": bad[:10]}))

    mt, ft = modal_types(m, depth, atoms), modal_types(f, depth, atoms)
    bad_types = [x for x in m.frame.worlds if mt[x] != ft[proj[x]]]
    formulas = list(sample)
    if set(atoms) <= {0}:
        formulas += [g for g in enumerate_formulas(enum_size, 1) if modal_depth(g) <= depth]
    bad_formulas = []
    for g in formulas:
        tm, tf = _safe_truth(m, g), _safe_truth(f, g)
        if any((x in tm) != (proj[x] in tf) for x in m.frame.worlds):
            bad_formulas.append(to_text(g))
    rep.clauses.append(Clause(
        "truth", not bad_types and not bad_formulas,
        f"each world and its projection agree on all formulas of modal depth <= {depth}",
        {"type_mismatches": bad_types[:10], "formulas_checked": len(formulas),
         "formula_mismatches": bad_formulas[:10]}))
    return rep


def _safe_truth(m: KripkeModel, g: Formula) -> frozenset[int]:
    val = dict(m.valuation)
    for a in formula_atoms(g):
        val.setdefault(a, frozenset())
    return truth_set(KripkeModel(m.frame, val), g)


# -- sibling non-amalgamation ----------------------------------------------


def sibling_pairs(td: TemplateDescriptor, depth: int) -> list[tuple[Edge, Edge]]:
    out = []
    for w in range(td.node_count):
        kids = [td.edge_into(v) for v in td.children(w) if td.depth[v] == depth]
        for a, b in zip(kids, kids[1:]):
            if a.label != b.label:
                out.append((a, b))
    return out


def sibling_report(td: TemplateDescriptor, depth: int, trunc: Truncation,
                   corpus_size: int = 120, seed: int = 0, rank: int = 2,
                   extra_candidates: Sequence[Name] = (), rank_cap: int | None = 3) -> Report:
    """Assemble the non-amalgamation argument on the first ``trunc.coord_count``
    signal coordinates of ``J_depth``, renumbered from 0.
    """
    pairs = sibling_pairs(td, depth)
    if not pairs:
        raise NoSiblingsError(f"no sibling pair at depth {depth}")
    sig_coords = td.signal_coords.get(depth, ())
    k = trunc.coord_count
    if k > len(sig_coords) or trunc.bit_depth > td.trunc.bit_depth:
        raise TruncationError(f"window of {k} coordinates exceeds the signal region "
                              f"of {len(sig_coords)} at depth {depth}")
    window = sig_coords[:k]
    local = {c: i for i, c in enumerate(window)}
    rep = Report(f"sibling non-amalgamation at depth {depth}")
    a_detail, b_detail, c_detail = [], [], []
    a_ok = b_ok = c_ok = True

    for e1, e2 in pairs:
        bps, specs, sigs = {}, [], {}
        for e in (e1, e2):
            bp = partition_on("PQ".index(e.label), range(k))
            fixed = {local[c] for c in e.fixspec.fixed_coordinates(e.partition) if c in local}
            h = fixspec_fixing(bp, fixed)
            bps[e.label] = bp
            specs.append((h, bp))
            sigs[e.label] = SignalSpec.of(bp)
        gens = {lab: within_block_generators(bps[lab], k) for lab in bps}

        for lab in ("P", "Q"):
            own = signal_invariance_check(sigs[lab], gens[lab])
            other = signal_invariance_check(sigs[lab], gens["Q" if lab == "P" else "P"])
            a_ok &= own
            a_detail.append({"siblings": [e1.child, e2.child], "signal": lab,
                             "own_gens": own, "opposite_gens": other})

        declared = frozenset.intersection(*(h.fixed_coordinates(bp) for h, bp in specs))
        joint = [g for h, bp in specs for g in h.generators(bp, k)]
        corpus = doubly_invariant_corpus(range(k), trunc, specs, corpus_size, seed, rank)
        excluded = []
        for x in extra_candidates:
            if is_fixed_by(x, joint):
                corpus.append(x)
            else:
                excluded.append({"name": x.to_obj(), "reason": "not fixed by both sibling groups"})

        supports = [evaluation_support(x, trunc, rank_cap=rank_cap) for x in corpus]
        inside = [s <= declared for s in supports]
        b_ok &= all(inside)
        outliers = [{"name": x.to_obj(), "support": sorted(s)}
                    for x, s, ok in zip(corpus, supports, inside) if not ok]
        b_detail.append({"siblings": [e1.child, e2.child], "declared_fixed": sorted(declared),
                         "candidates": len(corpus), "inside": sum(inside),
                         "excluded": excluded, "examples_outside": outliers[:3]})

        routes = {"support": 0, "invariance": 0}
        misses = []
        for x in corpus:
            for lab in ("P", "Q"):
                w = refute_selector(x, sigs[lab], trunc, rank_cap=rank_cap)
                if isinstance(w, NoWitnessAtTruncation):
                    misses.append({"name": x.to_obj(), "signal": lab})
                else:
                    routes[w.route] += 1
        c_ok &= not misses
        free = {lab: [i for i, blk in enumerate(bps[lab].blocks)
                      if all(not (set(blk) & s) for s in supports)] for lab in bps}
        c_detail.append({"siblings": [e1.child, e2.child], "witness_routes": routes,
                         "unrefuted": misses[:3], "blocks_outside_every_support": free})

    rep.clauses.append(Clause("a", a_ok,
                              "each sibling's signal pairs are preserved by its own block swaps",
                              {"pairs": a_detail}))
    rep.clauses.append(Clause("b", b_ok,
                              "names fixed by both sibling groups have evaluation support "
                              "inside the declared fixed coordinates",
                              {"pairs": b_detail}))
    rep.clauses.append(Clause("c", c_ok,
                              "every doubly fixed candidate fails to select on both signals",
                              {"pairs": c_detail}))
    rep.conclusion = ("amalgamation impossible at this truncation" if rep.passed
                      else "non-amalgamation not established at this truncation")
    return rep


# -- demos and hypothesis proxies ------------------------------------------


def two_branch_tree() -> Frame:
    """w0 -> w1 -> {w2, w2'} as parent->child edges."""
    return Frame(4, frozenset({(0, 1), (1, 2), (1, 3)}), 0)


DOT2 = Implies(Diamond(Box(Atom(0))), Box(Diamond(Atom(0))))


def dot2_demo(trunc: Truncation = Truncation(16, 1)) -> tuple[KripkeModel, int, Formula]:
    td = build_template(two_branch_tree(), {0: {2}}, trunc)
    rm = realize(td)
    return rm.model, td.root, DOT2


def _probe_conditions(e: Edge) -> list[Condition]:
    moved = e.fixspec.moved_blocks(e.partition)
    probes = []
    if moved:
        a, b = e.partition.blocks[moved[0]]
        probes += [Condition.of({(a, 0): 1}), Condition.of({(a, 0): 1, (b, 0): 0})]
    fixed = sorted(e.fixspec.fixed_coordinates(e.partition))
    if fixed:
        probes.append(Condition.of({(fixed[0], 0): 0}))
    return probes


def check_pi_proxies(td: TemplateDescriptor) -> Report:
    rep = Report("productive-iteration proxies")
    allotted = {}
    acc: set[int] = set()
    for d in sorted(td.windows):
        acc |= set(td.windows[d])
        allotted[d] = frozenset(acc)

    bad = []
    for e in td.edges:
        used = set(e.partition.coords) | set(e.fixspec.fixed_coordinates(e.partition))
        if e.signal:
            used |= set(e.signal.partition.coords)
        extra = sorted(used - allotted.get(e.depth, frozenset()))
        if extra:
            bad.append({"edge": [e.parent, e.child], "coords": extra})
    rep.clauses.append(Clause("PI-1", not bad,
                              "every edge refers only to coordinates allotted at or below its depth",
                              {"violations": bad}))

    probes, bad = 0, []
    for e in td.edges:
        gens = e.fixspec.generators(e.partition, td.trunc.coord_count)
        for p in _probe_conditions(e):
            probes += 1
            try:
                q, s, _ = tenacious_relocation(p, gens, td.trunc)
            except TruncationError as exc:
                bad.append({"edge": [e.parent, e.child], "probe": str(p), "error": str(exc)})
                continue
            if not all(act_on_condition(g, q) == q for g in gens) or not q.extends(s):
                bad.append({"edge": [e.parent, e.child], "probe": str(p), "error": "not invariant"})
    rep.clauses.append(Clause("PI-2", not bad,
                              "probe conditions strengthen to conditions fixed by each edge filter",
                              {"probes": probes, "violations": bad}))
    rep.clauses.append(Clause("PI-3", None,
                              "closure of the respected names under the set operations of ZF "
                              "is not machine-checkable here"))

    bad = []
    for e in td.edges:
        up, down = dict(td.filter_state[e.parent]), dict(td.filter_state[e.child])
        for d, h in up.items():
            g = down.get(d)
            if g is None or not h.fixed_blocks <= g.fixed_blocks or any(
                    not cs <= g.fixed_coords.get(k, frozenset())
                    for k, cs in h.fixed_coords.items()):
                bad.append({"edge": [e.parent, e.child], "depth": d, "reason": "unfixes"})
        new = set(down) - set(up)
        if len(new) > 1:
            bad.append({"edge": [e.parent, e.child], "reason": f"adds {len(new)} windows"})
    rep.clauses.append(Clause("PI-4", not bad,
                              "along every branch the filter only adds finitely many listed "
                              "fixed blocks and never releases one",
                              {"violations": bad}))
    return rep


def is_persistent(model: KripkeModel) -> bool:
    """Every letter true at a world is true at all its successors."""
    return all(b in ws for ws in model.valuation.values() for a, b in model.frame.relation
               if a in ws)


def descriptor_json(td: TemplateDescriptor) -> str:
    return json.dumps(td.to_dict(), sort_keys=True)

