"""Finitary permutations on a truncated coordinate set.

Covers the overlapping pairings P = {2k, 2k+1} and Q = {2k+1, 2k+2}, group
closure by breadth-first search, base subgroups of the normal filter
(``FixSpec``), and the column action on Cohen conditions.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Mapping, Sequence


class TruncationError(ValueError):
    """The truncation is too small for the requested construction."""


@dataclass(frozen=True)
class Truncation:
    coord_count: int
    bit_depth: int = 1

    def __post_init__(self):
        if self.coord_count < 1 or self.bit_depth < 1:
            raise ValueError(f"bad truncation {self.coord_count}x{self.bit_depth}")

    @property
    def cells(self) -> int:
        return self.coord_count * self.bit_depth


# -- permutations ----------------------------------------------------------


@dataclass(frozen=True, order=True)
class Permutation:
    """A bijection of ``0..n-1`` stored densely as its image tuple."""

    images: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.images) != list(range(len(self.images))):
            raise ValueError(f"not a permutation: {self.images}")

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @classmethod
    def from_cycles(cls, n: int, cycles: Iterable[Sequence[int]]) -> "Permutation":
        img = list(range(n))
        for cyc in cycles:
            for i, a in enumerate(cyc):
                b = cyc[(i + 1) % len(cyc)]
                if not (0 <= a < n and 0 <= b < n):
                    raise TruncationError(f"cycle {tuple(cyc)} leaves 0..{n - 1}")
                img[a] = b
        return cls(tuple(img))

    @classmethod
    def transposition(cls, n: int, a: int, b: int) -> "Permutation":
        return cls.from_cycles(n, [(a, b)])

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, x: int) -> int:
        return self.images[x] if x < len(self.images) else x

    @property
    def support(self) -> frozenset[int]:
        return frozenset(i for i, j in enumerate(self.images) if i != j)

    def is_identity(self) -> bool:
        return not self.support

    def compose(self, other: "Permutation") -> "Permutation":
        """``self ∘ other``: apply ``other`` first."""
        self._same_size(other)
        return Permutation(tuple(self.images[j] for j in other.images))

    __mul__ = compose

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, j in enumerate(self.images):
            inv[j] = i
        return Permutation(tuple(inv))

    def _same_size(self, other: "Permutation"):
        if other.n != self.n:
            raise ValueError(f"permutations over {self.n} and {other.n} coordinates")

    def cycles(self) -> list[tuple[int, ...]]:
        seen, out = set(), []
        for i in range(self.n):
            if i in seen or self.images[i] == i:
                continue
            cyc = [i]
            j = self.images[i]
            while j != i:
                cyc.append(j)
                j = self.images[j]
            seen.update(cyc)
            out.append(tuple(cyc))
        return out

    def cycle_notation(self) -> str:
        return "".join("(" + " ".join(map(str, c)) + ")" for c in self.cycles()) or "()"

    def __str__(self) -> str:
        return self.cycle_notation()


_CYCLE_RE = re.compile(r"\(\s*(\d+(?:\s+\d+)*)?\s*\)")


def parse_cycles(text: str, n: int) -> Permutation:
    text = text.strip()
    cycles, pos = [], 0
    for m in _CYCLE_RE.finditer(text):
        if text[pos:m.start()].strip():
            raise ValueError(f"could not parse permutation {text!r}")
        if m.group(1):
            cycles.append([int(x) for x in m.group(1).split()])
        pos = m.end()
    if text[pos:].strip() or not text:
        raise ValueError(f"could not parse permutation {text!r}")
    return Permutation.from_cycles(n, cycles)


@dataclass
class ClosureResult:
    order: int
    elements: frozenset[Permutation] | None
    truncated: bool = False


def group_closure(gens: Sequence[Permutation], budget: int = 100_000,
                  n: int | None = None) -> ClosureResult:
    """Breadth-first closure of ``gens`` under composition and inverse.

    With more than ``budget`` elements the search stops and reports the
    partial count with ``truncated=True``.
    """
    if not gens and n is None:
        raise ValueError("group_closure needs generators or an explicit size n")
    size = gens[0].n if gens else n
    for g in gens:
        if g.n != size:
            raise ValueError("generators act on different truncations")
    steps = list(dict.fromkeys(list(gens) + [g.inverse() for g in gens]))
    ident = Permutation.identity(size)
    seen = {ident}
    queue = deque([ident])
    while queue:
        x = queue.popleft()
        for g in steps:
            y = g.compose(x)
            if y not in seen:
                if len(seen) >= budget:
                    return ClosureResult(len(seen), None, True)
                seen.add(y)
                queue.append(y)
    return ClosureResult(len(seen), frozenset(seen))


def group_elements(gens: Sequence[Permutation], n: int) -> list[Permutation]:
    """Sorted element list of the (small) group generated by ``gens``."""
    res = group_closure(gens, n=n)
    if res.truncated:
        raise TruncationError("group too large to enumerate")
    return sorted(res.elements)


def orbit(point, gens: Sequence, act) -> list:
    """Orbit of ``point`` under ``gens`` for the action ``act(g, x)``, in BFS order."""
    seen = {point: None}
    queue = deque([point])
    while queue:
        x = queue.popleft()
        for g in gens:
            y = act(g, x)
            if y not in seen:
                seen[y] = None
                queue.append(y)
    return list(seen)


# -- block partitions ------------------------------------------------------


@dataclass(frozen=True)
class BlockPartition:
    """Pairing of an ordered coordinate list ``coords`` (the enumeration e).

    Blocks are ``{e(2k+delta), e(2k+1+delta)}``; coordinates left over are
    singletons.
    """

    delta: int
    coords: tuple[int, ...]
    blocks: tuple[tuple[int, int], ...]
    singletons: tuple[int, ...]

    @property
    def label(self) -> str:
        return "PQ"[self.delta]

    def block_of(self, c: int) -> int | None:
        for k, b in enumerate(self.blocks):
            if c in b:
                return k
        return None

    def to_dict(self) -> dict:
        return {"delta": self.delta, "label": self.label, "coords": list(self.coords),
                "blocks": [list(b) for b in self.blocks], "singletons": list(self.singletons)}


def partition_on(delta: int, coords: Sequence[int]) -> BlockPartition:
    if delta not in (0, 1):
        raise ValueError("delta must be 0 (P) or 1 (Q)")
    coords = tuple(coords)
    blocks = []
    i = delta
    while i + 1 < len(coords):
        blocks.append((coords[i], coords[i + 1]))
        i += 2
    used = {c for b in blocks for c in b}
    singles = tuple(c for c in coords if c not in used)
    return BlockPartition(delta, coords, tuple(blocks), singles)


def make_partition(delta: int, trunc: Truncation) -> BlockPartition:
    return partition_on(delta, range(trunc.coord_count))


def within_block_generators(bp: BlockPartition, n: int | None = None) -> list[Permutation]:
    """One transposition per 2-element block, over ``n`` coordinates."""
    n = n if n is not None else max(bp.coords, default=-1) + 1
    return [Permutation.transposition(n, a, b) for a, b in bp.blocks]


def is_within_block(pi: Permutation, bp: BlockPartition) -> bool:
    """``pi`` maps every block of ``bp`` to itself and fixes all other coordinates."""
    moved = pi.support
    for c in moved:
        k = bp.block_of(c)
        if k is None or pi(c) not in bp.blocks[k]:
            return False
    return True


# -- filter base subgroups -------------------------------------------------


@dataclass(frozen=True)
class FixSpec:
    """The subgroup Fix(B*, {C_b}) of the within-block group of a partition.

    ``fixed_blocks`` are fixed pointwise; for other blocks, ``fixed_coords``
    lists coordinates fixed pointwise. Every block not listed in either way
    is free (moved). At truncation the moved blocks are the explicit
    complement standing in for "all but finitely many".
    """

    fixed_blocks: frozenset[int] = frozenset()
    fixed_coords: Mapping[int, frozenset[int]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "fixed_blocks", frozenset(self.fixed_blocks))
        fc = {int(k): frozenset(v) for k, v in dict(self.fixed_coords).items() if v}
        object.__setattr__(self, "fixed_coords", dict(sorted(fc.items())))

    def __hash__(self):
        return hash((self.fixed_blocks, tuple(self.fixed_coords.items())))

    @classmethod
    def trivial(cls, bp: BlockPartition) -> "FixSpec":
        """Fixes every block: the trivial subgroup {1}."""
        return cls(frozenset(range(len(bp.blocks))))

    @classmethod
    def whole_group(cls) -> "FixSpec":
        return cls()

    def validate(self, bp: BlockPartition):
        for k in self.fixed_blocks:
            if not 0 <= k < len(bp.blocks):
                raise ValueError(f"fixed block {k} not in partition")
        for k, cs in self.fixed_coords.items():
            if not 0 <= k < len(bp.blocks) or not cs <= set(bp.blocks[k]):
                raise ValueError(f"fixed coordinates {sorted(cs)} not inside block {k}")

    def free_block_coords(self, bp: BlockPartition, k: int) -> tuple[int, ...]:
        if k in self.fixed_blocks:
            return ()
        return tuple(c for c in bp.blocks[k] if c not in self.fixed_coords.get(k, ()))

    def moved_blocks(self, bp: BlockPartition) -> list[int]:
        return [k for k in range(len(bp.blocks)) if len(self.free_block_coords(bp, k)) >= 2]

    def fixed_coordinates(self, bp: BlockPartition) -> frozenset[int]:
        """Coordinates of ``bp.coords`` fixed pointwise by the whole subgroup."""
        moved = {c for k in self.moved_blocks(bp) for c in self.free_block_coords(bp, k)}
        return frozenset(c for c in bp.coords if c not in moved)

    def generators(self, bp: BlockPartition, n: int) -> list[Permutation]:
        gens = []
        for k in self.moved_blocks(bp):
            free = self.free_block_coords(bp, k)
            gens += [Permutation.transposition(n, free[i], free[i + 1])
                     for i in range(len(free) - 1)]
        return gens

    def elements(self, bp: BlockPartition, n: int) -> list[Permutation]:
        """All subgroup elements: a product of symmetric groups on free parts."""
        factors = []
        for k in self.moved_blocks(bp):
            free = self.free_block_coords(bp, k)
            factors.append(group_elements([Permutation.transposition(n, free[i], free[i + 1])
                                           for i in range(len(free) - 1)], n))
        out = []
        for combo in product(*factors):
            g = Permutation.identity(n)
            for h in combo:
                g = h.compose(g)
            out.append(g)
        return sorted(out)

    def contains(self, pi: Permutation, bp: BlockPartition) -> bool:
        if not is_within_block(pi, bp):
            return False
        fixed = self.fixed_coordinates(bp)
        return all(pi(c) == c for c in fixed)

    def to_dict(self, bp: BlockPartition | None = None) -> dict:
        doc = {
            "fixed_blocks": sorted(self.fixed_blocks),
            "fixed_coords": {str(k): sorted(v) for k, v in self.fixed_coords.items()},
        }
        if bp is not None:
            doc = {"delta": bp.delta, "blocks": [list(b) for b in bp.blocks], **doc,
                   "moved_blocks": self.moved_blocks(bp)}
        return doc

    def to_json(self, bp: BlockPartition | None = None) -> str:
        return json.dumps(self.to_dict(bp), sort_keys=True)


def fixspec_fixing(bp: BlockPartition, coords: Iterable[int]) -> FixSpec:
    """The base subgroup fixing ``coords`` pointwise and moving every other block."""
    coords = set(coords)
    whole, partial = set(), {}
    for k, b in enumerate(bp.blocks):
        hit = coords & set(b)
        if hit == set(b):
            whole.add(k)
        elif hit:
            partial[k] = frozenset(hit)
    return FixSpec(frozenset(whole), partial)


def fixspec_from_dict(doc: Mapping) -> FixSpec:
    return FixSpec(frozenset(doc.get("fixed_blocks", ())),
                   {int(k): frozenset(v) for k, v in doc.get("fixed_coords", {}).items()})


def conjugate_fixspec(pi: Permutation, h: FixSpec, bp: BlockPartition) -> FixSpec:
    """``pi Fix(B*, {C_b}) pi^-1 = Fix(B*, {pi(C_b)})`` for within-block ``pi``."""
    if not is_within_block(pi, bp):
        raise ValueError(f"{pi} is not a within-block permutation for partition {bp.label}")
    return FixSpec(h.fixed_blocks,
                   {k: frozenset(pi(c) for c in cs) for k, cs in h.fixed_coords.items()})


def intersect_fixspecs(a: FixSpec, b: FixSpec) -> FixSpec:
    """A base subgroup contained in both: unite what is fixed."""
    keys = set(a.fixed_coords) | set(b.fixed_coords)
    return FixSpec(a.fixed_blocks | b.fixed_blocks,
                   {k: a.fixed_coords.get(k, frozenset()) | b.fixed_coords.get(k, frozenset())
                    for k in keys})


# -- Cohen conditions ------------------------------------------------------

Cell = tuple[int, int]


@dataclass(frozen=True, order=True)
class Condition:
    """Finite partial function (coord, bit) -> {0, 1}, stored sorted."""

    entries: tuple[tuple[Cell, int], ...] = ()

    def __post_init__(self):
        items = sorted(dict(self.entries).items())
        if len(items) != len(self.entries):
            cells = [c for c, _ in self.entries]
            if len(set(cells)) != len(cells):
                raise ValueError(f"condition is not functional: {self.entries}")
        for (c, m), v in items:
            if v not in (0, 1) or c < 0 or m < 0:
                raise ValueError(f"bad entry {(c, m)}->{v}")
        object.__setattr__(self, "entries", tuple(items))

    @classmethod
    def of(cls, mapping: Mapping[Cell, int] | Iterable[tuple[Cell, int]] = ()) -> "Condition":
        items = mapping.items() if isinstance(mapping, Mapping) else mapping
        return cls(tuple(items))

    def as_dict(self) -> dict[Cell, int]:
        return dict(self.entries)

    @property
    def domain(self) -> frozenset[Cell]:
        return frozenset(c for c, _ in self.entries)

    @property
    def coords(self) -> frozenset[int]:
        return frozenset(c for (c, _), _ in self.entries)

    def compatible(self, other: "Condition") -> bool:
        mine = self.as_dict()
        return all(mine.get(cell, v) == v for cell, v in other.entries)

    def union(self, other: "Condition") -> "Condition":
        if not self.compatible(other):
            raise ValueError("incompatible conditions")
        return Condition.of({**self.as_dict(), **other.as_dict()})

    def extends(self, other: "Condition") -> bool:
        """``self <= other`` in the forcing order (``self`` is stronger)."""
        mine = self.as_dict()
        return all(mine.get(cell) == v for cell, v in other.entries)

    def fits(self, trunc: Truncation) -> bool:
        return all(c < trunc.coord_count and m < trunc.bit_depth for (c, m), _ in self.entries)

    def to_dict(self) -> dict[str, int]:
        return {f"({c},{m})": v for (c, m), v in self.entries}

    def __str__(self) -> str:
        return "{" + ", ".join(f"({c},{m})->{v}" for (c, m), v in self.entries) + "}"


def act_on_condition(pi: Permutation, p: Condition) -> Condition:
    """``(pi . p)(j, m) = p(pi^-1(j), m)``: entry (c, m) moves to (pi(c), m)."""
    return Condition.of(((pi(c), m), v) for (c, m), v in p.entries)
