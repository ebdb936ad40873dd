"""Truncated Cohen forcing: names, evaluation, supports and symmetry operations.

Total assignments on a ``Truncation`` replace generic filters, so every
statement about "all generics" becomes an exhaustive loop over assignments.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Iterator, Mapping, Sequence

from .perms import (
    BlockPartition,
    Condition,
    FixSpec,
    Permutation,
    Truncation,
    TruncationError,
    act_on_condition,
    group_elements,
    orbit,
)

DEFAULT_RANK_CAP = 3
DEFAULT_CELL_CAP = 18


class RankError(ValueError):
    pass


class CapExceeded(RuntimeError):
    """Brute-force enumeration would exceed the configured cell cap."""


class SupportInternalError(AssertionError):
    """Greedy support and essential coordinates disagree (should be impossible)."""


# -- assignments -----------------------------------------------------------


@dataclass(frozen=True)
class Assignment:
    """Total map (coord, bit) -> {0, 1}, packed as an int (cell c*B + m)."""

    trunc: Truncation
    bits: int = 0

    def value(self, c: int, m: int = 0) -> int:
        return (self.bits >> (c * self.trunc.bit_depth + m)) & 1

    def column(self, c: int) -> tuple[int, ...]:
        return tuple(self.value(c, m) for m in range(self.trunc.bit_depth))

    def satisfies(self, p: Condition) -> bool:
        b = self.trunc.bit_depth
        return all((self.bits >> (c * b + m)) & 1 == v for (c, m), v in p.entries)

    @classmethod
    def from_columns(cls, trunc: Truncation, cols: Mapping[int, Sequence[int]]) -> "Assignment":
        bits = 0
        for c, col in cols.items():
            for m, v in enumerate(col):
                if v:
                    bits |= 1 << (c * trunc.bit_depth + m)
        return cls(trunc, bits)

    def table(self) -> list[list[int]]:
        return [list(self.column(c)) for c in range(self.trunc.coord_count)]


def all_assignments(trunc: Truncation, cap: int = DEFAULT_CELL_CAP) -> Iterator[Assignment]:
    if trunc.cells > cap:
        raise CapExceeded(f"{trunc.cells} cells exceed the cap of {cap}")
    for bits in range(1 << trunc.cells):
        yield Assignment(trunc, bits)


def act_on_assignment(pi: Permutation, g: Assignment) -> Assignment:
    """``(pi . g)(j, m) = g(pi^-1(j), m)``."""
    b = g.trunc.bit_depth
    bits = 0
    for c in range(g.trunc.coord_count):
        col = (g.bits >> (c * b)) & ((1 << b) - 1)
        bits |= col << (pi(c) * b)
    return Assignment(g.trunc, bits)


# -- names -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Name:
    """A set of (name, condition) pairs, kept sorted and duplicate-free."""

    pairs: tuple[tuple["Name", Condition], ...] = ()
    _key: tuple = field(default=(), init=False, repr=False)
    _hash: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        uniq = {(y.key, p.entries): (y, p) for y, p in self.pairs}
        ordered = tuple(uniq[k] for k in sorted(uniq))
        key = tuple(sorted(uniq))
        object.__setattr__(self, "pairs", ordered)
        object.__setattr__(self, "_key", key)
        object.__setattr__(self, "_hash", hash(key))

    @classmethod
    def of(cls, pairs: Iterable[tuple["Name", Condition]]) -> "Name":
        return cls(tuple(pairs))

    @property
    def key(self) -> tuple:
        return self._key

    def __eq__(self, other):
        return isinstance(other, Name) and self._key == other._key

    def __lt__(self, other: "Name"):
        return self._key < other._key

    def __hash__(self):
        return self._hash

    @property
    def rank(self) -> int:
        return 1 + max((y.rank for y, _ in self.pairs), default=-1)

    def hereditary(self) -> list["Name"]:
        """This name and all sub-names, each once, in sorted order."""
        seen: dict[Name, None] = {}
        stack = [self]
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen[x] = None
            stack.extend(y for y, _ in x.pairs)
        return sorted(seen)

    def coords(self) -> frozenset[int]:
        return frozenset(c for x in self.hereditary() for _, p in x.pairs for c in p.coords)

    def cells(self) -> frozenset[tuple[int, int]]:
        return frozenset(cell for x in self.hereditary() for _, p in x.pairs for cell in p.domain)

    def is_check(self) -> bool:
        return all(not p.entries for x in self.hereditary() for _, p in x.pairs)

    def to_obj(self) -> list:
        return [{"cond": p.to_dict(), "sub": y.to_obj()} for y, p in self.pairs]

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), sort_keys=True)

    def __repr__(self):
        return f"Name({self.to_json()})"


EMPTY = Name()


def name_from_obj(obj: list) -> Name:
    pairs = []
    for item in obj:
        entries = []
        for cell, v in item["cond"].items():
            c, m = (int(t) for t in cell.strip("()").split(","))
            entries.append(((c, m), v))
        pairs.append((name_from_obj(item["sub"]), Condition.of(entries)))
    return Name.of(pairs)


def hf(n: int) -> frozenset:
    """Von Neumann natural ``n`` as a hereditarily finite frozenset."""
    out: frozenset = frozenset()
    for _ in range(n):
        out = out | {out}
    return out


def check_name(a) -> Name:
    """Canonical name of a ground set; ints are read as von Neumann naturals."""
    if isinstance(a, int):
        a = hf(a)
    return Name.of((check_name(b), Condition()) for b in a)


def restrict(p: Condition, y: Name) -> Name:
    """``d_p . y``: keep pairs compatible with ``p`` and strengthen them by ``p``."""
    return Name.of((z, p.union(q)) for z, q in y.pairs if p.compatible(q))


def check_rank(x: Name, rank_cap: int | None):
    if rank_cap is not None and x.rank > rank_cap:
        raise RankError(f"name of rank {x.rank} exceeds the rank cap {rank_cap}")


# -- evaluation and the action ---------------------------------------------


def eval_name(x: Name, g: Assignment, _memo: dict | None = None) -> frozenset:
    memo = {} if _memo is None else _memo
    if x in memo:
        return memo[x]
    val = frozenset(eval_name(y, g, memo) for y, p in x.pairs if g.satisfies(p))
    memo[x] = val
    return val


def apply_perm_name(pi: Permutation, x: Name, _memo: dict | None = None) -> Name:
    memo = {} if _memo is None else _memo
    if x in memo:
        return memo[x]
    out = Name.of((apply_perm_name(pi, y, memo), act_on_condition(pi, p)) for y, p in x.pairs)
    memo[x] = out
    return out


def is_fixed_by(x: Name, gens: Iterable[Permutation]) -> bool:
    """Syntactic invariance: ``pi . x == x`` for every generator."""
    return all(apply_perm_name(g, x) == x for g in gens)


def semantically_fixed_by(x: Name, gens: Iterable[Permutation], trunc: Truncation,
                          cap: int = DEFAULT_CELL_CAP) -> bool:
    """``eval(pi . x, g) == eval(x, g)`` for every generator and assignment."""
    gens = list(gens)
    moved = [apply_perm_name(pi, x) for pi in gens]
    for g in all_assignments(trunc, cap):
        base = eval_name(x, g)
        if any(eval_name(y, g) != base for y in moved):
            return False
    return True


# -- evaluation support ----------------------------------------------------


def _value_table(x: Name, trunc: Truncation, coords: Sequence[int],
                 cap: int) -> dict[int, frozenset]:
    """Evaluation on every assignment over ``coords`` (others set to 0)."""
    b = trunc.bit_depth
    if len(coords) * b > cap:
        raise CapExceeded(f"{len(coords)} coordinates x {b} bits exceed the cap of {cap}")
    cells = [c * b + m for c in coords for m in range(b)]
    table = {}
    for choice in product((0, 1), repeat=len(cells)):
        bits = sum(1 << cell for cell, v in zip(cells, choice) if v)
        table[bits] = eval_name(x, Assignment(trunc, bits))
    return table


def _column_mask(trunc: Truncation, coords: Iterable[int]) -> int:
    b = trunc.bit_depth
    mask = 0
    for c in coords:
        mask |= ((1 << b) - 1) << (c * b)
    return mask


def _depends_only_on(table: dict[int, frozenset], mask: int) -> bool:
    seen: dict[int, frozenset] = {}
    for bits, val in table.items():
        k = bits & mask
        if seen.setdefault(k, val) != val:
            return False
    return True


def evaluation_support(x: Name, trunc: Truncation, cap: int = DEFAULT_CELL_CAP,
                       rank_cap: int | None = DEFAULT_RANK_CAP) -> frozenset[int]:
    """Least coordinate set F such that assignments agreeing on F evaluate ``x`` alike.

    Coordinates the name never mentions cannot matter, so the brute force runs
    over the mentioned coordinates only. The greedy result is cross-checked
    against the set of individually essential coordinates.
    """
    check_rank(x, rank_cap)
    coords = sorted(c for c in x.coords() if c < trunc.coord_count)
    if len(coords) != len(x.coords()):
        raise TruncationError("name mentions coordinates outside the truncation")
    table = _value_table(x, trunc, coords, cap)
    support = set(coords)
    for c in coords:
        trial = support - {c}
        if _depends_only_on(table, _column_mask(trunc, trial)):
            support = trial
    full = _column_mask(trunc, coords)
    essential = {c for c in coords
                 if not _depends_only_on(table, full & ~_column_mask(trunc, [c]))}
    if essential != support:
        raise SupportInternalError(f"support {sorted(support)} vs essential {sorted(essential)}")
    return frozenset(support)


# -- symmetrization --------------------------------------------------------


def _act_pair(pi: Permutation, pair: tuple[Name, Condition]) -> tuple[Name, Condition]:
    return apply_perm_name(pi, pair[0]), act_on_condition(pi, pair[1])


def symmetrize_by_generators(x: Name, gens: Sequence[Permutation],
                             hereditary: bool = False) -> Name:
    """Union of the orbits of the pairs of ``x`` under the group ``<gens>``."""
    gens = list(gens)
    pairs = []
    for y, p in x.pairs:
        if hereditary:
            y = symmetrize_by_generators(y, gens, True)
        pairs += orbit((y, p), gens, _act_pair)
    return Name.of(pairs)


def symmetrize(x: Name, h: FixSpec, bp: BlockPartition, n: int | None = None,
               hereditary: bool = False) -> Name:
    """The H-symmetrization: close the pairs of ``x`` under the subgroup of ``h``."""
    n = n if n is not None else max(bp.coords, default=-1) + 1
    h.validate(bp)
    return symmetrize_by_generators(x, h.generators(bp, n), hereditary)


def symmetrize_jointly(x: Name, specs: Sequence[tuple[FixSpec, BlockPartition]], n: int,
                       hereditary: bool = False) -> Name:
    """Close under the group generated by several base subgroups at once."""
    gens = []
    for h, bp in specs:
        h.validate(bp)
        gens += h.generators(bp, n)
    return symmetrize_by_generators(x, gens, hereditary)


def pair_orbit_sizes(x: Name, h: FixSpec, bp: BlockPartition, n: int) -> list[int]:
    gens = h.generators(bp, n)
    return [len(orbit(pair, gens, _act_pair)) for pair in x.pairs]


# -- tenacity --------------------------------------------------------------


def _relocations(coords: Sequence[int], n: int) -> Iterator[dict[int, int]]:
    """Injective maps of ``coords`` into ``0..n-1``, identity first."""
    yield {c: c for c in coords}
    for target in product(range(n), repeat=len(coords)):
        if len(set(target)) == len(target):
            yield dict(zip(coords, target))


def _relocate(p: Condition, rho: Mapping[int, int]) -> Condition:
    return Condition.of(((rho.get(c, c), m), v) for (c, m), v in p.entries)


def tenacious_relocation(p: Condition, k_gens: Sequence[Permutation],
                         trunc: Truncation) -> tuple[Condition, Condition, dict[int, int]]:
    """Find a translate ``s`` of ``p`` whose K-orbit has pairwise disjoint domains.

    Returns ``(q, s, rho)`` with ``s`` the image of ``p`` under the coordinate
    map ``rho`` and ``q`` the union of the K-translates of ``s``.
    """
    for g in k_gens:
        if g.n > trunc.coord_count:
            raise TruncationError(
                f"generator {g} acts on {g.n} coordinates but the truncation has "
                f"{trunc.coord_count}; {g.n - trunc.coord_count} more needed")
    if not p.fits(trunc):
        raise TruncationError(f"condition {p} does not fit the truncation")
    n = trunc.coord_count
    group = group_elements(list(k_gens), n) if k_gens else [Permutation.identity(n)]
    coords = sorted(p.coords)
    for rho in _relocations(coords, n):
        s = _relocate(p, rho)
        translates = {act_on_condition(pi, s) for pi in group}
        if all(t == s or not (t.domain & s.domain) for t in translates):
            q = Condition()
            for t in sorted(translates):
                q = q.union(t)
            return q, s, rho
    raise TruncationError(
        f"no translate of {p} has disjoint K-translates within {n} coordinates; "
        f"the K-orbit needs room for {len(group)} copies of {len(coords)} coordinates")


def tenacious_strengthen(p: Condition, k_gens: Sequence[Permutation],
                         trunc: Truncation) -> Condition:
    """A K-invariant condition extending a relocated copy of ``p``."""
    return tenacious_relocation(p, k_gens, trunc)[0]


# -- antichains and orbit mixing -------------------------------------------


@dataclass(frozen=True)
class Antichain:
    members: tuple[Condition, ...]
    trunc: Truncation

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(sorted(set(self.members))))

    def check(self, cap: int = DEFAULT_CELL_CAP):
        ms = self.members
        for i, a in enumerate(ms):
            for b in ms[i + 1:]:
                if a.compatible(b):
                    raise ValueError(f"antichain members {a} and {b} are compatible")
        cells = sorted({cell for p in ms for cell in p.domain})
        if len(cells) > cap:
            raise CapExceeded(f"{len(cells)} cells exceed the cap of {cap}")
        for choice in product((0, 1), repeat=len(cells)):
            total = dict(zip(cells, choice))
            hits = sum(all(total[c] == v for c, v in p.entries) for p in ms)
            if hits != 1:
                raise ValueError(f"antichain is not maximal: {hits} members under {total}")

    def member_under(self, g: Assignment) -> Condition:
        hits = [p for p in self.members if g.satisfies(p)]
        if len(hits) != 1:
            raise ValueError(f"{len(hits)} antichain members lie in the assignment")
        return hits[0]


def antichain_on(cells: Sequence[tuple[int, int]], trunc: Truncation) -> Antichain:
    """All total conditions on ``cells``: the simplest maximal antichain."""
    cells = sorted(set(cells))
    return Antichain(tuple(Condition.of(zip(cells, vals))
                           for vals in product((0, 1), repeat=len(cells))), trunc)


@dataclass
class MixResult:
    name: Name
    representatives: dict[Condition, Condition]
    transporters: dict[Condition, Permutation]


def mix_over_antichain_detailed(d: Antichain, seeds: Mapping[Condition, Name],
                                gamma_gens: Sequence[Permutation]) -> MixResult:
    n = d.trunc.coord_count
    gens = list(gamma_gens)
    members = set(d.members)
    for g in gens:
        for p in d.members:
            if act_on_condition(g, p) not in members:
                raise ValueError(f"{g} does not permute the antichain: moves {p} outside it")
    reps: dict[Condition, Condition] = {}
    transport: dict[Condition, Permutation] = {}
    out = []
    done: set[Condition] = set()
    for p0 in d.members:
        if p0 in done:
            continue
        # BFS over the orbit, remembering one transporter per member
        tree = {p0: Permutation.identity(n)}
        frontier = [p0]
        while frontier:
            nxt = []
            for p in frontier:
                for g in gens:
                    q = act_on_condition(g, p)
                    if q not in tree:
                        tree[q] = g.compose(tree[p])
                        nxt.append(q)
            frontier = nxt
        orbit_members = sorted(tree)
        seeded = [p for p in orbit_members if p in seeds]
        if not seeded:
            raise ValueError(f"no seed on the orbit of {p0}")
        r = seeded[0]
        to_r = tree[r].inverse()
        seed = restrict(r, seeds[r])
        # Schreier generators of Stab(p0), conjugated over to Stab(r)
        u = tree[r]
        stab = [u.compose(tree[act_on_condition(g, p)].inverse()).compose(g)
                .compose(tree[p]).compose(to_r)
                for p in orbit_members for g in gens]
        if not is_fixed_by(seed, stab):
            raise ValueError(f"seed at {r} is not invariant under the stabilizer of {r}")
        for p in orbit_members:
            pi_p = tree[p].compose(to_r)
            reps[p] = r
            transport[p] = pi_p
            out += restrict(p, apply_perm_name(pi_p, seeds[r])).pairs
            done.add(p)
    return MixResult(Name.of(out), reps, transport)


def mix_over_antichain(d: Antichain, seeds: Mapping[Condition, Name],
                       gamma_gens: Sequence[Permutation]) -> Name:
    """Orbit mixing: sum of ``d_p . (pi_p . x_r)`` over each Gamma-orbit of ``d``.

    ``pi_p`` carries the orbit representative ``r`` to ``p``. The seed at
    ``r`` must be fixed by the stabilizer of ``r`` (after restriction to
    ``r``), otherwise the sum would depend on the chosen transporters.
    """
    return mix_over_antichain_detailed(d, seeds, gamma_gens).name


# -- hereditary symmetry ---------------------------------------------------


def full_filter(bp: BlockPartition) -> list[FixSpec]:
    """Base of the filter of all subgroups: it contains the trivial group."""
    return [FixSpec.trivial(bp)]


def hs_membership(x: Name, filter_bases: Sequence[FixSpec], bp: BlockPartition,
                  n: int | None = None) -> bool:
    """Every hereditary sub-name is fixed by the subgroup of some listed base."""
    n = n if n is not None else max(bp.coords, default=-1) + 1
    gen_sets = [h.generators(bp, n) for h in filter_bases]
    return all(any(is_fixed_by(y, gens) for gens in gen_sets) for y in x.hereditary())


# -- signals and selectors -------------------------------------------------


@dataclass(frozen=True)
class SignalSpec:
    partition: BlockPartition
    block_pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.block_pairs) != len(self.partition.blocks):
            raise ValueError("one coordinate pair per block is required")
        for pair, block in zip(self.block_pairs, self.partition.blocks):
            if set(pair) != set(block):
                raise ValueError(f"pair {pair} does not align with block {block}")

    @classmethod
    def of(cls, bp: BlockPartition) -> "SignalSpec":
        return cls(bp, tuple(bp.blocks))

    def to_dict(self) -> dict:
        return {"label": self.partition.label, "pairs": [list(p) for p in self.block_pairs]}


def signal_invariance_check(sig: SignalSpec, gens: Iterable[Permutation]) -> bool:
    for g in gens:
        for pair in sig.block_pairs:
            if {g(c) for c in pair} != set(pair):
                return False
    return True


@dataclass(frozen=True)
class Witness:
    """A block swap under which ``f`` cannot tell the two candidates apart."""

    block: int
    permutation: Permutation
    assignment: Assignment
    route: str  # "support": block misses the support; "invariance": swap fixes f
    support: frozenset[int]

    def to_dict(self) -> dict:
        return {"block": self.block, "permutation": str(self.permutation),
                "assignment": self.assignment.table(), "route": self.route,
                "support": sorted(self.support)}


@dataclass(frozen=True)
class NoWitnessAtTruncation:
    support: frozenset[int]
    reason: str = "every block meets the evaluation support"

    def to_dict(self) -> dict:
        return {"support": sorted(self.support), "reason": self.reason}


def refute_selector(f: Name, sig: SignalSpec, trunc: Truncation,
                    cap: int = DEFAULT_CELL_CAP,
                    rank_cap: int | None = DEFAULT_RANK_CAP) -> Witness | NoWitnessAtTruncation:
    """Show that ``f`` cannot pick one candidate from some block pair.

    For a block ``{a, b}`` take ``g`` with the two candidate columns different
    and the swap ``pi = (a b)``. If ``f`` evaluates alike under ``g`` and under
    ``pi . g`` it returns the same set although the two candidates traded
    places, so it selects nothing consistently at that block.
    """
    support = evaluation_support(f, trunc, cap, rank_cap)
    n = trunc.coord_count
    for k, (a, b) in enumerate(sig.block_pairs):
        pi = Permutation.transposition(n, a, b)
        if not ({a, b} & support):
            route = "support"
        elif apply_perm_name(pi, f) == f:
            route = "invariance"
        else:
            continue
        g = Assignment.from_columns(trunc, {b: [1] * trunc.bit_depth})
        if g.column(a) == g.column(b) or eval_name(f, g) != eval_name(f, act_on_assignment(pi, g)):
            raise AssertionError(f"witness check failed at block {k}")
        return Witness(k, pi, g, route, support)
    return NoWitnessAtTruncation(support)


# -- deterministic candidate corpora ---------------------------------------


def _random_condition(rng: random.Random, coords: Sequence[int], trunc: Truncation,
                      max_entries: int) -> Condition:
    k = rng.randint(0, min(max_entries, len(coords)))
    cs = rng.sample(list(coords), k)
    return Condition.of(((c, rng.randrange(trunc.bit_depth)), rng.randint(0, 1)) for c in cs)


def random_name(rng: random.Random, coords: Sequence[int], trunc: Truncation,
                rank: int = 2, max_pairs: int = 2, max_entries: int = 2) -> Name:
    """A random name of rank at most ``rank`` whose conditions live on ``coords``."""
    if rank <= 0:
        return EMPTY
    pairs = []
    for _ in range(rng.randint(1, max_pairs)):
        sub = random_name(rng, coords, trunc, rng.randint(0, rank - 1), max_pairs, max_entries)
        pairs.append((sub, _random_condition(rng, coords, trunc, max_entries)))
    return Name.of(pairs)


def base_corpus(coords: Sequence[int], trunc: Truncation, count: int, seed: int = 0,
                rank: int = 2) -> list[Name]:
    """``count`` distinct random names of rank at most ``rank`` plus a few fixed ones."""
    rng = random.Random(seed)
    out: dict[Name, None] = {EMPTY: None, check_name(1): None, check_name(2): None}
    tries = 0
    while len(out) < count and tries < 50 * count:
        out.setdefault(random_name(rng, coords, trunc, rank), None)
        tries += 1
    return list(out)


def doubly_invariant_corpus(coords: Sequence[int], trunc: Truncation,
                            specs: Sequence[tuple[FixSpec, BlockPartition]],
                            count: int = 120, seed: int = 0, rank: int = 2) -> list[Name]:
    """Random names hereditarily closed under the joint group of ``specs``, deduplicated."""
    out: dict[Name, None] = {}
    batch = count
    attempt = 0
    while len(out) < count and attempt < 20:
        for x in base_corpus(coords, trunc, batch, seed + attempt, rank):
            out.setdefault(symmetrize_jointly(x, specs, trunc.coord_count, hereditary=True), None)
            if len(out) >= count:
                break
        attempt += 1
    return list(out)
