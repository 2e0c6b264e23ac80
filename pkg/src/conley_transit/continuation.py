"""Continuable interval pairs and the finest decomposition.

Continuability is declarative: the oracle holds the user's declared pairs
plus the trivial pair, closed under pairwise intersection and under
complement inside a containing member.  Pairs are handled internally as
bitmask pairs over the slice element orders.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .conley import MorseModel
from .errors import InputError, ResourceError
from .report import VerificationReport

Pair = tuple[frozenset[str], frozenset[str]]
MaskPair = tuple[int, int]

DEFAULT_MAX_MEMBERS = 1 << 14


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _lex_key(mask: int) -> tuple[int, ...]:
    return tuple(_bits(mask))


@dataclass(frozen=True)
class Decomposition:
    order0: tuple[str, ...]
    order1: tuple[str, ...]
    pairs: tuple[Pair, ...]

    @classmethod
    def of(cls, model: MorseModel, pairs: Iterable[tuple[Iterable[str], Iterable[str]]]) -> "Decomposition":
        o0, o1 = model.slice0.elements, model.slice1.elements
        clean = []
        for a, b in pairs:
            a, b = frozenset(a), frozenset(b)
            for e in a:
                if e not in o0:
                    raise InputError(f"decomposition names unknown slice-0 id {e!r}")
            for e in b:
                if e not in o1:
                    raise InputError(f"decomposition names unknown slice-1 id {e!r}")
            clean.append((a, b))
        return cls(tuple(o0), tuple(o1), tuple(clean)).canonical()

    def canonical(self) -> "Decomposition":
        """Sort by minimal element of J (slice-0 order), pairs with empty J last."""
        i0 = {e: i for i, e in enumerate(self.order0)}
        i1 = {e: i for i, e in enumerate(self.order1)}
        big = len(self.order0) + len(self.order1) + 1

        def key(p: Pair):
            j = sorted(i0[e] for e in p[0])
            k = sorted(i1[e] for e in p[1])
            return (0 if j else 1, j[0] if j else big, k[0] if k else big, j, k)

        return Decomposition(self.order0, self.order1, tuple(sorted(self.pairs, key=key)))

    def __len__(self) -> int:
        return len(self.pairs)

    def as_lists(self) -> list[list[list[str]]]:
        return [
            [[e for e in self.order0 if e in a], [e for e in self.order1 if e in b]]
            for a, b in self.pairs
        ]

    def pair_set(self) -> frozenset[Pair]:
        return frozenset(self.pairs)


class ContinuabilityOracle:
    """Declared pairs + trivial pair, closed under intersection and complement."""

    def __init__(self, model: MorseModel, extra: Iterable[Pair] = (), max_members: int = DEFAULT_MAX_MEMBERS):
        self.model = model
        self.p0 = model.slice0.order
        self.p1 = model.slice1.order
        full = ((1 << len(self.p0)) - 1, (1 << len(self.p1)) - 1)
        seeds = {full}
        for a, b in list(model.continuable_pairs) + list(extra):
            seeds.add(self._to_mask((a, b)))
        self.members: frozenset[MaskPair] = frozenset(self._close(seeds, max_members))
        self.full = full

    def _to_mask(self, pair: tuple[Iterable[str], Iterable[str]]) -> MaskPair:
        a, b = pair
        return self.p0.mask(a), self.p1.mask(b)

    def to_pair(self, m: MaskPair) -> Pair:
        return frozenset(self.p0.members(m[0])), frozenset(self.p1.members(m[1]))

    def _is_interval_pair(self, m: MaskPair) -> bool:
        return self.p0.is_convex_mask(m[0]) and self.p1.is_convex_mask(m[1])

    def _close(self, seeds: set[MaskPair], cap: int) -> set[MaskPair]:
        members = set(seeds)
        frontier = list(sorted(seeds))
        while frontier:
            fresh = []
            snapshot = sorted(members)
            for a in frontier:
                for b in snapshot:
                    cands = [(a[0] & b[0], a[1] & b[1])]
                    for big, small in ((a, b), (b, a)):
                        if small != big and small[0] & ~big[0] == 0 and small[1] & ~big[1] == 0:
                            comp = (big[0] & ~small[0], big[1] & ~small[1])
                            # complement only when it is again an interval pair
                            if self._is_interval_pair(comp):
                                cands.append(comp)
                    for c in cands:
                        if (c[0] or c[1]) and c not in members:
                            members.add(c)
                            fresh.append(c)
                            if len(members) > cap:
                                raise ResourceError(f"oracle closure exceeded {cap} members")
            frontier = fresh
        return members

    def contains(self, pair: tuple[Iterable[str], Iterable[str]]) -> bool:
        return self._to_mask(pair) in self.members

    def sorted_members(self) -> list[MaskPair]:
        return sorted(self.members, key=lambda m: (_lex_key(m[0]), _lex_key(m[1])))

    def pairs(self) -> list[Pair]:
        return [self.to_pair(m) for m in self.sorted_members()]


def _oracle(model: MorseModel, oracle: ContinuabilityOracle | None) -> ContinuabilityOracle:
    return oracle if oracle is not None else ContinuabilityOracle(model)


def validate_decomposition(
    model: MorseModel, d: Decomposition, oracle: ContinuabilityOracle | None = None
) -> VerificationReport:
    p0, p1 = model.slice0.order, model.slice1.order
    for a, b in d.pairs:
        p0.mask(a)
        p1.mask(b)
    orc = _oracle(model, oracle)
    rep = VerificationReport("decomposition")
    lists = d.as_lists()
    rep.add("intervals", [
        tuple(map(tuple, lists[k]))
        for k, (a, b) in enumerate(d.pairs)
        if not (p0.is_convex_mask(p0.mask(a)) and p1.is_convex_mask(p1.mask(b)))
    ])
    rep.add("nonempty", [k for k, (a, b) in enumerate(d.pairs) if not a and not b])
    overlap = []
    seen0: dict[str, int] = {}
    seen1: dict[str, int] = {}
    for k, (a, b) in enumerate(d.pairs):
        for e in sorted(a):
            if e in seen0:
                overlap.append(e)
            seen0[e] = k
        for e in sorted(b):
            if e in seen1:
                overlap.append(e)
            seen1[e] = k
    rep.add("disjoint", overlap)
    missing = [e for e in p0.elements if e not in seen0] + [e for e in p1.elements if e not in seen1]
    rep.add("coverage", missing)
    rep.add("continuable", [tuple(map(tuple, lists[k])) for k, pr in enumerate(d.pairs) if not orc.contains(pr)])
    return rep


def reduced_intersection(d1: Decomposition, d2: Decomposition) -> Decomposition:
    if (d1.order0, d1.order1) != (d2.order0, d2.order1):
        raise InputError("reduced_intersection needs decompositions over the same model")
    out = []
    for a, b in d1.pairs:
        for c, e in d2.pairs:
            x, y = a & c, b & e
            if x or y:
                out.append((x, y))
    return Decomposition(d1.order0, d1.order1, tuple(out)).canonical()


def finest_decomposition(model: MorseModel, oracle: ContinuabilityOracle | None = None) -> Decomposition:
    """Split pairs along oracle members whose complement is also a member, to a fixpoint."""
    orc = _oracle(model, oracle)
    members = orc.sorted_members()
    current = [orc.full]
    changed = True
    while changed:
        changed = False
        for m in members:
            for idx, u in enumerate(current):
                if m == u or m[0] & ~u[0] or m[1] & ~u[1]:
                    continue
                comp = (u[0] & ~m[0], u[1] & ~m[1])
                if comp in orc.members:
                    current[idx:idx + 1] = [m, comp]
                    changed = True
                    break
            if changed:
                break
    pairs = [orc.to_pair(m) for m in current]
    return Decomposition.of(model, pairs)


def is_indecomposable(
    model: MorseModel, pair: tuple[Iterable[str], Iterable[str]], oracle: ContinuabilityOracle | None = None
) -> bool:
    """No oracle member strictly inside on each nonempty side (an empty side stays empty)."""
    orc = _oracle(model, oracle)
    j = orc._to_mask(pair)
    if j not in orc.members:
        raise InputError("is_indecomposable needs a continuable pair")

    def strict_inside(k: int, big: int) -> bool:
        if big == 0:
            return k == 0
        return k & ~big == 0 and k != big

    return not any(strict_inside(k[0], j[0]) and strict_inside(k[1], j[1]) for k in orc.members)


def trivial_decomposition(model: MorseModel) -> Decomposition:
    return Decomposition.of(model, [model.trivial_pair])


def shuffled_model(model: MorseModel, order: Sequence[int]) -> MorseModel:
    """Same model with the declared pairs permuted (used for invariance checks)."""
    from dataclasses import replace

    pairs = tuple(model.continuable_pairs[i] for i in order)
    return replace(model, continuable_pairs=pairs)
