"""Finite posets over opaque string ids and their interval algebra.

Orders are ingested as covering pairs ``(p, q)`` meaning ``p < q`` and
closed transitively at construction.  Subsets are handled internally as
integer bitmasks over the element order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InputError, ResourceError

DEFAULT_INTERVAL_CAP = 16


@dataclass(frozen=True)
class Poset:
    elements: tuple[str, ...]
    relation: frozenset[tuple[str, str]]
    _index: dict[str, int] = field(init=False, repr=False, compare=False, hash=False)
    _up: tuple[int, ...] = field(init=False, repr=False, compare=False, hash=False)
    _down: tuple[int, ...] = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        index = {e: i for i, e in enumerate(elements)}
        if len(index) != len(elements):
            raise InputError("duplicate element ids in poset")
        n = len(elements)
        up = [0] * n  # up[i]: mask of elements strictly above i
        down = [0] * n
        for p, q in self.relation:
            if p not in index or q not in index:
                raise InputError(f"relation ({p}, {q}) uses an unknown element id")
            if p == q:
                raise InputError(f"relation is not irreflexive at {p}")
            up[index[p]] |= 1 << index[q]
            down[index[q]] |= 1 << index[p]
        for p, q in self.relation:
            if (q, p) in self.relation:
                raise InputError(f"relation is not antisymmetric at ({p}, {q})")
        for i in range(n):
            for j in _bits(up[i]):
                if up[j] & ~up[i]:
                    raise InputError("relation is not transitively closed")
        object.__setattr__(self, "_index", index)
        object.__setattr__(self, "_up", tuple(up))
        object.__setattr__(self, "_down", tuple(down))

    @classmethod
    def from_covers(cls, elements: Sequence[str], covers: Iterable[tuple[str, str]]) -> "Poset":
        """Build a poset from generating pairs, closing them transitively."""
        elements = tuple(elements)
        index = {e: i for i, e in enumerate(elements)}
        if len(index) != len(elements):
            raise InputError("duplicate element ids in poset")
        n = len(elements)
        up = [0] * n
        for p, q in covers:
            if p not in index:
                raise InputError(f"order pair uses unknown element id {p!r}")
            if q not in index:
                raise InputError(f"order pair uses unknown element id {q!r}")
            up[index[p]] |= 1 << index[q]
        # Warshall closure on bitmask rows
        for k in range(n):
            bit = 1 << k
            for i in range(n):
                if up[i] & bit:
                    up[i] |= up[k]
        for i in range(n):
            if up[i] >> i & 1:
                raise InputError(f"order has a cycle through {elements[i]!r}")
        relation = frozenset(
            (elements[i], elements[j]) for i in range(n) for j in _bits(up[i])
        )
        return cls(elements, relation)

    @classmethod
    def antichain(cls, elements: Sequence[str]) -> "Poset":
        return cls(tuple(elements), frozenset())

    def __len__(self) -> int:
        return len(self.elements)

    def __contains__(self, item: object) -> bool:
        return item in self._index

    def index(self, element: str) -> int:
        try:
            return self._index[element]
        except KeyError:
            raise InputError(f"unknown element id {element!r}") from None

    def less(self, p: str, q: str) -> bool:
        return bool(self._up[self.index(p)] >> self.index(q) & 1)

    def mask(self, subset: Iterable[str]) -> int:
        m = 0
        for e in subset:
            m |= 1 << self.index(e)
        return m

    def members(self, mask: int) -> tuple[str, ...]:
        return tuple(self.elements[i] for i in _bits(mask))

    def up_mask(self, i: int) -> int:
        return self._up[i]

    def down_mask(self, i: int) -> int:
        return self._down[i]

    def is_convex_mask(self, mask: int) -> bool:
        # convex iff S equals (elements above some s) ∩ (elements below some s), with S itself
        above = mask
        below = mask
        for i in _bits(mask):
            above |= self._up[i]
            below |= self._down[i]
        return (above & below) == mask

    def covers(self) -> list[tuple[str, str]]:
        """Covering pairs in element order."""
        out = []
        for i, p in enumerate(self.elements):
            for j in _bits(self._up[i]):
                if not any(self._up[i] >> k & 1 and self._up[k] >> j & 1 for k in _bits(self._up[i])):
                    out.append((p, self.elements[j]))
        return out

    def restricted(self, subset: Iterable[str]) -> "Poset":
        keep = set(subset)
        for e in keep:
            self.index(e)
        elems = tuple(e for e in self.elements if e in keep)
        rel = frozenset((p, q) for p, q in self.relation if p in keep and q in keep)
        return Poset(elems, rel)


@dataclass(frozen=True)
class IntervalSet:
    parent: Poset
    members: frozenset[str]

    def __post_init__(self) -> None:
        members = frozenset(self.members)
        object.__setattr__(self, "members", members)
        if not self.parent.is_convex_mask(self.parent.mask(members)):
            raise InputError(f"subset {sorted(members)} is not an interval")

    def ordered(self) -> tuple[str, ...]:
        return tuple(e for e in self.parent.elements if e in self.members)

    def __len__(self) -> int:
        return len(self.members)


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def is_interval(poset: Poset, subset: Iterable[str]) -> bool:
    return poset.is_convex_mask(poset.mask(subset))


def is_attracting_interval(poset: Poset, subset: Iterable[str]) -> bool:
    mask = poset.mask(subset)
    if not poset.is_convex_mask(mask):
        raise InputError("is_attracting_interval needs an interval")
    return all(poset.down_mask(i) & ~mask == 0 for i in _bits(mask))


def is_adjacent_pair(poset: Poset, first: IntervalSet | Iterable[str], second: IntervalSet | Iterable[str]) -> bool:
    a = poset.mask(first.members if isinstance(first, IntervalSet) else first)
    b = poset.mask(second.members if isinstance(second, IntervalSet) else second)
    if a & b:
        raise InputError("adjacent-pair test needs disjoint intervals")
    if not (poset.is_convex_mask(a) and poset.is_convex_mask(b)):
        raise InputError("adjacent-pair test needs intervals")
    if not poset.is_convex_mask(a | b):
        return False
    # no p in first with p > q for some q in second
    return all(poset.down_mask(i) & b == 0 for i in _bits(a))


def intervals(poset: Poset, cap: int = DEFAULT_INTERVAL_CAP) -> list[IntervalSet]:
    """All order-convex subsets, ordered lexicographically by sorted element index."""
    n = len(poset)
    if n > cap:
        raise ResourceError(f"interval enumeration cap exceeded: {n} elements > cap {cap}")
    masks = [m for m in range(1 << n) if poset.is_convex_mask(m)]
    masks.sort(key=lambda m: tuple(_bits(m)))
    return [IntervalSet(poset, frozenset(poset.members(m))) for m in masks]


def product_order(p0: Poset, p1: Poset) -> Poset:
    """Disjoint union with every element of p0 placed below every element of p1."""
    clash = set(p0.elements) & set(p1.elements)
    if clash:
        raise InputError(f"id collision between slices: {sorted(clash)}")
    rel = set(p0.relation) | set(p1.relation)
    rel.update((a, b) for a in p0.elements for b in p1.elements)
    return Poset(p0.elements + p1.elements, frozenset(rel))
