from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conley_transit.errors import InputError, ResourceError
from conley_transit.posets import (
    IntervalSet,
    Poset,
    intervals,
    is_adjacent_pair,
    is_attracting_interval,
    is_interval,
    product_order,
)
from oracles import convex_subsets, transitive_closure

# frozen from oracles.transitive_closure on the two slice orders (3 + 10 + 15)
EIGHTSET_PRODUCT_RELATIONS = 28
# frozen from oracles.convex_subsets on the 3-chain
CHAIN3_INTERVALS = 7


def chain(*names: str) -> Poset:
    return Poset.from_covers(names, zip(names, names[1:]))


@st.composite
def posets(draw, max_size: int = 6):
    n = draw(st.integers(1, max_size))
    names = [f"e{k}" for k in range(n)]
    pairs = [(names[i], names[j]) for i in range(n) for j in range(i + 1, n)]
    covers = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return Poset.from_covers(names, covers)


def test_from_covers_closes_transitively():
    p = chain("1", "2", "3")
    assert p.relation == frozenset({("1", "2"), ("2", "3"), ("1", "3")})


def test_cycle_rejected():
    with pytest.raises(InputError):
        Poset.from_covers(["a", "b"], [("a", "b"), ("b", "a")])


def test_irreflexive_and_unknown_ids_rejected():
    with pytest.raises(InputError):
        Poset(("a",), frozenset({("a", "a")}))
    with pytest.raises(InputError):
        Poset.from_covers(["a"], [("a", "z")])


def test_interval_examples():
    p = chain("1", "2", "3")
    assert not is_interval(p, {"1", "3"})
    assert is_interval(p, {"2", "3"})
    p0 = chain("1@0", "2@0", "5@0")
    assert is_interval(p0, {"1@0", "2@0"})


def test_interval_unknown_id():
    with pytest.raises(InputError):
        is_interval(chain("1", "2"), {"9"})


def test_attracting_interval_examples():
    p = chain("1", "2", "3")
    assert is_attracting_interval(p, {"1"})
    assert not is_attracting_interval(p, {"2"})
    assert is_attracting_interval(Poset.antichain(["a", "b"]), {"a"})
    with pytest.raises(InputError):
        is_attracting_interval(p, {"1", "3"})


def test_adjacent_pair_examples():
    p = chain("1", "2", "3")
    assert is_adjacent_pair(p, {"1"}, {"2"})
    assert not is_adjacent_pair(p, {"2"}, {"1"})
    assert not is_adjacent_pair(p, {"1"}, {"3"})
    with pytest.raises(InputError):
        is_adjacent_pair(p, {"1", "2"}, {"2"})


def test_intervals_examples():
    two = intervals(chain("1", "2"))
    assert [i.ordered() for i in two] == [(), ("1",), ("1", "2"), ("2",)]
    assert len(intervals(Poset.antichain(["a", "b"]))) == 4
    three = intervals(chain("1", "2", "3"))
    assert len(three) == CHAIN3_INTERVALS
    assert frozenset({"1", "3"}) not in {i.members for i in three}


def test_frozen_chain_count_matches_oracle():
    names = ["1", "2", "3"]
    assert len(convex_subsets(names, transitive_closure(names, [("1", "2"), ("2", "3")]))) == CHAIN3_INTERVALS


def test_intervals_cap_names_limit():
    p = Poset.antichain([f"x{k}" for k in range(17)])
    with pytest.raises(ResourceError, match="16"):
        intervals(p)
    assert len(intervals(Poset.antichain(["a", "b", "c"]), cap=3)) == 8


def test_interval_set_validates_convexity():
    with pytest.raises(InputError):
        IntervalSet(chain("1", "2", "3"), frozenset({"1", "3"}))


def test_product_order_examples():
    p0 = Poset.antichain(["1@0"])
    p1 = chain("1@1", "2@1", "3@1")
    prod = product_order(p0, p1)
    assert len(prod) == 4
    assert all(prod.less("1@0", q) for q in p1.elements)
    assert len(product_order(Poset.antichain(["a"]), Poset.antichain(["b"])).relation) == 1
    with pytest.raises(InputError):
        product_order(Poset.antichain(["a"]), Poset.antichain(["a"]))


def test_eightset_product_relation_count(eightset):
    prod = product_order(eightset.slice0.order, eightset.slice1.order)
    assert len(prod.relation) == EIGHTSET_PRODUCT_RELATIONS
    s0, s1 = eightset.slice0, eightset.slice1
    covers = s0.order.covers() + s1.order.covers() + [(a, b) for a in s0.elements for b in s1.elements]
    oracle = transitive_closure(prod.elements, covers)
    assert len(oracle) == EIGHTSET_PRODUCT_RELATIONS


@settings(max_examples=60, deadline=None)
@given(posets())
def test_intervals_match_brute_force(p):
    oracle = set(convex_subsets(p.elements, set(p.relation)))
    got = [i.members for i in intervals(p)]
    assert len(got) == len(set(got))
    assert set(got) == oracle
    assert all(is_interval(p, s) for s in got)


@settings(max_examples=60, deadline=None)
@given(posets(), posets())
def test_product_restricts_to_factors(p, q):
    q = Poset.from_covers([e + "'" for e in q.elements], [(a + "'", b + "'") for a, b in q.covers()])
    prod = product_order(p, q)
    assert {r for r in prod.relation if r[0] in p.elements and r[1] in p.elements} == set(p.relation)
    assert {r for r in prod.relation if r[0] in q.elements and r[1] in q.elements} == set(q.relation)


@settings(max_examples=60, deadline=None)
@given(posets(), st.data())
def test_adjacent_implies_union_interval(p, data):
    ivs = intervals(p)
    a = data.draw(st.sampled_from(ivs))
    rest = [i for i in ivs if not (i.members & a.members)]
    b = data.draw(st.sampled_from(rest))
    if is_adjacent_pair(p, a, b):
        assert is_interval(p, a.members | b.members)
