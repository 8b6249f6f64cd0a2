from hypothesis import given
from hypothesis import strategies as st

from isocheck.relation import CommitRelation

IDS = ("a", "b", "c", "d", "e")


@st.composite
def relations(draw, n=5):
    succ = [draw(st.integers(0, (1 << n) - 1)) & ~(1 << i) for i in range(n)]
    return CommitRelation(IDS[:n], succ)


def test_total_order():
    r = CommitRelation.total(IDS[:3], ["c", "a", "b"])
    assert ("c", "a") in r and ("a", "b") in r and ("c", "b") in r
    assert ("a", "c") not in r
    assert r.is_total() and r.is_transitive() and r.is_acyclic()
    assert r.linearize() == ["c", "a", "b"]


def test_from_pairs_and_predecessors():
    r = CommitRelation.from_pairs(IDS[:3], [("a", "b"), ("b", "c")])
    assert r.predecessors("c") == ["b"]
    assert r.closure().predecessors("c") == ["a", "b"]
    assert len(r) == 2 and len(r.closure()) == 3


def test_cycle_is_reported_without_self_loops():
    r = CommitRelation.from_pairs(IDS[:3], [("a", "b"), ("b", "c"), ("c", "a")]).closure()
    cyc = r.find_cycle()
    assert cyc[0] == cyc[-1] and len(cyc) >= 3
    assert all((x, y) in r for x, y in zip(cyc, cyc[1:]))


def test_genuine_self_loop():
    assert CommitRelation.from_pairs(IDS[:2], [("a", "a")]).find_cycle() == ["a", "a"]


def test_acyclic_has_no_cycle():
    assert CommitRelation.from_pairs(IDS[:3], [("a", "b"), ("a", "c")]).find_cycle() is None


@given(relations())
def test_closure_is_transitive_and_minimal(r):
    c = r.closure()
    assert c.is_transitive()
    assert r.issubset(c)
    assert c.closure() == c
    # every closure pair is witnessed by a path
    for a, b in c.pairs():
        reach, frontier = set(), {a}
        while frontier:
            nxt = {y for x in frontier for y in r.successors(x)} - reach
            reach |= nxt
            frontier = nxt
        assert b in reach


@given(relations())
def test_cycle_witness_is_genuine(r):
    cyc = r.find_cycle()
    if cyc is None:
        assert r.closure().is_acyclic()
    else:
        assert cyc[0] == cyc[-1]
        assert all((x, y) in r for x, y in zip(cyc, cyc[1:]))


@given(relations(), relations())
def test_union(r, s):
    u = r.union(s)
    assert set(u.pairs()) == set(r.pairs()) | set(s.pairs())
