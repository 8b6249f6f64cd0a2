import random

import pytest
from hypothesis import given

from isocheck import figures
from isocheck.checker import (
    Conflict,
    InvalidHistory,
    Prefix,
    PrefixSearch,
    Status,
    check_consistency,
    conflicts,
    enumerate_extensions,
    explore_consistent_prefixes,
    extension_blocker,
    extract_witness,
    is_consistent_extension,
    prefix_equivalent,
    prefix_of,
    zero_one_sets,
)
from isocheck.fuzz import random_history
from isocheck.model import (
    Execution,
    History,
    Insert,
    Select,
    TransactionLog,
    WrEdge,
    is_witness,
)
from isocheck.axioms import all_axioms_hold
from isocheck.predicate import Cmp
from isocheck.saturation import saturate_fixpoint

from strategies import histories

T = TransactionLog.of
FIG4_ORDER = ("init", "t1", "t4", "t5", "t2", "t3")


def fixpoint(h):
    return saturate_fixpoint(h).pco


def no_source_history():
    """t2's predicate is satisfied by every writer of x, yet it reads nothing."""
    return History.make(
        ["x"],
        {"x": 1},
        [("s1", [T("t1", "SER", [Insert({"x": 5})])]), ("s2", [T("t2", "SER", [Select(Cmp(">", 0))])])],
        [],
    )


# -- zero / one sets and conflicts --------------------------------------------


def test_fig4_zero_one_for_the_conflict():
    h = figures.fig4()
    zero, one = zero_one_sets(h, fixpoint(h), ("t5", 1), "x2")
    assert zero == {"t1"}
    assert one == {"init"}


def test_fig4_zero_one_for_the_other_unread_pair():
    h = figures.fig4()
    zero, one = zero_one_sets(h, fixpoint(h), ("t3", 1), "x1")
    assert zero == {"init", "t2", "t5"}
    assert one == frozenset()


def test_fig4_has_one_conflict():
    h = figures.fig4()
    assert conflicts(h, fixpoint(h)) == [Conflict(("t5", 1), "x2")]


def test_fig3a_conflict_sets():
    h = figures.fig3a()
    pco = fixpoint(h)
    assert conflicts(h, pco) == [Conflict(("t2", 1), "x2")]
    assert zero_one_sets(h, pco, ("t2", 1), "x2") == ({"init"}, {"t1"})
    assert zero_one_sets(h, pco, ("t1", 1), "x1") == ({"init", "t2"}, frozenset())


def test_full_history_has_no_conflicts():
    h = figures.fig1()
    assert conflicts(h, fixpoint(h)) == []


def test_zero_and_one_exclude_the_reader_and_are_disjoint():
    h = figures.fig4()
    pco = fixpoint(h)
    for r, x in [(("t5", 1), "x2"), (("t3", 1), "x1")]:
        zero, one = zero_one_sets(h, pco, r, x)
        assert not zero & one
        assert r[0] not in zero | one


# -- extensions ------------------------------------------------------------------


def test_fig4_single_extension_is_h258():
    h = figures.fig4()
    exts = list(enumerate_extensions(h))
    assert len(exts) == 1
    assert set(exts[0].wr) == set(figures.h258().wr)


def test_conflict_free_history_has_no_extensions():
    assert list(enumerate_extensions(figures.fig5())) == []


def test_extension_count_is_product_of_zero_sets():
    h = random_history(random.Random(396))
    pco = fixpoint(h)
    expected = 1
    for c in conflicts(h, pco):
        expected *= len(zero_one_sets(h, pco, c.read, c.key)[0])
    assert len(list(enumerate_extensions(h, pco))) == expected == 4


# -- consistent extensions (the prefix predicate) --------------------------------


def test_fig5_blocks_t2_after_t1_by_closure():
    h = figures.fig5()
    pco = fixpoint(h)
    P = prefix_of(h, ["init", "t1"])
    assert extension_blocker(h, pco, P, "t2") == "closure"
    assert not is_consistent_extension(h, pco, P, "t2")


def test_fig5_blocks_t2_after_t4_by_overwrite():
    h = figures.fig5()
    pco = fixpoint(h)
    P = prefix_of(h, ["init", "t1", "t4"])
    assert extension_blocker(h, pco, P, "t2") == "overwrite"


def test_fig5_accepted_steps():
    h = figures.fig5()
    pco = fixpoint(h)
    for k in range(1, len(FIG4_ORDER)):
        P = prefix_of(h, FIG4_ORDER[:k])
        assert is_consistent_extension(h, pco, P, FIG4_ORDER[k])


def test_init_is_always_a_consistent_extension_of_the_empty_prefix():
    h = figures.write_skew("SI")
    assert is_consistent_extension(h, fixpoint(h), Prefix(frozenset()), "init")


def test_literal_predicate_blocks_init_for_si_readers():
    # with nothing placed there is no last writer to compare against
    h = figures.write_skew("SI")
    pco = fixpoint(h)
    empty = Prefix(frozenset())
    assert extension_blocker(h, pco, empty, "init", mode="literal") == "overwrite"
    assert extension_blocker(h, pco, empty, "init") is None


def test_prefix_of_tracks_last_writers():
    h = figures.fig5()
    P = prefix_of(h, ["init", "t1", "t4"])
    assert P.txns == {"init", "t1", "t4"}
    assert P.writer("x2") == "t1"
    assert P.writer("x4") == "t4"
    assert P.writer("x1") == "init"


# -- prefix equivalence ------------------------------------------------------------


def test_prefix_equivalence_is_reflexive():
    h = figures.fig5()
    P = prefix_of(h, ["init", "t1"])
    assert prefix_equivalent(P, P, h)


def test_prefix_equivalence_ignores_writers_without_si():
    h = figures.fig5()
    P = Prefix(frozenset({"init", "t1"}), (("x2", "t1"),))
    Q = Prefix(frozenset({"init", "t1"}), (("x2", "init"),))
    assert prefix_equivalent(P, Q, h)


def test_prefix_equivalence_compares_writers_with_si():
    h = figures.write_skew("SI")
    P = Prefix(frozenset({"init", "t1"}), (("x", "t1"),))
    Q = Prefix(frozenset({"init", "t1"}), (("x", "init"),))
    assert not prefix_equivalent(P, Q, h)


def test_prefixes_with_different_members_differ():
    h = figures.fig5()
    assert not prefix_equivalent(prefix_of(h, ["init"]), prefix_of(h, ["init", "t1"]), h)


# -- exploration ----------------------------------------------------------------------


def test_explore_fig5_finds_the_order():
    assert tuple(explore_consistent_prefixes(figures.fig5())) == FIG4_ORDER


def test_explore_fig3c_both_ser_finds_nothing():
    assert explore_consistent_prefixes(figures.fig3c()) is None


def test_explore_init_only():
    h = History.make(["x"], {"x": 0}, [], [])
    assert explore_consistent_prefixes(h) == ["init"]


class ClosedPrefixSearch(PrefixSearch):
    """Asserts every prefix it reaches is downward closed under pco."""

    def extend(self, mask, last, t):
        nmask, nlast = super().extend(mask, last, t)
        for i in self.ix.bits(nmask):
            assert self.pco.pred[i] & ~nmask == 0
        return nmask, nlast


@given(histories())
def test_explored_prefixes_are_pco_closed(h):
    sat = saturate_fixpoint(h)
    if not sat.acyclic or conflicts(h, sat.pco):
        return
    ClosedPrefixSearch(h, sat.pco).run()


# -- witness extraction ----------------------------------------------------------------


def test_extract_witness_fills_fig4_unread_pair():
    full = extract_witness(figures.h258(), FIG4_ORDER)
    assert WrEdge("x1", ("t2", 1), ("t3", 1)) in full.wr
    assert is_witness(full, figures.fig4())


def test_extract_witness_of_full_history_is_identity():
    h = figures.fig1("RC", "RC")
    assert set(extract_witness(h, ["init", "t2", "t1"]).wr) == set(h.wr)


def test_extract_witness_reads_untouched_key_from_init():
    h = History.make(["x"], {"x": 3}, [("s1", [T("t1", "RC", [Select(Cmp("<", 0))])])], [])
    full = extract_witness(h, ["init", "t1"])
    assert full.wr == (WrEdge("x", ("init", 1), ("t1", 1)),)


# -- check_consistency -----------------------------------------------------------------


def test_fig4_is_consistent_with_the_worked_order():
    v = check_consistency(figures.fig4())
    assert v.status is Status.CONSISTENT
    assert v.commit_order == FIG4_ORDER
    assert set(v.wr_added) == {
        WrEdge("x1", ("t2", 1), ("t3", 1)),
        WrEdge("x2", ("t1", 1), ("t5", 1)),
    }
    assert v.conflicts == [Conflict(("t5", 1), "x2")]
    assert v.stats.extensions_tried == 1


def test_fig3a_both_ser_is_consistent():
    v = check_consistency(figures.fig3a())
    assert v.consistent
    assert v.commit_order == ("init", "t2", "t1")


def test_fig3c_both_ser_is_inconsistent():
    v = check_consistency(figures.fig3c())
    assert v.status is Status.INCONSISTENT
    assert v.violation == {"kind": "exhausted", "extensions": 1}


def test_saturation_cycle_is_reported():
    v = check_consistency(figures.fractured_read("RA"))
    assert v.status is Status.INCONSISTENT
    assert v.violation["kind"] == "cycle"
    cyc = v.violation["cycle"]
    assert cyc[0] == cyc[-1]


def test_empty_zero_set_is_inconsistent():
    v = check_consistency(no_source_history())
    assert v.status is Status.INCONSISTENT
    assert v.violation == {"kind": "empty_zero_set", "read": "t2:1", "key": "x"}
    assert v.stats.extensions_tried == 0


def test_init_only_history_is_consistent():
    v = check_consistency(History.make(["x"], {"x": 0}, [], []))
    assert v.consistent
    assert v.commit_order == ("init",)


def test_invalid_history_is_rejected():
    bad = figures.fig1().with_edges([WrEdge("x1", ("t9", 1), ("t1", 1))])
    with pytest.raises(InvalidHistory):
        check_consistency(bad)


def test_extension_budget_gives_unknown():
    h = random_history(random.Random(396))
    assert check_consistency(h).status is Status.INCONSISTENT
    capped = check_consistency(h, max_extensions=1)
    assert capped.status is Status.UNKNOWN
    assert capped.stats.extensions_tried == 1
    assert check_consistency(h, max_extensions=4).status is Status.INCONSISTENT


def test_budget_never_turns_a_success_into_unknown():
    assert check_consistency(figures.fig4(), max_extensions=1).consistent


def test_literal_mode_rejects_si_write_skew():
    # regression record of the word-for-word predicate; the oracle says consistent
    h = figures.write_skew("SI")
    assert check_consistency(h, mode="literal").status is Status.INCONSISTENT
    assert check_consistency(h).consistent


def test_verdicts_are_deterministic(corpus_entry):
    _, h = corpus_entry
    a, b = check_consistency(h), check_consistency(h)
    assert (a.status, a.commit_order, a.wr_added, a.violation) == (
        b.status,
        b.commit_order,
        b.wr_added,
        b.violation,
    )


def test_corpus_witnesses_revalidate(corpus_entry):
    _, h = corpus_entry
    v = check_consistency(h)
    if v.consistent:
        assert is_witness(v.witness, h)
        assert all_axioms_hold(Execution(v.witness, v.commit_order))


@given(histories())
def test_seen_store_does_not_change_verdicts(h):
    with_seen = check_consistency(h)
    without = check_consistency(h, use_seen=False)
    assert with_seen.status is without.status
    assert without.stats.prefixes_explored >= with_seen.stats.prefixes_explored

