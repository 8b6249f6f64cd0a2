import pytest
from hypothesis import given

from isocheck import figures
from isocheck.axioms import all_axioms_hold
from isocheck.checker import InvalidHistory, Status
from isocheck.model import Execution, History, Insert, Select, TransactionLog, WrEdge, is_witness
from isocheck.oracle import (
    OracleBudget,
    OracleTooLarge,
    brute_force_check,
    enumerate_consistent_orders,
    estimate_work,
    full_witnesses,
    topological_orders,
    witness_candidates,
)
from isocheck.predicate import TRUE

from strategies import histories

T = TransactionLog.of
LEVELS = ("SER", "SI", "PC", "RA", "RC")
FIG4_ORDER = ("init", "t1", "t4", "t5", "t2", "t3")

# per-level verdicts, frozen from a full scan of the oracle
ANOMALY_MATRIX = {
    "write_skew": ("inconsistent", "consistent", "consistent", "consistent", "consistent"),
    "fractured_read": ("inconsistent", "inconsistent", "inconsistent", "inconsistent", "consistent"),
    "long_fork": ("inconsistent", "inconsistent", "inconsistent", "consistent", "consistent"),
    "lost_update": ("inconsistent", "inconsistent", "consistent", "consistent", "consistent"),
}


def so_chain(n):
    """n SER transactions in one session, each inserting x."""
    txns = [T(f"t{i}", "SER", [Insert({"x": i})]) for i in range(1, n + 1)]
    return History.make(["x"], {"x": 0}, [("s1", txns)], [])


def spread(n):
    """n independent writers, one per session."""
    return History.make(
        ["x"],
        {"x": 0},
        [(f"s{i}", [T(f"t{i}", "SER", [Insert({"x": i})])]) for i in range(1, n + 1)],
        [],
    )


# -- examples -----------------------------------------------------------------


def test_fig4_is_consistent_with_the_worked_order_among_accepted():
    v = brute_force_check(figures.fig4())
    assert v.status is Status.CONSISTENT
    assert v.commit_order == FIG4_ORDER
    assert FIG4_ORDER in set(enumerate_consistent_orders(v.witness))


def test_fig4_witness_is_h258_plus_the_fill():
    v = brute_force_check(figures.fig4())
    added = set(v.witness.wr) - set(figures.h258().wr)
    assert added == {WrEdge("x1", ("t2", 1), ("t3", 1))}


def test_fig3c_both_ser_is_inconsistent():
    v = brute_force_check(figures.fig3c())
    assert v.status is Status.INCONSISTENT
    assert v.violation["kind"] == "exhausted"


def test_init_only_is_consistent():
    v = brute_force_check(History.make(["x"], {"x": 0}, [], []))
    assert v.consistent
    assert v.commit_order == ("init",)


def test_fig3a_both_ser_is_consistent():
    assert brute_force_check(figures.fig3a()).consistent


@pytest.mark.parametrize("a", ["SER", "RC"])
@pytest.mark.parametrize("b", ["SER", "RC"])
def test_fig3a_every_level_pair_is_consistent(a, b):
    assert brute_force_check(figures.fig3a(a, b)).consistent


@pytest.mark.parametrize("name", sorted(ANOMALY_MATRIX))
def test_anomaly_matrix(name):
    build = getattr(figures, name)
    got = tuple(brute_force_check(build(lvl), first=False).status.value for lvl in LEVELS)
    assert got == ANOMALY_MATRIX[name]


# -- orders ---------------------------------------------------------------------------


def test_fig1_rc_has_exactly_one_order():
    assert list(enumerate_consistent_orders(figures.fig1("RC", "RC"))) == [("init", "t2", "t1")]


def test_fig3c_both_ser_has_no_order():
    assert list(enumerate_consistent_orders(figures.fig3c())) == []


def test_session_chain_has_one_order():
    assert list(enumerate_consistent_orders(so_chain(4))) == [("init", "t1", "t2", "t3", "t4")]


def test_enumerating_orders_needs_a_full_history():
    with pytest.raises(ValueError):
        list(enumerate_consistent_orders(figures.fig3a()))


def test_topological_orders_counts():
    assert len(list(topological_orders(4, [0, 0, 0, 0]))) == 24
    assert list(topological_orders(3, [0, 1, 2])) == [[0, 1, 2]]
    assert list(topological_orders(3, [0, 0, 2])) == [[0, 1, 2], [1, 0, 2], [1, 2, 0]]


def test_topological_orders_are_lexicographic():
    orders = list(topological_orders(4, [0, 1, 1, 0]))
    assert orders == sorted(orders)


# -- witnesses ------------------------------------------------------------------------


def test_fig4_witness_candidates():
    h = figures.fig4()
    ix = h.index
    table = {(ix.sites[si].event, x): {ix.ids[t] for t in c} for si, x, c in witness_candidates(h)}
    assert table == {
        (("t3", 1), "x1"): {"init", "t2", "t5"},
        (("t5", 1), "x2"): {"t1", "t3"},
    }
    assert estimate_work(h) == 60


def test_full_witnesses_cover_the_product():
    h = figures.fig4()
    ws = list(full_witnesses(h))
    assert len(ws) == 6
    # t5 reading x2 from t3 closes a cycle through wr(x3) t5 -> t3
    acyclic = list(full_witnesses(h, acyclic_only=True))
    assert len(acyclic) == 3
    assert all(is_witness(w, h) for w in acyclic)


def test_full_history_is_its_own_only_witness():
    h = figures.fig1()
    ws = list(full_witnesses(h))
    assert len(ws) == 1 and set(ws[0].wr) == set(h.wr)


def test_unsatisfiable_read_has_no_witness():
    # every writer of x satisfies TRUE, so the read must have had a source
    h = History.make(["x"], {"x": 0}, [("s1", [T("t1", "SER", [Select(TRUE)])])], [])
    assert list(full_witnesses(h)) == []
    assert brute_force_check(h).status is Status.INCONSISTENT


# -- budget ---------------------------------------------------------------------------


def test_twelve_transactions_are_too_large():
    with pytest.raises(OracleTooLarge):
        brute_force_check(so_chain(12))


def test_permutation_space_is_bounded():
    with pytest.raises(OracleTooLarge):
        brute_force_check(spread(7), OracleBudget(max_transactions=10, max_work=1000))


def test_orders_respect_transaction_budget():
    with pytest.raises(OracleTooLarge):
        list(enumerate_consistent_orders(so_chain(9)))


def test_invalid_history_is_rejected():
    bad = figures.fig1().with_edges([WrEdge("x1", ("t9", 1), ("t1", 1))])
    with pytest.raises(InvalidHistory):
        brute_force_check(bad)


# -- properties -----------------------------------------------------------------------


@given(histories(max_txns=5))
def test_first_accept_and_full_scan_agree(h):
    assert brute_force_check(h).status is brute_force_check(h, first=False).status


@given(histories(max_txns=5))
def test_order_first_search_matches_plain_enumeration(h):
    assert brute_force_check(h).status is brute_force_check(h, by_order=False).status


@given(histories())
def test_oracle_witness_revalidates(h):
    v = brute_force_check(h)
    if v.consistent:
        assert is_witness(v.witness, h)
        assert all_axioms_hold(Execution(v.witness, v.commit_order))
