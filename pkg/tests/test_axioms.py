import pytest

from isocheck import figures
from isocheck.axioms import (
    VIS_SET,
    Visibility,
    all_axioms_hold,
    axiom_holds,
    is_saturable_config,
    vis_holds,
)
from isocheck.model import Execution, History, IsolationLevel, Select, TransactionLog, WrEdge
from isocheck.predicate import TRUE
from isocheck.relation import CommitRelation
from isocheck.saturation import base_order

T = TransactionLog.of


def order(h, *ids):
    return CommitRelation.total(h.index.ids, ["init", *ids])


def test_level_visibility_sets():
    assert VIS_SET[IsolationLevel.SI] == (Visibility.PREFIX, Visibility.CONFLICT)
    assert VIS_SET[IsolationLevel.PC] == (Visibility.PREFIX,)
    assert {len(v) for lvl, v in VIS_SET.items() if lvl is not IsolationLevel.SI} == {1}


class TestVisibility:
    def test_prefix_makes_t4_visible_to_t3(self):
        h = figures.fig4()
        assert vis_holds(h, base_order(h), Visibility.PREFIX, "t4", ("t3", 1), "x4")

    def test_ser_with_empty_relation(self):
        h = figures.fig4()
        empty = CommitRelation.empty(h.index.ids)
        for t in ("init", "t1", "t2", "t4"):
            assert not vis_holds(h, empty, Visibility.SER, t, ("t5", 1), "x3")

    def test_conflict_under_the_accepting_order(self):
        h = figures.fig5()
        co = order(h, "t1", "t4", "t5", "t2", "t3")
        assert not vis_holds(h, co, Visibility.CONFLICT, "t2", ("t5", 1), "x1")
        # placing t2 before t5 makes it visible through the shared key x1
        co2 = order(h, "t1", "t4", "t2", "t5", "t3")
        assert vis_holds(h, co2, Visibility.CONFLICT, "t2", ("t5", 1), "x1")

    def test_non_writer_is_never_visible(self):
        h = figures.fig4()
        assert not vis_holds(h, order(h, "t1", "t4", "t5", "t2", "t3"), Visibility.SER, "t4", ("t3", 1), "x1")

    def test_rc_sees_sources_of_earlier_reads(self):
        h = figures.fractured_read("RC")
        rel = CommitRelation.empty(h.index.ids)
        # t1 is not a source of the first read, so it is invisible there
        assert not vis_holds(h, rel, Visibility.RC, "t1", ("t2", 1), "y")
        assert vis_holds(h, rel, Visibility.RA, "t1", ("t2", 1), "y")


class TestAxiom:
    def test_fig3c_ser_is_violated(self):
        h = figures.fig3c("SER", "SER")
        ex = Execution(h, ("init", "t1", "t2"))
        assert not axiom_holds(ex, ("t2", 1))

    def test_fig3c_with_rc_reader_holds(self):
        h = figures.fig3c("SER", "RC")
        ex = Execution(h, ("init", "t1", "t2"))
        assert axiom_holds(ex, ("t1", 1)) and axiom_holds(ex, ("t2", 1))
        assert all_axioms_hold(ex)

    @pytest.mark.parametrize("iso", [lvl.value for lvl in IsolationLevel])
    def test_lone_reader_of_init(self, iso):
        t = T("t1", iso, [Select(TRUE)])
        h = History.make(["x"], {"x": 0}, [("s", [t])], [WrEdge("x", ("init", 1), ("t1", 1))])
        assert axiom_holds(Execution(h, ("init", "t1")), ("t1", 1))

    def test_execution_must_contain_so_and_wr(self):
        with pytest.raises(ValueError):
            Execution(figures.fig1(), ("init", "t1", "t2"))


class TestSaturableConfig:
    def test_all_rc(self):
        assert is_saturable_config(figures.fig1("RC", "RC"))

    def test_one_si(self):
        assert not is_saturable_config(figures.fig1("RC", "SI"))

    def test_init_only(self):
        assert is_saturable_config(History.make(["x"], {"x": 0}, []))
