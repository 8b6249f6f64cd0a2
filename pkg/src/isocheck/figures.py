"""Hand-built histories: the worked examples and a small anomaly catalog.

Each builder returns a fresh :class:`History`.  The JSON files under
``isocheck/data/corpus`` are generated from these (see ``write_corpus``).
"""

from __future__ import annotations

from pathlib import Path
from typing import Callable, Optional

from .model import History, Insert, Select, TransactionLog, Update, Delete, WrEdge
from .predicate import TRUE, Cmp, KeyEq

T = TransactionLog.of


def _fig1_txns(iso1: str, iso2: str):
    t1 = T("t1", iso1, [Update(Cmp(">=", 1), {"x1": -2, "x2": -2})])
    t2 = T("t2", iso2, [Delete(Cmp("<=", 0))])
    return [("s1", [t1]), ("s2", [t2])]


_INIT_W = ("init", 1)
_T1_UPD = ("t1", 1)
_T2_DEL = ("t2", 1)


def fig1(iso1: str = "SER", iso2: str = "SER") -> History:
    """UPDATE reads x1 from a DELETE, so it only rewrites x2."""
    return History.make(
        ["x1", "x2"],
        {"x1": 0, "x2": 1},
        _fig1_txns(iso1, iso2),
        [
            WrEdge("x1", _INIT_W, _T2_DEL),
            WrEdge("x2", _INIT_W, _T2_DEL),
            WrEdge("x1", _T2_DEL, _T1_UPD),
            WrEdge("x2", _INIT_W, _T1_UPD),
        ],
    )


def fig3a(iso1: str = "SER", iso2: str = "SER") -> History:
    """Client history: only the edges whose values satisfied the predicates."""
    return History.make(
        ["x1", "x2"],
        {"x1": 0, "x2": 1},
        _fig1_txns(iso1, iso2),
        [WrEdge("x1", _INIT_W, _T2_DEL), WrEdge("x2", _INIT_W, _T1_UPD)],
    )


def fig3b(iso1: str = "SER", iso2: str = "SER") -> History:
    """Not a witness of fig3a: t2 would observe -2 on x2, which is <= 0."""
    return fig3a(iso1, iso2).with_edges(
        [WrEdge("x2", _T1_UPD, _T2_DEL), WrEdge("x1", _INIT_W, _T1_UPD)]
    )


def fig3c(iso1: str = "SER", iso2: str = "SER") -> History:
    """A witness of fig3a where both transactions read everything from init."""
    return fig3a(iso1, iso2).with_edges(
        [WrEdge("x1", _INIT_W, _T1_UPD), WrEdge("x2", _INIT_W, _T2_DEL)]
    )


def _fig4_txns(x4_by_t2: int, default: str):
    t1 = T("t1", default, [Insert({"x2": -1, "x3": 1})])
    t2 = T("t2", default, [Insert({"x1": 2, "x4": x4_by_t2})])
    t3 = T("t3", "PC", [Select(Cmp("<", 0)), Insert({"x2": -3})])
    t4 = T("t4", default, [Insert({"x4": 4})])
    t5 = T("t5", "SER", [Select(Cmp(">=", 0)), Insert({"x1": 5, "x3": -5})])
    return [("s1", [t1, t2, t3]), ("s2", [t4, t5])]


_FIG4_KEYS = ["x1", "x2", "x3", "x4"]
_FIG4_INIT = {k: 0 for k in _FIG4_KEYS}


def fig4(default: str = "SER") -> History:
    """Two unread pairs: (t3 select, x1) and (t5 select, x2)."""
    return History.make(
        _FIG4_KEYS,
        _FIG4_INIT,
        _fig4_txns(-2, default),
        [
            WrEdge("x3", ("t1", 1), ("t5", 1)),
            WrEdge("x1", _INIT_W, ("t5", 1)),
            WrEdge("x4", ("t4", 1), ("t5", 1)),
            WrEdge("x2", ("t1", 1), ("t3", 1)),
            WrEdge("x3", ("t5", 2), ("t3", 1)),
            WrEdge("x4", ("t2", 1), ("t3", 1)),
        ],
    )


def fig5(default: str = "SER", x4_by_t2: int = 2) -> History:
    """The conflict-free extension of fig4 (t5 reads x2 from t1).

    Here t2 inserts x4:2 by default, while fig4 has it insert -2; pass
    ``x4_by_t2=-2`` to keep fig4's value.
    """
    base = History.make(
        _FIG4_KEYS,
        _FIG4_INIT,
        _fig4_txns(x4_by_t2, default),
        [
            WrEdge("x2", ("t1", 1), ("t5", 1)),
            WrEdge("x3", ("t1", 1), ("t5", 1)),
            WrEdge("x1", _INIT_W, ("t5", 1)),
            WrEdge("x4", ("t4", 1), ("t5", 1)),
            WrEdge("x2", ("t1", 1), ("t3", 1)),
            WrEdge("x3", ("t5", 2), ("t3", 1)),
            WrEdge("x4", ("t2", 1), ("t3", 1)),
        ],
    )
    return base


def h258() -> History:
    """fig4 with the single conflict resolved, values as in fig4."""
    return fig4().with_edges([WrEdge("x2", ("t1", 1), ("t5", 1))])


# -- anomaly catalog -------------------------------------------------------------


def write_skew(iso: str = "SER") -> History:
    """Both transactions read x and y from init, then write disjoint keys."""
    t1 = T("t1", iso, [Select(TRUE), Insert({"x": 0})])
    t2 = T("t2", iso, [Select(TRUE), Insert({"y": 0})])
    return History.make(
        ["x", "y"],
        {"x": 1, "y": 1},
        [("s1", [t1]), ("s2", [t2])],
        [
            WrEdge(k, _INIT_W, (t, 1))
            for t in ("t1", "t2")
            for k in ("x", "y")
        ],
    )


def fractured_read(iso: str = "SER") -> History:
    """t2 first reads y from init, then reads x from t1 which also wrote y."""
    t1 = T("t1", iso, [Insert({"x": 1, "y": 1})])
    t2 = T("t2", iso, [Select(KeyEq("y")), Select(KeyEq("x"))])
    return History.make(
        ["x", "y"],
        {"x": 0, "y": 0},
        [("s1", [t1]), ("s2", [t2])],
        [WrEdge("y", _INIT_W, ("t2", 1)), WrEdge("x", ("t1", 1), ("t2", 2))],
    )


def long_fork(iso: str = "SER") -> History:
    """Two readers observe two independent writes in opposite orders."""
    t1 = T("t1", iso, [Insert({"x": 1})])
    t2 = T("t2", iso, [Insert({"y": 1})])
    t3 = T("t3", iso, [Select(TRUE)])
    t4 = T("t4", iso, [Select(TRUE)])
    return History.make(
        ["x", "y"],
        {"x": 0, "y": 0},
        [("s1", [t1]), ("s2", [t2]), ("s3", [t3]), ("s4", [t4])],
        [
            WrEdge("x", ("t1", 1), ("t3", 1)),
            WrEdge("y", _INIT_W, ("t3", 1)),
            WrEdge("y", ("t2", 1), ("t4", 1)),
            WrEdge("x", _INIT_W, ("t4", 1)),
        ],
    )


def lost_update(iso: str = "SER") -> History:
    """Both transactions read x from init and then overwrite it."""
    t1 = T("t1", iso, [Select(TRUE), Insert({"x": 1})])
    t2 = T("t2", iso, [Select(TRUE), Insert({"x": 2})])
    return History.make(
        ["x"],
        {"x": 0},
        [("s1", [t1]), ("s2", [t2])],
        [WrEdge("x", _INIT_W, ("t1", 1)), WrEdge("x", _INIT_W, ("t2", 1))],
    )


ANOMALIES: dict[str, Callable[[str], History]] = {
    "write_skew": write_skew,
    "fractured_read": fractured_read,
    "long_fork": long_fork,
}

CORPUS: dict[str, Callable[[], History]] = {
    "fig1": fig1,
    "fig1_rc": lambda: fig1("RC", "RC"),
    "fig3a": fig3a,
    "fig3b": fig3b,
    "fig3c_ser": fig3c,
    "fig3c_rc": lambda: fig3c("SER", "RC"),
    "fig4": fig4,
    "fig5": fig5,
    "write_skew_si": lambda: write_skew("SI"),
    "write_skew_ser": lambda: write_skew("SER"),
    "fractured_read_ra": lambda: fractured_read("RA"),
    "fractured_read_rc": lambda: fractured_read("RC"),
    "long_fork_pc": lambda: long_fork("PC"),
    "long_fork_ra": lambda: long_fork("RA"),
}


def corpus_dir() -> Path:
    return Path(__file__).parent / "data" / "corpus"


def write_corpus(target: Optional[Path] = None) -> list[Path]:
    from .serialize import save_history

    target = target or corpus_dir()
    target.mkdir(parents=True, exist_ok=True)
    out = []
    for name, build in CORPUS.items():
        p = target / f"{name}.json"
        save_history(p, build())
        out.append(p)
    return out
