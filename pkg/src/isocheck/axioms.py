"""Visibility relations and the axiom shared by all five isolation levels.

Every level is given by a set of visibility relations.  A read ``r`` of key
``x`` that takes its value from ``t1`` satisfies the axiom when every other
writer ``t2`` of ``x`` that is visible to ``r`` commits before ``t1``.  The
visibility relations below take the commit relation as a parameter so the
same code serves total commit orders, partial saturated orders and the
block orders used during the commit-order search.
"""

from __future__ import annotations

from enum import Enum

from .model import EventId, Execution, History, Index, IsolationLevel, ReadSite
from .relation import CommitRelation


class Visibility(Enum):
    SER = "Serializability"
    PREFIX = "Prefix"
    CONFLICT = "Conflict"
    RA = "ReadAtomic"
    RC = "ReadCommitted"


VIS_SET: dict[IsolationLevel, tuple[Visibility, ...]] = {
    IsolationLevel.SER: (Visibility.SER,),
    IsolationLevel.SI: (Visibility.PREFIX, Visibility.CONFLICT),
    IsolationLevel.PC: (Visibility.PREFIX,),
    IsolationLevel.RA: (Visibility.RA,),
    IsolationLevel.RC: (Visibility.RC,),
}

SATURABLE = frozenset({IsolationLevel.RA, IsolationLevel.RC})


def vis_set(iso: IsolationLevel) -> tuple[Visibility, ...]:
    return VIS_SET[iso]


def _down(rel: CommitRelation, targets: int) -> int:
    """Transactions related to some target by the reflexive closure of rel.

    ``rel`` is assumed transitive here; callers holding a non-transitive
    relation pass its closure.
    """
    acc = targets
    pred = rel.pred
    m = targets
    while m:
        low = m & -m
        acc |= pred[low.bit_length() - 1]
        m ^= low
    return acc


def visible_mask(
    ix: Index,
    rel: CommitRelation,
    v: Visibility,
    site: ReadSite,
    star: CommitRelation | None = None,
) -> int:
    """Bitset of every t2 with v(rel)(t2, r, .) for the read at ``site``.

    None of the five relations depends on the key beyond ``writes(t2, x)``,
    which callers intersect with.  ``star`` is the transitive closure of
    ``rel`` (computed if omitted) and is only used for ``rel*``.
    """
    tr = site.txn
    if v is Visibility.RC:
        return ix.so_pred[tr] | site.rc_mask
    if v is Visibility.RA:
        return ix.sowr_pred[tr]
    if v is Visibility.SER:
        return rel.pred[tr]
    if star is None:
        star = rel.closure()
    if v is Visibility.PREFIX:
        return _down(star, ix.sowr_pred[tr])
    if v is Visibility.CONFLICT:
        t4 = ix.cw[tr] & rel.pred[tr]
        return _down(star, t4)
    raise ValueError(v)


def site_for(h: History, r: EventId) -> ReadSite:
    ix = h.index
    return ix.sites[ix.site_of[r]]


def vis_holds(
    h: History,
    rel: CommitRelation,
    v: Visibility,
    t2: str,
    r: EventId,
    x: str,
) -> bool:
    """Does ``v`` make writer ``t2`` of key ``x`` visible to read ``r``?"""
    ix = h.index
    site = site_for(h, r)
    i = ix.pos[t2]
    if i == site.txn or not ix.writes(i, x):
        return False
    return bool(visible_mask(ix, rel, v, site) >> i & 1)


def site_violations(
    ix: Index, rel: CommitRelation, site: ReadSite, star: CommitRelation | None = None
) -> list[tuple[str, int, int]]:
    """(key, t2, t1) triples where a visible t2 is not ordered before t1."""
    out = []
    vis = 0
    for v in VIS_SET[ix.iso[site.txn]]:
        vis |= visible_mask(ix, rel, v, site, star)
    vis &= ~(1 << site.txn)
    for x, t1 in site.src.items():
        cand = ix.writes_mask[x] & vis & ~(1 << t1)
        while cand:
            low = cand & -cand
            t2 = low.bit_length() - 1
            cand ^= low
            if not rel.has(t2, t1):
                out.append((x, t2, t1))
    return out


def axiom_holds(ex: Execution, r: EventId) -> bool:
    """The isolation axiom of the read's transaction under commit order co."""
    h = ex.history
    ix = h.index
    co = CommitRelation.total(ix.ids, ex.co)
    return not site_violations(ix, co, site_for(h, r), co)


def all_axioms_hold(ex: Execution) -> bool:
    h = ex.history
    ix = h.index
    co = CommitRelation.total(ix.ids, ex.co)
    return all(not site_violations(ix, co, s, co) for s in ix.sites)


def is_saturable_config(h: History) -> bool:
    return all(t.iso in SATURABLE for t in h.user_transactions)
