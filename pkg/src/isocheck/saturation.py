"""Saturation of a partial commit order and the saturable-level fast path."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .axioms import VIS_SET, is_saturable_config, visible_mask
from .model import History, is_full, validate
from .relation import CommitRelation, transitive_closure


@dataclass(frozen=True)
class SaturationResult:
    pco: CommitRelation
    acyclic: bool
    cycle_witness: Optional[list[str]]
    passes: int


def base_order(h: History) -> CommitRelation:
    """(so | wr)+ lifted to transactions."""
    ix = h.index
    return CommitRelation.from_preds(ix.ids, ix.sowr_pred).closure()


def saturate(h: History, pco: CommitRelation) -> CommitRelation:
    """Add (t2, t1) whenever a visible writer t2 must precede the source t1.

    ``pco`` must be transitive.  Reads without a source for some key are
    skipped for that key, which is what a client history needs.
    """
    ix = h.index
    succ = list(pco.succ)
    for site in ix.sites:
        if not site.src:
            continue
        vis = 0
        for v in VIS_SET[ix.iso[site.txn]]:
            vis |= visible_mask(ix, pco, v, site, pco)
        vis &= ~(1 << site.txn)
        if not vis:
            continue
        for x, t1 in site.src.items():
            cand = ix.writes_mask[x] & vis & ~(1 << t1)
            bit = 1 << t1
            while cand:
                low = cand & -cand
                succ[low.bit_length() - 1] |= bit
                cand ^= low
    return CommitRelation(ix.ids, transitive_closure(succ))


def saturate_fixpoint(h: History, start: Optional[CommitRelation] = None) -> SaturationResult:
    """Iterate ``saturate`` from (so | wr)+ until nothing changes.

    Iteration stops early once a cycle shows up: the relation can only grow,
    so it stays cyclic.
    """
    cur = base_order(h) if start is None else start.closure()
    passes = 0
    while True:
        if not cur.is_acyclic():
            return SaturationResult(cur, False, cur.find_cycle(), passes)
        nxt = saturate(h, cur)
        passes += 1
        if len(nxt) == len(cur):
            return SaturationResult(cur, True, None, passes)
        cur = nxt


class UsageError(ValueError):
    pass


def check_saturable(h: History) -> bool:
    """Consistency of a full history whose levels are all RA or RC."""
    if not is_saturable_config(h):
        raise UsageError("check_saturable needs every transaction at RA or RC")
    base = base_order(h)
    if not base.is_acyclic():
        return False
    errors = validate(h)
    if errors:
        raise UsageError("; ".join(errors))
    if not is_full(h):
        raise UsageError("check_saturable needs a full history")
    return saturate(h, base).is_acyclic()
