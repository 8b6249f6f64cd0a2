"""Brute-force reference checker.

Enumerates every full witness of a history and every commit order that
respects session order and write-read dependencies, accepting a pair when
saturating the order adds nothing to it.  This module exists to be
obviously correct, not fast.

The default search goes order first.  Under a fixed total order, whether a
read satisfies its axiom depends only on the order and on the wr edges into
its own transaction, so the missing edges of each transaction can be chosen
independently; the combined witness is then confirmed by saturation.  The
plain product over witnesses and orders stays available as
``by_order=False`` and the two are compared in the tests.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

from .axioms import site_violations
from .checker import InvalidHistory, Stats, Status, Verdict
from .model import History, Index, WrEdge, is_full, txn_graph_acyclic, validate
from .relation import CommitRelation
from .saturation import saturate


@dataclass(frozen=True)
class OracleBudget:
    max_transactions: int = 8
    max_missing_pairs: int = 16
    max_work: int = 2_000_000


DEFAULT_BUDGET = OracleBudget()


class OracleTooLarge(RuntimeError):
    pass


def witness_candidates(h: History) -> list[tuple[int, str, list[int]]]:
    """For each unread non-local pair, the writers whose value falsifies it."""
    ix = h.index
    out = []
    for si, x in ix.unread_pairs():
        site = ix.sites[si]
        cand = [
            t
            for t in ix.bits(ix.writes_mask[x])
            if t != site.txn and not site.where(x, ix.txn_value[(t, x)])
        ]
        out.append((si, x, cand))
    return out


def _linear_extension_bound(ix: Index) -> int:
    sizes = [len(s) for s in ix.sessions]
    total = math.factorial(sum(sizes))
    for s in sizes:
        total //= math.factorial(s)
    return total


def estimate_work(h: History) -> int:
    ix = h.index
    witnesses = 1
    for _, _, cand in witness_candidates(h):
        witnesses *= max(1, len(cand))
    return witnesses * _linear_extension_bound(ix)


def _check_budget(h: History, budget: OracleBudget) -> list[tuple[int, str, list[int]]]:
    ix = h.index
    if ix.n > budget.max_transactions:
        raise OracleTooLarge(f"{ix.n} transactions exceed the oracle budget")
    table = witness_candidates(h)
    if len(table) > budget.max_missing_pairs:
        raise OracleTooLarge(f"{len(table)} unread pairs exceed the oracle budget")
    work = 1
    for _, _, cand in table:
        work *= max(1, len(cand))
    work *= _linear_extension_bound(ix)
    if work > budget.max_work:
        raise OracleTooLarge(f"about {work} witness/order pairs exceed the oracle budget")
    return table


def full_witnesses(h: History, table=None, *, acyclic_only: bool = False) -> Iterator[History]:
    """Every full extension of ``h`` allowed by the witness condition.

    With ``acyclic_only`` extensions whose so ∪ wr has a cycle are skipped
    before any history object is built.
    """
    ix = h.index
    if table is None:
        table = witness_candidates(h)
    for pick in itertools.product(*(cand for _, _, cand in table)):
        if acyclic_only:
            preds = list(ix.sowr_pred)
            for (si, _, _), t in zip(table, pick):
                r = ix.sites[si].txn
                if r != t:
                    preds[r] |= 1 << t
            if not txn_graph_acyclic(ix.n, preds):
                continue
        edges = [
            WrEdge(x, ix.writer_event[(t, x)], ix.sites[si].event)
            for (si, x, _), t in zip(table, pick)
        ]
        yield h.with_falsified_edges(edges)


def topological_orders(n: int, preds: Sequence[int]) -> Iterator[list[int]]:
    """All linear extensions of a DAG given by predecessor bitsets, in
    lexicographic order of node indices."""
    order: list[int] = []
    full = (1 << n) - 1

    def rec(placed: int) -> Iterator[list[int]]:
        if placed == full:
            yield list(order)
            return
        for i in range(n):
            if not placed >> i & 1 and preds[i] & ~placed == 0:
                order.append(i)
                yield from rec(placed | 1 << i)
                order.pop()

    yield from rec(0)


def axioms_hold(h: History, co: CommitRelation) -> bool:
    """Every read satisfies its isolation axiom under the total order ``co``."""
    ix = h.index
    return all(not site_violations(ix, co, s, co) for s in ix.sites)


def accepts_by_saturation(h: History, co: CommitRelation) -> bool:
    """Saturating the total order ``co`` adds nothing and stays acyclic."""
    sat = saturate(h, co)
    return sat == co and sat.is_acyclic()


def accepts(h: History, co: CommitRelation) -> bool:
    """Acceptance by saturation.  The per-read axiom test is equivalent on
    total orders and stops at the first violation, so it screens first."""
    return axioms_hold(h, co) and accepts_by_saturation(h, co)


def enumerate_consistent_orders(
    h: History, budget: OracleBudget = DEFAULT_BUDGET
) -> Iterator[tuple[str, ...]]:
    """Commit orders of the full history ``h`` under which all axioms hold."""
    if not is_full(h):
        raise ValueError("enumerate_consistent_orders needs a full history")
    ix = h.index
    if ix.n > budget.max_transactions:
        raise OracleTooLarge(f"{ix.n} transactions exceed the oracle budget")
    if not txn_graph_acyclic(ix.n, ix.sowr_pred):
        return
    for order in topological_orders(ix.n, ix.sowr_pred):
        ids = tuple(ix.ids[i] for i in order)
        if accepts(h, CommitRelation.total(ix.ids, ids)):
            yield ids


def _found(h: History, full: History, ids: tuple[str, ...], stats: Stats) -> Verdict:
    added = tuple(sorted(set(full.wr) - set(h.wr), key=lambda e: (e.read, e.key)))
    return Verdict(Status.CONSISTENT, witness=full, commit_order=ids, wr_added=added, stats=stats)


def _search_by_witness(h: History, table, stats: Stats, first: bool) -> Optional[Verdict]:
    found: Optional[Verdict] = None
    for full in full_witnesses(h, table, acyclic_only=True):
        stats.extensions_tried += 1
        fx = full.index
        for order in topological_orders(fx.n, fx.sowr_pred):
            stats.prefixes_explored += 1
            ids = tuple(fx.ids[i] for i in order)
            if accepts(full, CommitRelation.total(fx.ids, ids)):
                if found is None:
                    found = _found(h, full, ids, stats)
                if first:
                    return found
                break
    return found


def _search_by_order(h: History, table, stats: Stats, first: bool) -> Optional[Verdict]:
    ix = h.index
    pending: dict[int, list[tuple[int, str, list[int]]]] = {}
    for entry in table:
        pending.setdefault(ix.sites[entry[0]].txn, []).append(entry)
    settled = [s for s in ix.sites if s.txn not in pending]
    found: Optional[Verdict] = None
    for order in topological_orders(ix.n, ix.sowr_pred):
        stats.prefixes_explored += 1
        ids = tuple(ix.ids[i] for i in order)
        co = CommitRelation.total(ix.ids, ids)
        if any(site_violations(ix, co, s, co) for s in settled):
            continue
        rank = {t: k for k, t in enumerate(order)}
        chosen: list[WrEdge] = []
        for txn, entries in pending.items():
            options = [[t for t in cand if rank[t] < rank[txn]] for _, _, cand in entries]
            for pick in itertools.product(*options):
                stats.extensions_tried += 1
                edges = [
                    WrEdge(x, ix.writer_event[(t, x)], ix.sites[si].event)
                    for (si, x, _), t in zip(entries, pick)
                ]
                px = h.with_falsified_edges(edges).index
                if not any(site_violations(px, co, s, co) for s in px.sites if s.txn == txn):
                    chosen += edges
                    break
            else:
                break
        else:
            full = h.with_falsified_edges(chosen)
            if not accepts(full, co):  # pragma: no cover - would mean axioms are not local
                raise AssertionError(f"combined witness rejected under {ids}")
            if found is None:
                found = _found(h, full, ids, stats)
            if first:
                return found
    return found


def brute_force_check(
    h: History,
    budget: OracleBudget = DEFAULT_BUDGET,
    *,
    first: bool = True,
    by_order: bool = True,
) -> Verdict:
    """Consistent iff some full witness has an accepted commit order.

    With ``first=False`` the whole space is scanned even after a success;
    the returned witness is still the first one found.
    """
    errors = validate(h)
    if errors:
        raise InvalidHistory(errors)
    table = _check_budget(h, budget)
    stats = Stats()
    search = _search_by_order if by_order else _search_by_witness
    found = search(h, table, stats, first)
    if found is not None:
        return found
    return Verdict(
        Status.INCONSISTENT,
        violation={"kind": "exhausted", "extensions": stats.extensions_tried},
        stats=stats,
    )
