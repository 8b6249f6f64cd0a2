"""Consistency checking of client histories.

The checker first saturates a partial commit order.  Unread pairs that some
earlier writer could have satisfied (conflicts) are resolved by enumerating
assignments to writers whose value falsifies the read's predicate.  Each
resulting conflict-free history is then searched for a commit order by a
depth-first walk over prefixes, memoising prefixes already known to fail.
When an order is found, the missing write-read edges are filled in from it.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Literal, Optional, Sequence

from .axioms import VIS_SET, Visibility, all_axioms_hold, visible_mask
from .model import (
    EventId,
    Execution,
    History,
    Index,
    IsolationLevel,
    WrEdge,
    is_witness,
    validate,
)
from .relation import CommitRelation
from .saturation import SaturationResult, saturate_fixpoint

log = logging.getLogger(__name__)

Mode = Literal["exact", "literal"]


class Status(str, Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    UNKNOWN = "unknown"


@dataclass(frozen=True, order=True)
class Conflict:
    read: EventId
    key: str


@dataclass(frozen=True)
class Prefix:
    txns: frozenset[str]
    last_writer: tuple[tuple[str, str], ...] = ()

    def writer(self, key: str) -> Optional[str]:
        return dict(self.last_writer).get(key)


@dataclass
class Stats:
    prefixes_explored: int = 0
    extensions_tried: int = 0
    fixpoint_passes: int = 0
    elapsed_ms: float = 0.0


@dataclass
class Verdict:
    status: Status
    witness: Optional[History] = None
    commit_order: Optional[tuple[str, ...]] = None
    wr_added: tuple[WrEdge, ...] = ()
    violation: Optional[dict] = None
    conflicts: list[Conflict] = field(default_factory=list)
    stats: Stats = field(default_factory=Stats)

    @property
    def consistent(self) -> bool:
        return self.status is Status.CONSISTENT


class InvalidHistory(ValueError):
    def __init__(self, errors: Sequence[str]) -> None:
        super().__init__("; ".join(errors))
        self.errors = list(errors)


# -- conflicts ---------------------------------------------------------------


def _zero_one(ix: Index, pco: CommitRelation, site_i: int, x: str) -> tuple[int, int]:
    site = ix.sites[site_i]
    tr = site.txn
    cand = ix.writes_mask[x] & ~pco.succ[tr] & ~(1 << tr)
    zero = one = 0
    for t in ix.bits(cand):
        if site.where(x, ix.txn_value[(t, x)]):
            one |= 1 << t
        else:
            zero |= 1 << t
    return zero, one


def zero_one_sets(
    h: History, pco: CommitRelation, r: EventId, x: str
) -> tuple[frozenset[str], frozenset[str]]:
    """Writers of x not forced after r's transaction, split by whether their
    value falsifies (zero) or satisfies (one) the predicate of r."""
    ix = h.index
    zero, one = _zero_one(ix, pco, ix.site_of[r], x)
    ids = ix.ids
    return (
        frozenset(ids[i] for i in ix.bits(zero)),
        frozenset(ids[i] for i in ix.bits(one)),
    )


def _conflicts(ix: Index, pco: CommitRelation) -> list[tuple[int, str, int]]:
    """(site, key, zero bitset) for each conflict, in read order then key order."""
    out = []
    for si, x in ix.unread_pairs():
        zero, one = _zero_one(ix, pco, si, x)
        if one:
            out.append((si, x, zero))
    return out


def conflicts(h: History, pco: CommitRelation) -> list[Conflict]:
    ix = h.index
    return [Conflict(ix.sites[si].event, x) for si, x, _ in _conflicts(ix, pco)]


def _extension_edges(
    ix: Index, table: Sequence[tuple[int, str, int]]
) -> Iterator[list[WrEdge]]:
    choices = [list(ix.bits(zero)) for _, _, zero in table]
    for pick in itertools.product(*choices):
        edges = []
        for (si, x, _), t in zip(table, pick):
            edges.append(WrEdge(x, ix.writer_event[(t, x)], ix.sites[si].event))
        yield edges


def enumerate_extensions(
    h: History, pco: Optional[CommitRelation] = None
) -> Iterator[History]:
    """Every assignment of conflicts to zero-set writers, as histories."""
    if pco is None:
        pco = saturate_fixpoint(h).pco
    table = _conflicts(h.index, pco)
    if not table:
        return
    for edges in _extension_edges(h.index, table):
        yield h.with_edges(edges)


# -- prefix search -------------------------------------------------------------


class PrefixSearch:
    """Depth-first search for a commit order of a conflict-free history."""

    def __init__(
        self,
        h: History,
        pco: CommitRelation,
        *,
        mode: Mode = "exact",
        use_seen: bool = True,
        stats: Optional[Stats] = None,
    ) -> None:
        self.h = h
        self.ix = ix = h.index
        self.pco = pco
        self.mode = mode
        self.use_seen = use_seen
        self.stats = stats if stats is not None else Stats()
        self.full = (1 << ix.n) - 1
        self.key_pos = {x: i for i, x in enumerate(ix.keys)}
        self.has_si = any(iso is IsolationLevel.SI for iso in ix.iso)
        self.sites = [s for s in ix.sites if s.src]
        self.wkey_pos = [[self.key_pos[x] for x in sorted(ix.wkeys[t])] for t in range(ix.n)]
        self.seen: set = set()

    # prefixes are (bitset of transactions, tuple of last writers per key)
    def candidates(self, mask: int) -> list[int]:
        if not mask & 1:
            return [0]
        out = []
        for members in self.ix.sessions:
            for t in members:
                if not mask >> t & 1:
                    out.append(t)
                    break
        return out

    def extend(self, mask: int, last: tuple[int, ...], t: int) -> tuple[int, tuple[int, ...]]:
        if self.wkey_pos[t]:
            lst = list(last)
            for k in self.wkey_pos[t]:
                lst[k] = t
            last = tuple(lst)
        return mask | 1 << t, last

    def key_of(self, mask: int, last: tuple[int, ...]):
        return (mask, last) if self.has_si else mask

    def blocked_by(self, mask: int, last: tuple[int, ...], t: int) -> Optional[str]:
        """None if adding t is a consistent extension, else the failed condition."""
        if self.pco.pred[t] & ~mask:
            return "closure"
        if self.mode == "literal":
            ok = self._literal_ok(mask, last, t)
        else:
            ok = self._exact_ok(mask, last, t)
        return None if ok else "overwrite"

    def _exact_ok(self, mask: int, last: tuple[int, ...], t: int) -> bool:
        ix = self.ix
        after = mask | 1 << t
        later = self.full & ~after
        tkeys = ix.wkeys[t]
        if not tkeys:
            return True
        for site in self.sites:
            tr = site.txn
            if after >> tr & 1:
                continue
            for v in VIS_SET[ix.iso[tr]]:
                if v is Visibility.CONFLICT:
                    if not ix.cw[tr] >> t & 1:
                        continue
                    # t writes a key tr also writes: every writer placed so far
                    # is now visible to r, so r must read the latest of them.
                    for x, t1 in site.src.items():
                        if mask >> t1 & 1 and (x in tkeys or last[self.key_pos[x]] != t1):
                            return False
                    continue
                if v is Visibility.SER:
                    visible = True
                elif v is Visibility.PREFIX:
                    visible = bool((later | 1 << t) & ix.sowr_pred[tr])
                elif v is Visibility.RA:
                    visible = bool(ix.sowr_pred[tr] >> t & 1)
                else:
                    visible = bool((ix.so_pred[tr] | site.rc_mask) >> t & 1)
                if not visible:
                    continue
                for x, t1 in site.src.items():
                    if x in tkeys and mask >> t1 & 1:
                        return False
        return True

    def _literal_ok(self, mask: int, last: tuple[int, ...], t: int) -> bool:
        """The extension predicates read word for word, over pco extended with
        prefix-before-t and t-before-the-rest."""
        ix = self.ix
        after = mask | 1 << t
        later = self.full & ~after
        succ = list(self.pco.succ)
        for p in ix.bits(mask):
            succ[p] |= 1 << t
        succ[t] |= later
        rel = CommitRelation(ix.ids, succ)
        star = rel.closure()
        for site in self.sites:
            tr = site.txn
            if after >> tr & 1:
                continue
            for v in VIS_SET[ix.iso[tr]]:
                vis = visible_mask(ix, rel, v, site, star)
                if v is Visibility.CONFLICT:
                    for x, t1 in site.src.items():
                        placed = ix.writes_mask[x] & after & vis
                        if placed and last[self.key_pos[x]] != t1:
                            return False
                    continue
                if not vis >> t & 1:
                    continue
                for x, t1 in site.src.items():
                    if ix.writes(t, x) and mask >> t1 & 1:
                        return False
        return True

    def run(self) -> Optional[list[int]]:
        last = tuple([-1] * len(self.ix.keys))
        order: list[int] = []
        if self._explore(0, last, order):
            return order
        return None

    def _explore(self, mask: int, last: tuple[int, ...], order: list[int]) -> bool:
        if mask == self.full:
            return True
        for t in self.candidates(mask):
            reason = self.blocked_by(mask, last, t)
            if reason is not None:
                continue
            nmask, nlast = self.extend(mask, last, t)
            key = self.key_of(nmask, nlast)
            if self.use_seen and key in self.seen:
                continue
            self.stats.prefixes_explored += 1
            order.append(t)
            if self._explore(nmask, nlast, order):
                return True
            order.pop()
            if self.use_seen:
                self.seen.add(key)
        return False


def _prefix_state(search: PrefixSearch, P: Prefix) -> tuple[int, tuple[int, ...]]:
    ix = search.ix
    mask = 0
    for t in P.txns:
        mask |= 1 << ix.pos[t]
    last = [-1] * len(ix.keys)
    for x, t in P.last_writer:
        last[search.key_pos[x]] = ix.pos[t]
    return mask, tuple(last)


def prefix_of(h: History, order: Sequence[str]) -> Prefix:
    """The prefix reached after placing ``order`` in sequence."""
    ix = h.index
    last: dict[str, str] = {}
    for t in order:
        for x in ix.wkeys[ix.pos[t]]:
            last[x] = t
    return Prefix(frozenset(order), tuple(sorted(last.items())))


def is_consistent_extension(
    h: History, pco: CommitRelation, P: Prefix, t: str, *, mode: Mode = "exact"
) -> bool:
    search = PrefixSearch(h, pco, mode=mode)
    mask, last = _prefix_state(search, P)
    return search.blocked_by(mask, last, h.index.pos[t]) is None


def extension_blocker(
    h: History, pco: CommitRelation, P: Prefix, t: str, *, mode: Mode = "exact"
) -> Optional[str]:
    """Which condition rejects adding t: "closure", "overwrite" or None."""
    search = PrefixSearch(h, pco, mode=mode)
    mask, last = _prefix_state(search, P)
    return search.blocked_by(mask, last, h.index.pos[t])


def prefix_equivalent(P: Prefix, Q: Prefix, h: History) -> bool:
    if any(t.iso is IsolationLevel.SI for t in h.transactions):
        return P.txns == Q.txns and dict(P.last_writer) == dict(Q.last_writer)
    return P.txns == Q.txns


def explore_consistent_prefixes(
    h: History,
    pco: Optional[CommitRelation] = None,
    *,
    mode: Mode = "exact",
    use_seen: bool = True,
) -> Optional[list[str]]:
    """A commit order found by the prefix search, or None."""
    if pco is None:
        pco = saturate_fixpoint(h).pco
    search = PrefixSearch(h, pco, mode=mode, use_seen=use_seen)
    order = search.run()
    return None if order is None else [h.index.ids[i] for i in order]


# -- witnesses -----------------------------------------------------------------


class WitnessError(RuntimeError):
    pass


def extract_witness(h: History, co: Sequence[str]) -> History:
    """Fill every unread pair with its latest visible writer under co."""
    ix = h.index
    rel = CommitRelation.total(ix.ids, co)
    rank = {ix.pos[t]: i for i, t in enumerate(co)}
    edges = []
    for si, x in ix.unread_pairs():
        site = ix.sites[si]
        vis = 0
        for v in VIS_SET[ix.iso[site.txn]]:
            vis |= visible_mask(ix, rel, v, site, rel)
        cand = vis & ix.writes_mask[x] & ~(1 << site.txn)
        if not cand:
            raise WitnessError(f"no visible writer of {x} for {site.event}")
        best = max(ix.bits(cand), key=rank.__getitem__)
        edges.append(WrEdge(x, ix.writer_event[(best, x)], site.event))
    return h.with_edges(edges)


# -- top level -----------------------------------------------------------------


def _event_str(e: EventId) -> str:
    return f"{e[0]}:{e[1]}"


def check_consistency(
    h: History,
    *,
    max_extensions: Optional[int] = None,
    mode: Mode = "exact",
    use_seen: bool = True,
    verify: bool = True,
) -> Verdict:
    """Decide whether ``h`` has a consistent witness."""
    t0 = time.perf_counter()
    errors = validate(h)
    if errors:
        raise InvalidHistory(errors)
    stats = Stats()
    verdict = _check(h, stats, max_extensions, mode, use_seen)
    if verify and verdict.consistent:
        _verify(h, verdict)
    stats.elapsed_ms = (time.perf_counter() - t0) * 1000.0
    return verdict


def _check(
    h: History,
    stats: Stats,
    max_extensions: Optional[int],
    mode: Mode,
    use_seen: bool,
) -> Verdict:
    ix = h.index
    sat: SaturationResult = saturate_fixpoint(h)
    stats.fixpoint_passes += sat.passes
    if not sat.acyclic:
        return Verdict(
            Status.INCONSISTENT,
            violation={"kind": "cycle", "cycle": sat.cycle_witness},
            stats=stats,
        )
    table = _conflicts(ix, sat.pco)
    found = [Conflict(ix.sites[si].event, x) for si, x, _ in table]
    for si, x, zero in table:
        if not zero:
            return Verdict(
                Status.INCONSISTENT,
                violation={
                    "kind": "empty_zero_set",
                    "read": _event_str(ix.sites[si].event),
                    "key": x,
                },
                conflicts=found,
                stats=stats,
            )
    if not table:
        stats.extensions_tried += 1  # the history is its own only extension
        order = PrefixSearch(h, sat.pco, mode=mode, use_seen=use_seen, stats=stats).run()
        if order is None:
            return Verdict(
                Status.INCONSISTENT,
                violation={"kind": "exhausted", "extensions": 1},
                stats=stats,
            )
        return _success(h, h, [ix.ids[i] for i in order], found, stats)

    for edges in _extension_edges(ix, table):
        if max_extensions is not None and stats.extensions_tried >= max_extensions:
            return Verdict(Status.UNKNOWN, conflicts=found, stats=stats)
        stats.extensions_tried += 1
        ext = h.with_edges(edges)
        sub = saturate_fixpoint(ext)
        stats.fixpoint_passes += sub.passes
        if not sub.acyclic:
            continue
        order = PrefixSearch(ext, sub.pco, mode=mode, use_seen=use_seen, stats=stats).run()
        if order is not None:
            return _success(h, ext, [ext.index.ids[i] for i in order], found, stats)
    return Verdict(
        Status.INCONSISTENT,
        violation={"kind": "exhausted", "extensions": stats.extensions_tried},
        conflicts=found,
        stats=stats,
    )


def _success(
    h: History, ext: History, co: list[str], found: list[Conflict], stats: Stats
) -> Verdict:
    full = extract_witness(ext, co)
    added = tuple(sorted(set(full.wr) - set(h.wr), key=lambda e: (e.read, e.key)))
    return Verdict(
        Status.CONSISTENT,
        witness=full,
        commit_order=tuple(co),
        wr_added=added,
        conflicts=found,
        stats=stats,
    )


def _verify(h: History, v: Verdict) -> None:
    assert v.witness is not None and v.commit_order is not None
    if not is_witness(v.witness, h):
        raise WitnessError("extracted history is not a witness")
    if not all_axioms_hold(Execution(v.witness, v.commit_order)):
        raise WitnessError("extracted execution violates an axiom")
