"""Transactions, histories and the semantic functions defined over them.

A history is immutable.  Everything derived from it (row values written by
events, per-key writer sets, the read sites the axioms quantify over) is
computed once into an :class:`Index` and cached on the history object.
Transactions are addressed by string ids and events by ``(txn id, position)``
where position 0 is the ``begin`` event.
"""

from __future__ import annotations

import copy
import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from .predicate import DELETED, UNDEFINED, Predicate, Present, RowValue, Special

INIT = "init"

EventId = tuple[str, int]


class IsolationLevel(str, Enum):
    SER = "SER"
    SI = "SI"
    PC = "PC"
    RA = "RA"
    RC = "RC"

    @property
    def strength(self) -> int:
        return _STRENGTH[self]

    def weaker(self) -> list["IsolationLevel"]:
        """Levels strictly weaker than this one, strongest first."""
        return [lvl for lvl in ISOLATION_LEVELS if lvl.strength < self.strength]


ISOLATION_LEVELS = (
    IsolationLevel.SER,
    IsolationLevel.SI,
    IsolationLevel.PC,
    IsolationLevel.RA,
    IsolationLevel.RC,
)
_STRENGTH = {lvl: 4 - i for i, lvl in enumerate(ISOLATION_LEVELS)}


class Status(str, Enum):
    COMMITTED = "committed"
    ABORTED = "aborted"


def _freeze_map(m: Union[Mapping, Iterable]) -> tuple:
    items = m.items() if isinstance(m, Mapping) else m
    return tuple(sorted(items))


@dataclass(frozen=True)
class Begin:
    iso: IsolationLevel


@dataclass(frozen=True)
class Commit:
    pass


@dataclass(frozen=True)
class Abort:
    pass


@dataclass(frozen=True)
class Select:
    where: Predicate


@dataclass(frozen=True)
class Insert:
    """Inserted rows.  Only the synthetic init transaction may insert DELETED."""

    rows: tuple[tuple[str, Union[int, Special]], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", _freeze_map(self.rows))

    def get(self, key: str) -> Optional[Union[int, Special]]:
        return dict(self.rows).get(key)


@dataclass(frozen=True)
class Delete:
    where: Predicate


@dataclass(frozen=True)
class Update:
    where: Predicate
    set: tuple[tuple[str, int], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "set", _freeze_map(self.set))

    def get(self, key: str) -> Optional[int]:
        return dict(self.set).get(key)


Op = Union[Begin, Commit, Abort, Select, Insert, Delete, Update]
READ_OPS = (Select, Delete, Update)
WRITE_OPS = (Insert, Delete, Update)


def is_read(op: Op) -> bool:
    return isinstance(op, READ_OPS)


def is_write(op: Op) -> bool:
    return isinstance(op, WRITE_OPS)


@dataclass(frozen=True)
class TransactionLog:
    id: str
    iso: IsolationLevel
    session: Optional[str]
    events: tuple[Op, ...]
    status: Status = Status.COMMITTED

    @classmethod
    def of(
        cls,
        id: str,
        iso: Union[str, IsolationLevel],
        body: Sequence[Op],
        *,
        session: Optional[str] = None,
        aborted: bool = False,
    ) -> "TransactionLog":
        """Wrap a body in begin/commit (or begin/abort)."""
        iso = IsolationLevel(iso)
        end: Op = Abort() if aborted else Commit()
        status = Status.ABORTED if aborted else Status.COMMITTED
        return cls(id, iso, session, (Begin(iso), *body, end), status)

    @property
    def aborted(self) -> bool:
        return self.status is Status.ABORTED

    def event_ids(self) -> list[EventId]:
        return [(self.id, i) for i in range(len(self.events))]

    def with_iso(self, iso: IsolationLevel) -> "TransactionLog":
        events = tuple(Begin(iso) if isinstance(e, Begin) else e for e in self.events)
        return TransactionLog(self.id, iso, self.session, events, self.status)


@dataclass(frozen=True)
class Session:
    id: str
    transactions: tuple[TransactionLog, ...]


@dataclass(frozen=True)
class WrEdge:
    key: str
    write: EventId
    read: EventId


@dataclass(frozen=True)
class History:
    """A set of transaction logs with session order and write-read relation.

    ``initial`` maps every key to its initial integer value or ``None`` for a
    key that is absent at the start.  ``wr`` holds one edge per (read, key).
    """

    keys: tuple[str, ...]
    initial: tuple[tuple[str, Optional[int]], ...]
    sessions: tuple[Session, ...]
    wr: tuple[WrEdge, ...] = field(default=())

    @classmethod
    def make(
        cls,
        keys: Sequence[str],
        initial: Mapping[str, Optional[int]],
        sessions: Sequence[tuple[str, Sequence[TransactionLog]]],
        wr: Iterable[Union[WrEdge, tuple[str, EventId, EventId]]] = (),
    ) -> "History":
        """Build a history; transaction logs get their session id filled in."""
        sess = []
        for sid, txns in sessions:
            logs = tuple(
                TransactionLog(t.id, t.iso, sid, t.events, t.status) for t in txns
            )
            sess.append(Session(sid, logs))
        edges = tuple(e if isinstance(e, WrEdge) else WrEdge(*e) for e in wr)
        return cls(
            tuple(keys),
            tuple((k, initial.get(k)) for k in keys),
            tuple(sess),
            _sort_edges(edges),
        )

    # -- structure -------------------------------------------------------
    @cached_property
    def init(self) -> TransactionLog:
        rows = {k: (DELETED if v is None else v) for k, v in self.initial}
        return TransactionLog(
            INIT,
            IsolationLevel.SER,
            None,
            (Begin(IsolationLevel.SER), Insert(rows), Commit()),
        )

    @cached_property
    def transactions(self) -> tuple[TransactionLog, ...]:
        """init first, then sessions in declaration order."""
        return (self.init,) + tuple(
            t for s in self.sessions for t in s.transactions
        )

    @cached_property
    def _by_id(self) -> dict[str, TransactionLog]:
        return {t.id: t for t in self.transactions}

    def txn(self, tid: str) -> TransactionLog:
        return self._by_id[tid]

    def op(self, eid: EventId) -> Op:
        return self._by_id[eid[0]].events[eid[1]]

    def has_event(self, eid: EventId) -> bool:
        t = self._by_id.get(eid[0])
        return t is not None and 0 <= eid[1] < len(t.events)

    @property
    def user_transactions(self) -> tuple[TransactionLog, ...]:
        return self.transactions[1:]

    def so_pairs(self) -> Iterator[tuple[str, str]]:
        for t in self.user_transactions:
            yield INIT, t.id
        for s in self.sessions:
            for a, b in itertools.combinations(s.transactions, 2):
                yield a.id, b.id

    @cached_property
    def index(self) -> "Index":
        return Index(self)

    # -- derived histories -----------------------------------------------
    def with_edges(self, edges: Iterable[WrEdge]) -> "History":
        return History(
            self.keys, self.initial, self.sessions, _sort_edges(self.wr + tuple(edges))
        )

    def with_falsified_edges(self, edges: Iterable[WrEdge]) -> "History":
        """``with_edges`` for new edges into unread pairs whose values falsify
        the reading predicate.  Those never change what any transaction
        writes, so the index is derived from this one rather than rebuilt.
        """
        edges = tuple(edges)
        out = self.with_edges(edges)
        out.__dict__["index"] = self.index.extended(out, edges)
        return out

    def with_levels(self, levels: Mapping[str, IsolationLevel]) -> "History":
        sessions = tuple(
            Session(
                s.id,
                tuple(
                    t.with_iso(levels[t.id]) if t.id in levels else t
                    for t in s.transactions
                ),
            )
            for s in self.sessions
        )
        return History(self.keys, self.initial, sessions, self.wr)

    def wr_source(self, read: EventId, key: str) -> Optional[EventId]:
        return self.index.wr_src.get(read, {}).get(key)


def _sort_edges(edges: Iterable[WrEdge]) -> tuple[WrEdge, ...]:
    return tuple(sorted(edges, key=lambda e: (e.read, e.key, e.write)))


@dataclass
class ReadSite:
    """A read event together with what the axioms need to know about it."""

    event: EventId
    txn: int
    where: Predicate
    # key -> index of the transaction the read takes its value from
    src: dict[str, int]
    # keys written earlier in the same transaction
    local: frozenset[str]
    # transactions that are wr-sources of this read or of a po-earlier read
    rc_mask: int = 0


class Index:
    """Integer-indexed view of a history used by all the algorithms.

    Transaction sets are Python ints used as bitsets; bit ``i`` stands for
    ``ids[i]``.  init always has index 0.
    """

    def __init__(self, h: History) -> None:
        self.h = h
        self.logs = list(h.transactions)
        self.ids = [t.id for t in self.logs]
        self.pos = {tid: i for i, tid in enumerate(self.ids)}
        self.n = len(self.logs)
        self.keys = list(h.keys)
        self.iso = [t.iso for t in self.logs]

        self.session_index = [-1] * self.n
        self.session_pos = [0] * self.n
        self.so_pred = [0] * self.n
        self.sessions: list[list[int]] = []
        for si, s in enumerate(h.sessions):
            members = [self.pos[t.id] for t in s.transactions]
            self.sessions.append(members)
            acc = 1  # init
            for k, ti in enumerate(members):
                self.session_index[ti] = si
                self.session_pos[ti] = k
                self.so_pred[ti] = acc
                acc |= 1 << ti

        self.wr_src: dict[EventId, dict[str, EventId]] = defaultdict(dict)
        self.wr_pred = [0] * self.n
        for e in h.wr:
            self.wr_src[e.read][e.key] = e.write
            r, w = self.pos.get(e.read[0]), self.pos.get(e.write[0])
            if r is not None and w is not None and r != w:
                self.wr_pred[r] |= 1 << w
        self.wr_src = dict(self.wr_src)
        self.sowr_pred = [a | b for a, b in zip(self.so_pred, self.wr_pred)]

        self._values: dict[tuple[EventId, str], RowValue] = {}
        self._busy: set[tuple[EventId, str]] = set()

        self.writes_mask = {x: 0 for x in self.keys}
        self.writer_event: dict[tuple[int, str], EventId] = {}
        self.txn_value: dict[tuple[int, str], RowValue] = {}
        self.wkeys: list[frozenset[str]] = []
        for i, t in enumerate(self.logs):
            written = set()
            for p, op in enumerate(t.events):
                if not is_write(op):
                    continue
                for x in self.keys:
                    v = self.value((t.id, p), x)
                    if v is UNDEFINED:
                        continue
                    if not t.aborted:
                        written.add(x)
                        self.writer_event[(i, x)] = (t.id, p)
                        self.txn_value[(i, x)] = v
            for x in written:
                self.writes_mask[x] |= 1 << i
            self.wkeys.append(frozenset(written))

        # transactions sharing a written key, for the Conflict relation
        self.cw = [0] * self.n
        for i in range(self.n):
            m = 0
            for x in self.wkeys[i]:
                m |= self.writes_mask[x]
            self.cw[i] = m

        self.sites: list[ReadSite] = []
        self.site_of: dict[EventId, int] = {}
        for i, t in enumerate(self.logs):
            local: set[str] = set()
            rc = 0
            for p, op in enumerate(t.events):
                eid = (t.id, p)
                if is_read(op):
                    srcs = {}
                    for x, w in self.wr_src.get(eid, {}).items():
                        wi = self.pos.get(w[0])
                        if wi is not None:
                            srcs[x] = wi
                            rc |= 1 << wi
                    self.site_of[eid] = len(self.sites)
                    self.sites.append(
                        ReadSite(eid, i, op.where, srcs, frozenset(local), rc)
                    )
                if is_write(op):
                    for x in self.keys:
                        if self.value(eid, x) is not UNDEFINED:
                            local.add(x)

    def extended(self, h: History, edges: Sequence[WrEdge]) -> "Index":
        """Index of ``h`` = this history plus ``edges``, assuming the edges
        leave every written value unchanged."""
        new = copy.copy(self)
        new.h = h
        new.wr_src = {e: dict(m) for e, m in self.wr_src.items()}
        new.wr_pred = list(self.wr_pred)
        for e in edges:
            new.wr_src.setdefault(e.read, {})[e.key] = e.write
            r, w = self.pos[e.read[0]], self.pos[e.write[0]]
            if r != w:
                new.wr_pred[r] |= 1 << w
        new.sowr_pred = [a | b for a, b in zip(self.so_pred, new.wr_pred)]
        new.sites = []
        rc, owner = 0, -1
        for s in self.sites:
            if s.txn != owner:
                rc, owner = 0, s.txn
            src = {x: self.pos[w[0]] for x, w in new.wr_src.get(s.event, {}).items()}
            for wi in src.values():
                rc |= 1 << wi
            new.sites.append(ReadSite(s.event, s.txn, s.where, src, s.local, rc))
        new._busy = set()
        return new

    # -- values ------------------------------------------------------------
    def value(self, eid: EventId, x: str) -> RowValue:
        memo = (eid, x)
        hit = self._values.get(memo)
        if hit is not None:
            return hit
        if memo in self._busy:  # only reachable on a wr cycle
            return UNDEFINED
        self._busy.add(memo)
        try:
            v = self._compute_value(eid, x)
        finally:
            self._busy.discard(memo)
        self._values[memo] = v
        return v

    def _compute_value(self, eid: EventId, x: str) -> RowValue:
        op = self.h.op(eid)
        if isinstance(op, Insert):
            raw = op.get(x)
            if raw is None:
                return UNDEFINED
            return raw if isinstance(raw, Special) else Present(raw)
        if isinstance(op, (Delete, Update)):
            src = self.wr_src.get(eid, {}).get(x)
            if src is None or not self.h.has_event(src):
                return UNDEFINED
            if not op.where(x, self.value(src, x)):
                return UNDEFINED
            if isinstance(op, Delete):
                return DELETED
            new = op.get(x)
            return UNDEFINED if new is None else Present(new)
        return UNDEFINED

    def writes(self, t: int, x: str) -> bool:
        return bool(self.writes_mask[x] >> t & 1)

    def bits(self, mask: int) -> Iterator[int]:
        while mask:
            low = mask & -mask
            yield low.bit_length() - 1
            mask ^= low

    def unread_pairs(self) -> list[tuple[int, str]]:
        """(site index, key) pairs with no wr source that are not local reads."""
        out = []
        for si, s in enumerate(self.sites):
            for x in self.keys:
                if x not in s.src and x not in s.local:
                    out.append((si, x))
        return out


# -- public semantic functions ---------------------------------------------


def value_wr(h: History, w: EventId, x: str) -> RowValue:
    """Value written by event ``w`` on key ``x`` (UNDEFINED if none)."""
    return h.index.value(w, x)


def value_wr_uncached(h: History, w: EventId, x: str) -> RowValue:
    return Index(h).value(w, x)


def writes(h: History, t: str, x: str) -> bool:
    ix = h.index
    return ix.writes(ix.pos[t], x)


def txn_value(h: History, t: str, x: str) -> RowValue:
    ix = h.index
    try:
        return ix.txn_value[(ix.pos[t], x)]
    except KeyError:
        raise LookupError(f"transaction {t} does not write {x}") from None


def reads_locally(h: History, r: EventId, x: str) -> bool:
    site = h.index.sites[h.index.site_of[r]]
    return x in site.local


def read_events(h: History) -> list[EventId]:
    return [s.event for s in h.index.sites]


def is_full(h: History) -> bool:
    return not h.index.unread_pairs()


def txn_graph_acyclic(n: int, preds: Sequence[int]) -> bool:
    """Kahn's algorithm over predecessor bitsets."""
    indeg = [bin(p).count("1") for p in preds]
    succ: list[list[int]] = [[] for _ in range(n)]
    for b in range(n):
        m = preds[b]
        while m:
            low = m & -m
            succ[low.bit_length() - 1].append(b)
            m ^= low
    ready = [i for i in range(n) if indeg[i] == 0]
    seen = 0
    while ready:
        a = ready.pop()
        seen += 1
        for b in succ[a]:
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
    return seen == n


def validate(h: History) -> list[str]:
    """Structural problems of ``h``; the empty list means it is well formed."""
    errors: list[str] = []
    ids = [t.id for t in h.transactions]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        errors.append(f"duplicate transaction ids: {dup}")
    sids = [s.id for s in h.sessions]
    if len(set(sids)) != len(sids):
        errors.append("duplicate session ids")
    keyset = set(h.keys)
    if len(keyset) != len(h.keys):
        errors.append("duplicate keys")

    for t in h.transactions:
        ev = t.events
        if len(ev) < 2 or not isinstance(ev[0], Begin):
            errors.append(f"{t.id}: must start with begin and end with commit/abort")
            continue
        end = ev[-1]
        want = Abort if t.aborted else Commit
        if not isinstance(end, want):
            errors.append(f"{t.id}: last event does not match status {t.status.value}")
        for p, op in enumerate(ev[1:-1], start=1):
            if isinstance(op, (Begin, Commit, Abort)):
                errors.append(f"{t.id}:{p}: begin/commit/abort inside the body")
            if isinstance(op, Insert):
                for k, v in op.rows:
                    if k not in keyset:
                        errors.append(f"{t.id}:{p}: unknown key {k}")
                    if isinstance(v, Special) and t.id != INIT:
                        errors.append(f"{t.id}:{p}: only init may insert a deleted row")
            if isinstance(op, Update):
                for k, _ in op.set:
                    if k not in keyset:
                        errors.append(f"{t.id}:{p}: unknown key {k}")
        if ev[0].iso != t.iso:
            errors.append(f"{t.id}: begin event level differs from transaction level")
    if errors:
        return errors

    pos = {tid: i for i, tid in enumerate(ids)}
    preds = [0] * len(ids)
    for a, b in h.so_pairs():
        preds[pos[b]] |= 1 << pos[a]
    seen_pairs: set[tuple[EventId, str]] = set()
    for e in h.wr:
        tag = f"wr[{e.key}] {e.write[0]}:{e.write[1]} -> {e.read[0]}:{e.read[1]}"
        if e.key not in keyset:
            errors.append(f"{tag}: unknown key")
            continue
        if not h.has_event(e.read) or not is_read(h.op(e.read)):
            errors.append(f"{tag}: target is not a read event")
            continue
        if not h.has_event(e.write) or not is_write(h.op(e.write)):
            errors.append(f"{tag}: source is not a write event")
            continue
        if (e.read, e.key) in seen_pairs:
            errors.append(f"{tag}: read has two sources for the same key")
        seen_pairs.add((e.read, e.key))
        if e.read[0] == e.write[0]:
            errors.append(f"{tag}: write-read edge inside one transaction")
            continue
        if h.txn(e.write[0]).aborted:
            errors.append(f"{tag}: reads from an aborted transaction")
        preds[pos[e.read[0]]] |= 1 << pos[e.write[0]]
    if errors:
        return errors
    if not txn_graph_acyclic(len(ids), preds):
        return ["session order and write-read relation form a cycle"]

    ix = h.index
    for e in h.wr:
        if ix.value(e.write, e.key) is UNDEFINED:
            errors.append(
                f"wr[{e.key}] {e.write[0]}:{e.write[1]} -> {e.read[0]}:{e.read[1]}: "
                "source does not write this key"
            )
        site = ix.sites[ix.site_of[e.read]]
        if e.key in site.local:
            errors.append(
                f"wr[{e.key}] -> {e.read[0]}:{e.read[1]}: key is read locally"
            )
    for t in h.transactions:
        per_key: dict[str, int] = defaultdict(int)
        for p, op in enumerate(t.events):
            if is_write(op):
                for x in h.keys:
                    if ix.value((t.id, p), x) is not UNDEFINED:
                        per_key[x] += 1
        for x, c in sorted(per_key.items()):
            if c > 1:
                errors.append(f"{t.id}: writes key {x} more than once")
    return errors


def extends(client: History, full: History) -> bool:
    return (
        client.keys == full.keys
        and client.initial == full.initial
        and client.sessions == full.sessions
        and set(client.wr) <= set(full.wr)
    )


def is_witness(full: History, client: History) -> bool:
    """``full`` is a full extension of ``client`` whose added edges all
    carry values that falsify the reading event's predicate."""
    if not extends(client, full) or validate(full) or not is_full(full):
        return False
    ix = full.index
    for e in set(full.wr) - set(client.wr):
        where = full.op(e.read).where
        if where(e.key, ix.value(e.write, e.key)):
            return False
    return True


def is_partial_observation(client: History) -> bool:
    """Every unread, non-local pair could be explained by a deleting writer."""
    ix = client.index
    reach = _closure(ix.n, ix.sowr_pred)
    for si, x in ix.unread_pairs():
        s = ix.sites[si]
        ok = False
        for t in ix.bits(ix.writes_mask[x]):
            if t == s.txn or (reach[s.txn] >> t) & 1:
                continue
            if ix.txn_value[(t, x)] is DELETED:
                ok = True
                break
        if not ok:
            return False
    return True


def _closure(n: int, preds: Sequence[int]) -> list[int]:
    """Successor bitsets of the transitive closure of a predecessor graph."""
    succ = [0] * n
    for b in range(n):
        m = preds[b]
        while m:
            low = m & -m
            succ[low.bit_length() - 1] |= 1 << b
            m ^= low
    for k in range(n):
        bk = 1 << k
        for i in range(n):
            if succ[i] & bk:
                succ[i] |= succ[k]
    return succ


@dataclass(frozen=True)
class Execution:
    history: History
    co: tuple[str, ...]

    def __post_init__(self) -> None:
        ix = self.history.index
        if sorted(self.co) != sorted(ix.ids):
            raise ValueError("commit order must list every transaction once")
        where = {t: i for i, t in enumerate(self.co)}
        for b in range(ix.n):
            for a in ix.bits(ix.sowr_pred[b]):
                if where[ix.ids[a]] > where[ix.ids[b]]:
                    raise ValueError(
                        f"commit order puts {ix.ids[b]} before {ix.ids[a]}"
                    )
