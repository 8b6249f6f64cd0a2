"""A timestamp/snapshot interleaving machine for SER, SI and RC programs.

Every database access gets a fresh timestamp; reads observe the committed
state at a snapshot chosen according to the isolation level; commit and
abort validate the transaction and block the run when validation fails.
Completed runs are turned into full histories, which are consistent by
construction, so the module doubles as a source of positive test cases.

Local variables and conditionals never touch the database and are left out
of programs entirely.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

from .model import (
    INIT,
    Abort,
    Begin,
    Commit,
    Delete,
    EventId,
    History,
    Insert,
    IsolationLevel,
    Op,
    Select,
    Status,
    TransactionLog,
    Update,
    WrEdge,
    is_read,
)
from .predicate import DELETED, FALSE, TRUE, And, Cmp, KeyEq, Not, Or, Predicate, Present

GENERATED_LEVELS = (IsolationLevel.SER, IsolationLevel.SI, IsolationLevel.RC)
Instr = Union[Select, Insert, Delete, Update, Abort]


class Blocked(Exception):
    """A commit or abort failed validation; the run cannot finish."""


class NoCompletingSchedule(Exception):
    """Every attempted schedule of a program blocked."""


@dataclass(frozen=True)
class TxnBody:
    id: str
    iso: IsolationLevel
    instrs: tuple[Instr, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "iso", IsolationLevel(self.iso))
        object.__setattr__(self, "instrs", tuple(self.instrs))


@dataclass(frozen=True)
class Program:
    keys: tuple[str, ...]
    initial: Mapping[str, Optional[int]]
    sessions: tuple[tuple[str, tuple[TxnBody, ...]], ...]

    @property
    def bodies(self) -> list[TxnBody]:
        return [b for _, bs in self.sessions for b in bs]


# -- run state -------------------------------------------------------------------


@dataclass
class _Live:
    body: TxnBody
    events: list[Op]
    pc: int = 0
    local: dict[str, int] = field(default_factory=dict)  # key -> event position
    reads: set[str] = field(default_factory=set)  # keys read from other txns
    snap: int = 0
    last_snap: int = 0  # largest snapshot of an earlier event of this txn
    begin_ts: int = 0


@dataclass
class _Committed:
    txn: str
    ts: int
    writes: dict[str, EventId]


@dataclass
class _SessionState:
    id: str
    todo: list[TxnBody]
    done: list[TransactionLog] = field(default_factory=list)
    live: Optional[_Live] = None
    floor: int = 0  # newest commit ts when the session's last txn ended
    snap_floor: int = 0  # largest snapshot taken by an earlier txn


class RunConfig:
    """Configuration of the machine: history so far, timestamps, snapshots.

    ``timestamps`` and ``snapshots`` are keyed by event id; init's single
    write carries 0 for both.
    """

    def __init__(self, program: Program, rng: random.Random, fresh_bias: float = 0.0):
        self.program = program
        self.rng = rng
        self.fresh_bias = fresh_bias
        self.sessions = [_SessionState(sid, list(bodies)) for sid, bodies in program.sessions]
        self.clock = 0
        self.timestamps: dict[EventId, int] = {(INIT, 0): 0, (INIT, 1): 0, (INIT, 2): 0}
        self.snapshots: dict[EventId, int] = {(INIT, 0): 0, (INIT, 1): 0, (INIT, 2): 0}
        self.committed = [_Committed(INIT, 0, {x: (INIT, 1) for x in program.keys})]
        self.wr: list[WrEdge] = []
        self.order: list[EventId] = []  # emission order of non-init events

    # -- queries --
    def enabled(self) -> list[int]:
        return [i for i, s in enumerate(self.sessions) if s.live or s.todo]

    @property
    def final(self) -> bool:
        return not self.enabled()

    def _tick(self, eid: EventId) -> int:
        self.clock += 1
        self.timestamps[eid] = self.clock
        self.order.append(eid)
        return self.clock

    def _commit_points(self, below: int, floor: int) -> list[int]:
        return [c.ts for c in self.committed if floor <= c.ts < below]

    def _choose(self, options: list[int]) -> int:
        if self.fresh_bias and self.rng.random() < self.fresh_bias:
            return max(options)
        return self.rng.choice(options)

    def _snapshot(self, s: _SessionState, live: _Live, tau: int, begin: bool) -> int:
        iso = live.body.iso
        if iso is IsolationLevel.RC:
            floor = max(s.floor, s.snap_floor, live.last_snap)
            return self._choose(self._commit_points(tau, floor))
        if not begin:
            return live.snap
        if iso is IsolationLevel.SER:
            return max(self._commit_points(tau, 0))
        return self._choose(self._commit_points(tau, s.floor))

    def _read_from(self, live: _Live, snap: int) -> dict[str, EventId]:
        out: dict[str, EventId] = {}
        best: dict[str, int] = {}
        for c in self.committed:
            if c.ts > snap:
                continue
            for x, w in c.writes.items():
                if x in live.local:
                    continue
                if c.ts >= best.get(x, -1):
                    best[x] = c.ts
                    out[x] = w
        return out

    def _valid(self, live: _Live, end_ts: int) -> bool:
        iso = live.body.iso
        if iso is IsolationLevel.RC:
            return True
        if iso is IsolationLevel.SER:
            lo, touched = live.begin_ts, live.reads | set(live.local)
        else:
            lo, touched = live.snap, set(live.local)
        for c in self.committed:
            if lo < c.ts < end_ts and touched.intersection(c.writes):
                return False
        return True

    # -- transitions --
    def step(self, i: int) -> None:
        """Apply the one rule enabled for session ``i``; raise Blocked on failed validation."""
        s = self.sessions[i]
        if s.live is None:
            body = s.todo.pop(0)
            live = _Live(body, [Begin(body.iso)])
            tau = self._tick((body.id, 0))
            live.begin_ts = tau
            live.snap = self._snapshot(s, live, tau, begin=True)
            live.last_snap = live.snap
            self.snapshots[(body.id, 0)] = live.snap
            s.live = live
            return

        live = s.live
        tid = live.body.id
        instr: Op = live.body.instrs[live.pc] if live.pc < len(live.body.instrs) else Commit()
        p = len(live.events)
        eid = (tid, p)
        tau = self._tick(eid)
        snap = self._snapshot(s, live, tau, begin=False)
        self.snapshots[eid] = snap
        live.last_snap = max(live.last_snap, snap)
        live.events.append(instr)
        live.pc += 1

        if isinstance(instr, (Commit, Abort)):
            if not self._valid(live, tau):
                raise Blocked(f"{tid} cannot {'commit' if isinstance(instr, Commit) else 'abort'}")
            aborted = isinstance(instr, Abort)
            if not aborted:
                writes = {x: (tid, q) for x, q in live.local.items()}
                self.committed.append(_Committed(tid, tau, writes))
            s.floor = self.committed[-1].ts
            s.snap_floor = max(s.snap_floor, live.last_snap)
            s.done.append(
                TransactionLog(
                    tid,
                    live.body.iso,
                    s.id,
                    tuple(live.events),
                    Status.ABORTED if aborted else Status.COMMITTED,
                )
            )
            s.live = None
            return

        if is_read(instr):
            src = self._read_from(live, snap)
            for x, w in src.items():
                self.wr.append(WrEdge(x, w, eid))
                live.reads.add(x)
            if isinstance(instr, (Update, Delete)):
                for x, w in src.items():
                    if self._writes(instr, x, self._value(w, x)):
                        live.local[x] = p
        elif isinstance(instr, Insert):
            for x, _ in instr.rows:
                live.local[x] = p

    # -- values of committed writes, for UPDATE/DELETE --
    def _value(self, w: EventId, x: str):
        tid, p = w
        if tid == INIT:
            v = dict(self.program.initial).get(x)
            return DELETED if v is None else Present(v)
        op = self._op(w)
        if isinstance(op, Insert):
            return Present(op.get(x))
        if isinstance(op, Delete):
            return DELETED
        return Present(op.get(x))

    def _op(self, w: EventId) -> Op:
        for s in self.sessions:
            for t in s.done:
                if t.id == w[0]:
                    return t.events[w[1]]
            if s.live and s.live.body.id == w[0]:
                return s.live.events[w[1]]
        raise KeyError(w)

    @staticmethod
    def _writes(op: Union[Update, Delete], x: str, v) -> bool:
        if not op.where(x, v):
            return False
        return isinstance(op, Delete) or op.get(x) is not None

    def history(self) -> History:
        if not self.final:
            raise ValueError("run is not final")
        return History.make(
            self.program.keys,
            dict(self.program.initial),
            [(s.id, s.done) for s in self.sessions],
            self.wr,
        )


@dataclass(frozen=True)
class Run:
    history: History
    timestamps: dict[EventId, int]
    snapshots: dict[EventId, int]
    order: tuple[EventId, ...]
    attempts: int


def execute(program: Program, seed: int, *, stickiness: float = 0.0, fresh_bias: float = 0.0) -> RunConfig:
    """Drive one schedule to completion; raise Blocked if it gets stuck.

    ``stickiness`` is the chance of staying on the previous session and
    ``fresh_bias`` the chance of picking the newest legal snapshot.
    """
    rng = random.Random(seed)
    cfg = RunConfig(program, rng, fresh_bias)
    last: Optional[int] = None
    while True:
        ready = cfg.enabled()
        if not ready:
            return cfg
        if last in ready and rng.random() < stickiness:
            i = last
        else:
            i = rng.choice(ready)
        cfg.step(i)
        last = i if cfg.sessions[i].live is not None else None


def run(program: Program, seed: int, retries: int = 32, *, serial_fallback: bool = True) -> Run:
    """Run with reschedules.  Later attempts interleave less and read fresher
    snapshots.  With ``serial_fallback`` the last attempt is serial with the
    newest snapshots and so never blocks; without it a program whose every
    attempt blocks raises NoCompletingSchedule.
    """
    for attempt in range(retries + 1):
        frac = attempt / retries if retries else 0.0
        serial = serial_fallback and attempt == retries
        try:
            cfg = execute(
                program,
                seed * 1_000_003 + attempt,
                stickiness=1.0 if serial else 0.5 + frac / 2,
                fresh_bias=1.0 if serial else frac,
            )
        except Blocked:
            continue
        return Run(cfg.history(), dict(cfg.timestamps), dict(cfg.snapshots), tuple(cfg.order), attempt + 1)
    raise NoCompletingSchedule(f"no schedule completed after {retries + 1} attempts")


def run_to_history(program: Program, seed: int, retries: int = 32) -> History:
    return run(program, seed, retries).history


# -- random programs -------------------------------------------------------------


def _small_predicate(rng: random.Random, keys: Sequence[str], depth: int = 0) -> Predicate:
    roll = rng.random()
    if depth >= 2 or roll < 0.45:
        return Cmp(rng.choice(("<", "<=", "=", ">=", ">", "!=")), rng.randint(-2, 3))
    if roll < 0.6:
        return KeyEq(rng.choice(keys))
    if roll < 0.68:
        return rng.choice((TRUE, FALSE))
    if roll < 0.8:
        return Not(_small_predicate(rng, keys, depth + 1))
    parts = tuple(_small_predicate(rng, keys, depth + 1) for _ in range(2))
    return And(parts) if roll < 0.9 else Or(parts)


def _restrict(targets: Sequence[str], extra: Predicate) -> Predicate:
    keyed: Predicate = KeyEq(targets[0]) if len(targets) == 1 else Or(tuple(KeyEq(k) for k in targets))
    return keyed if extra == TRUE else And((keyed, extra))


def random_body(rng: random.Random, tid: str, iso: IsolationLevel, keys: Sequence[str], length: int, read_ratio: float, abort_rate: float) -> TxnBody:
    free = list(keys)  # keys this transaction may still write
    instrs: list[Instr] = []
    for _ in range(length):
        if not free or rng.random() < read_ratio:
            instrs.append(Select(_small_predicate(rng, keys)))
            continue
        targets = rng.sample(free, rng.randint(1, min(2, len(free))))
        for k in targets:
            free.remove(k)
        kind = rng.random()
        if kind < 0.45:
            instrs.append(Insert({k: rng.randint(-2, 3) for k in targets}))
        elif kind < 0.8:
            extra = rng.choice((TRUE, _small_predicate(rng, keys, 1)))
            instrs.append(Update(_restrict(targets, extra), {k: rng.randint(-2, 3) for k in targets}))
        else:
            extra = rng.choice((TRUE, _small_predicate(rng, keys, 1)))
            instrs.append(Delete(_restrict(targets, extra)))
    if rng.random() < abort_rate:
        instrs.append(Abort())
    return TxnBody(tid, iso, tuple(instrs))


def random_program(
    sessions: int,
    txns_per_session: int,
    keys: int,
    iso_mix: Union[str, IsolationLevel, Mapping[Union[str, IsolationLevel], float]] = "mixed",
    seed: int = 0,
    *,
    max_len: int = 3,
    read_ratio: float = 0.5,
    abort_rate: float = 0.05,
    absent_rate: float = 0.25,
) -> Program:
    """A random program over ``keys`` keys named x1, x2, ...

    ``iso_mix`` is a single level, "mixed" (uniform over SER/SI/RC) or a
    weight map over those levels.
    """
    if min(sessions, txns_per_session, keys) < 1:
        raise ValueError("sessions, txns_per_session and keys must all be >= 1")
    rng = random.Random(seed)
    levels, weights = _mix(iso_mix)
    names = [f"x{i + 1}" for i in range(keys)]
    initial = {k: (None if rng.random() < absent_rate else rng.randint(-1, 2)) for k in names}
    out = []
    n = 0
    for s in range(sessions):
        bodies = []
        for _ in range(txns_per_session):
            n += 1
            iso = rng.choices(levels, weights)[0]
            length = rng.randint(1, max_len)
            bodies.append(random_body(rng, f"t{n}", iso, names, length, read_ratio, abort_rate))
        out.append((f"s{s + 1}", tuple(bodies)))
    return Program(tuple(names), initial, tuple(out))


def _mix(iso_mix) -> tuple[list[IsolationLevel], list[float]]:
    if isinstance(iso_mix, str) and iso_mix == "mixed":
        return list(GENERATED_LEVELS), [1.0] * len(GENERATED_LEVELS)
    if isinstance(iso_mix, (str, IsolationLevel)):
        lvl = IsolationLevel(iso_mix)
        _check_generated(lvl)
        return [lvl], [1.0]
    levels = [IsolationLevel(k) for k in iso_mix]
    for lvl in levels:
        _check_generated(lvl)
    return levels, [float(w) for w in iso_mix.values()]


def _check_generated(lvl: IsolationLevel) -> None:
    if lvl not in GENERATED_LEVELS:
        raise ValueError(f"{lvl.value} programs cannot be executed; use SER, SI or RC")
