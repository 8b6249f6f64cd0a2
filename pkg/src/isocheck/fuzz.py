"""Random histories for differential testing against the brute-force oracle.

Unlike the interleaving machine in :mod:`isocheck.opsem`, sources here are
picked among all earlier writers, so the output mixes consistent and
inconsistent histories at every isolation level.  Client histories are
obtained by dropping wr edges whose value falsifies the reading predicate.
"""

from __future__ import annotations

import random
from typing import Iterator, Optional, Sequence

from .model import (
    INIT,
    ISOLATION_LEVELS,
    Abort,
    Delete,
    EventId,
    History,
    Insert,
    IsolationLevel,
    Select,
    TransactionLog,
    Update,
    WrEdge,
    is_read,
    validate,
)
from .opsem import random_body
from .oracle import DEFAULT_BUDGET, OracleBudget, OracleTooLarge, _check_budget
from .predicate import DELETED, Present, RowValue


def random_history(
    rng: random.Random,
    *,
    txns: Optional[int] = None,
    max_txns: int = 6,
    max_sessions: int = 3,
    max_keys: int = 4,
    levels: Sequence[IsolationLevel] = ISOLATION_LEVELS,
    full: bool = False,
    drop: float = 0.75,
    wild_drop: float = 0.03,
    fresh: float = 0.5,
    read_ratio: float = 0.5,
    abort_rate: float = 0.08,
    max_len: int = 3,
) -> History:
    """One random history.

    ``txns`` fixes the transaction count, otherwise it is uniform in
    1..max_txns.  ``fresh`` is the chance a read takes the newest earlier
    writer rather than a uniformly chosen one.  Unless ``full``, edges whose
    value falsifies the read's predicate are dropped with probability
    ``drop`` and other SELECT edges with probability ``wild_drop``.
    """
    nk = rng.randint(1, max_keys)
    keys = [f"x{i + 1}" for i in range(nk)]
    initial = {k: (None if rng.random() < 0.25 else rng.randint(-1, 2)) for k in keys}
    n = txns if txns is not None else rng.randint(1, max_txns)
    ns = rng.randint(1, min(max_sessions, n))

    placement = [rng.randrange(ns) for _ in range(n)]
    bodies: list[list] = [[] for _ in range(ns)]
    for i, s in enumerate(placement):
        iso = rng.choice(list(levels))
        bodies[s].append(
            random_body(rng, f"t{i + 1}", iso, keys, rng.randint(1, max_len), read_ratio, abort_rate)
        )
    bodies = [b for b in bodies if b]

    # generation order: a random interleaving of the sessions
    cursor = [0] * len(bodies)
    order = []
    while len(order) < n:
        s = rng.choice([i for i, b in enumerate(bodies) if cursor[i] < len(b)])
        order.append(bodies[s][cursor[s]])
        cursor[s] += 1

    writers: dict[str, list[tuple[EventId, RowValue]]] = {
        x: [((INIT, 1), DELETED if initial[x] is None else Present(initial[x]))] for x in keys
    }
    edges: list[tuple[WrEdge, bool, bool]] = []  # edge, satisfies where, droppable select
    logs: dict[str, TransactionLog] = {}
    for body in order:
        local: dict[str, tuple[int, RowValue]] = {}
        aborted = bool(body.instrs) and isinstance(body.instrs[-1], Abort)
        ops = [op for op in body.instrs if not isinstance(op, Abort)]
        for p, op in enumerate(ops, start=1):
            eid = (body.id, p)
            if is_read(op):
                for x in keys:
                    if x in local:
                        continue
                    cands = writers[x]
                    w, val = cands[-1] if rng.random() < fresh else rng.choice(cands)
                    sat = op.where(x, val)
                    edges.append((WrEdge(x, w, eid), sat, isinstance(op, Select)))
                    if sat and isinstance(op, Delete):
                        local[x] = (p, DELETED)
                    elif sat and isinstance(op, Update) and op.get(x) is not None:
                        local[x] = (p, Present(op.get(x)))
            elif isinstance(op, Insert):
                for x, v in op.rows:
                    local[x] = (p, Present(v))
        if not aborted:
            for x, (p, v) in local.items():
                writers[x].append(((body.id, p), v))
        logs[body.id] = TransactionLog.of(body.id, body.iso, ops, aborted=aborted)

    kept = []
    for e, sat, is_select in edges:
        if not full:
            if not sat and rng.random() < drop:
                continue
            if sat and is_select and rng.random() < wild_drop:
                continue
        kept.append(e)

    sessions = [(f"s{i + 1}", [logs[b.id] for b in bs]) for i, bs in enumerate(bodies)]
    return History.make(keys, initial, sessions, kept)


def oracle_cases(
    count: int,
    seed: int = 0,
    budget: OracleBudget = DEFAULT_BUDGET,
    **kwargs,
) -> Iterator[tuple[int, History]]:
    """``count`` valid random histories the oracle can afford, with the
    per-history seed that produced each one."""
    made = 0
    s = seed
    while made < count:
        h = random_history(random.Random(s), **kwargs)
        s += 1
        if validate(h):
            continue
        try:
            _check_budget(h, budget)
        except OracleTooLarge:
            continue
        made += 1
        yield s - 1, h
