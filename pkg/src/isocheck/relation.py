"""Binary relations over the transactions of one history, as bitsets."""

from __future__ import annotations

from typing import Iterable, Iterator, Optional, Sequence


class CommitRelation:
    """An immutable relation; ``succ[i]`` is the bitset of successors of i."""

    __slots__ = ("ids", "succ", "_pred", "_closed")

    def __init__(self, ids: Sequence[str], succ: Sequence[int]) -> None:
        self.ids = tuple(ids)
        self.succ = tuple(succ)
        self._pred: Optional[tuple[int, ...]] = None
        self._closed: Optional[CommitRelation] = None

    # -- construction ------------------------------------------------------
    @classmethod
    def empty(cls, ids: Sequence[str]) -> "CommitRelation":
        return cls(ids, [0] * len(ids))

    @classmethod
    def from_pairs(
        cls, ids: Sequence[str], pairs: Iterable[tuple[str, str]]
    ) -> "CommitRelation":
        pos = {t: i for i, t in enumerate(ids)}
        succ = [0] * len(ids)
        for a, b in pairs:
            succ[pos[a]] |= 1 << pos[b]
        return cls(ids, succ)

    @classmethod
    def from_preds(cls, ids: Sequence[str], preds: Sequence[int]) -> "CommitRelation":
        succ = [0] * len(ids)
        for b, m in enumerate(preds):
            for a in _bits(m):
                succ[a] |= 1 << b
        return cls(ids, succ)

    @classmethod
    def total(cls, ids: Sequence[str], order: Sequence[str]) -> "CommitRelation":
        """The strict total order listing ``order`` first to last."""
        pos = {t: i for i, t in enumerate(ids)}
        succ = [0] * len(ids)
        later = 0
        for t in reversed(order):
            succ[pos[t]] = later
            later |= 1 << pos[t]
        return cls(ids, succ)

    # -- queries -----------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.ids)

    def index(self, t: str) -> int:
        return self.ids.index(t)

    def has(self, i: int, j: int) -> bool:
        return bool(self.succ[i] >> j & 1)

    def __contains__(self, pair: tuple[str, str]) -> bool:
        a, b = pair
        return self.has(self.index(a), self.index(b))

    @property
    def pred(self) -> tuple[int, ...]:
        if self._pred is None:
            pred = [0] * self.n
            for a, m in enumerate(self.succ):
                for b in _bits(m):
                    pred[b] |= 1 << a
            self._pred = tuple(pred)
        return self._pred

    def successors(self, t: str) -> list[str]:
        return [self.ids[j] for j in _bits(self.succ[self.index(t)])]

    def predecessors(self, t: str) -> list[str]:
        return [self.ids[j] for j in _bits(self.pred[self.index(t)])]

    def pairs(self) -> list[tuple[str, str]]:
        return [(self.ids[a], self.ids[b]) for a in range(self.n) for b in _bits(self.succ[a])]

    def __len__(self) -> int:
        return sum(bin(m).count("1") for m in self.succ)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, CommitRelation)
            and self.ids == other.ids
            and self.succ == other.succ
        )

    def __hash__(self) -> int:
        return hash((self.ids, self.succ))

    def __repr__(self) -> str:
        return f"CommitRelation({self.pairs()!r})"

    def issubset(self, other: "CommitRelation") -> bool:
        return all(a & ~b == 0 for a, b in zip(self.succ, other.succ))

    def union(self, other: "CommitRelation") -> "CommitRelation":
        return CommitRelation(self.ids, [a | b for a, b in zip(self.succ, other.succ)])

    # -- closure and cycles ------------------------------------------------
    def closure(self) -> "CommitRelation":
        """Transitive closure (Warshall over bitsets)."""
        if self._closed is None:
            succ = transitive_closure(self.succ)
            closed = CommitRelation(self.ids, succ)
            closed._closed = closed
            self._closed = closed
        return self._closed

    def is_transitive(self) -> bool:
        return self.closure().succ == self.succ

    def is_acyclic(self) -> bool:
        c = self.closure()
        return all(not (m >> i & 1) for i, m in enumerate(c.succ))

    def find_cycle(self) -> Optional[list[str]]:
        """A cycle as a list of ids (first element repeated at the end).

        Self-loops are only reported when no longer cycle exists, so the
        closure of a cyclic relation still yields a readable cycle.
        """
        found = self._cycle_without_loops()
        if found is not None:
            return found
        for i, m in enumerate(self.succ):
            if m >> i & 1:
                return [self.ids[i], self.ids[i]]
        return None

    def _cycle_without_loops(self) -> Optional[list[str]]:
        color = [0] * self.n
        parent = [-1] * self.n
        for root in range(self.n):
            if color[root]:
                continue
            stack: list[tuple[int, Iterator[int]]] = [(root, self._out(root))]
            color[root] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[node] = 2
                    stack.pop()
                    continue
                if color[nxt] == 1:
                    cyc = [nxt]
                    cur = node
                    while cur != nxt:
                        cyc.append(cur)
                        cur = parent[cur]
                    cyc.append(nxt)
                    cyc.reverse()
                    return [self.ids[i] for i in cyc]
                if color[nxt] == 0:
                    color[nxt] = 1
                    parent[nxt] = node
                    stack.append((nxt, self._out(nxt)))
        return None

    def _out(self, i: int) -> Iterator[int]:
        return _bits(self.succ[i] & ~(1 << i))

    def is_total(self) -> bool:
        """Strict total order: transitive, irreflexive, and connected."""
        if not self.is_transitive() or not self.is_acyclic():
            return False
        full = (1 << self.n) - 1
        return all(
            (self.succ[i] | self.pred[i] | (1 << i)) == full for i in range(self.n)
        )

    def linearize(self) -> list[str]:
        """Ids sorted by number of predecessors (a total order's listing)."""
        return [self.ids[i] for i in sorted(range(self.n), key=lambda i: bin(self.pred[i]).count("1"))]


def transitive_closure(succ: Sequence[int]) -> list[int]:
    out = list(succ)
    n = len(out)
    for k in range(n):
        bk = 1 << k
        sk = out[k]
        if not sk:
            continue
        for i in range(n):
            if out[i] & bk:
                out[i] |= sk
    return out


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low
