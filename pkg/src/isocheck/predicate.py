"""Row predicates used by SELECT, UPDATE and DELETE events.

A predicate inspects a single row, i.e. a key together with its current
value.  Only present integer values can satisfy a predicate: deleted and
undefined rows never match, whatever the shape of the expression.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Union


@dataclass(frozen=True)
class Present:
    value: int

    def __repr__(self) -> str:
        return f"Present({self.value})"


class Special(Enum):
    DELETED = "deleted"
    UNDEFINED = "undefined"

    def __repr__(self) -> str:
        return self.name


DELETED = Special.DELETED
UNDEFINED = Special.UNDEFINED

RowValue = Union[Present, Special]


_CMP: dict[str, Callable[[int, int], bool]] = {
    "<": operator.lt,
    "<=": operator.le,
    "=": operator.eq,
    ">=": operator.ge,
    ">": operator.gt,
    "!=": operator.ne,
}


class Predicate:
    """Base class; subclasses implement ``_holds`` on present values."""

    def __call__(self, key: str, value: RowValue) -> bool:
        if not isinstance(value, Present):
            return False
        return self._holds(key, value.value)

    def _holds(self, key: str, value: int) -> bool:  # pragma: no cover
        raise NotImplementedError

    def keys_mentioned(self) -> frozenset[str]:
        return frozenset()


@dataclass(frozen=True)
class Const(Predicate):
    truth: bool

    def _holds(self, key: str, value: int) -> bool:
        return self.truth


@dataclass(frozen=True)
class Cmp(Predicate):
    op: str
    value: int

    def __post_init__(self) -> None:
        if self.op not in _CMP:
            raise ValueError(f"unknown comparison operator {self.op!r}")

    def _holds(self, key: str, value: int) -> bool:
        return _CMP[self.op](value, self.value)


@dataclass(frozen=True)
class KeyEq(Predicate):
    key: str

    def _holds(self, key: str, value: int) -> bool:
        return key == self.key

    def keys_mentioned(self) -> frozenset[str]:
        return frozenset({self.key})


@dataclass(frozen=True)
class And(Predicate):
    items: tuple[Predicate, ...]

    def _holds(self, key: str, value: int) -> bool:
        return all(p._holds(key, value) for p in self.items)

    def keys_mentioned(self) -> frozenset[str]:
        return frozenset().union(*(p.keys_mentioned() for p in self.items))


@dataclass(frozen=True)
class Or(Predicate):
    items: tuple[Predicate, ...]

    def _holds(self, key: str, value: int) -> bool:
        return any(p._holds(key, value) for p in self.items)

    def keys_mentioned(self) -> frozenset[str]:
        return frozenset().union(*(p.keys_mentioned() for p in self.items))


@dataclass(frozen=True)
class Not(Predicate):
    item: Predicate

    def _holds(self, key: str, value: int) -> bool:
        return not self.item._holds(key, value)

    def keys_mentioned(self) -> frozenset[str]:
        return self.item.keys_mentioned()


TRUE = Const(True)
FALSE = Const(False)


def to_json(p: Predicate) -> Any:
    if isinstance(p, Const):
        return p.truth
    if isinstance(p, Cmp):
        return {"cmp": p.op, "value": p.value}
    if isinstance(p, KeyEq):
        return {"key_eq": p.key}
    if isinstance(p, And):
        return {"and": [to_json(q) for q in p.items]}
    if isinstance(p, Or):
        return {"or": [to_json(q) for q in p.items]}
    if isinstance(p, Not):
        return {"not": to_json(p.item)}
    raise TypeError(f"not a predicate: {p!r}")


def from_json(obj: Any) -> Predicate:
    if isinstance(obj, bool):
        return Const(obj)
    if not isinstance(obj, dict) or len(obj) == 0:
        raise ValueError(f"malformed predicate: {obj!r}")
    if "cmp" in obj:
        value = obj.get("value")
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValueError(f"comparison needs an integer value: {obj!r}")
        return Cmp(obj["cmp"], value)
    if "key_eq" in obj:
        if not isinstance(obj["key_eq"], str):
            raise ValueError(f"key_eq needs a key name: {obj!r}")
        return KeyEq(obj["key_eq"])
    if "and" in obj:
        return And(tuple(from_json(q) for q in obj["and"]))
    if "or" in obj:
        return Or(tuple(from_json(q) for q in obj["or"]))
    if "not" in obj:
        return Not(from_json(obj["not"]))
    raise ValueError(f"malformed predicate: {obj!r}")


def render(p: Predicate) -> str:
    """Compact infix rendering for text reports."""
    if isinstance(p, Const):
        return "true" if p.truth else "false"
    if isinstance(p, Cmp):
        return f"r {p.op} {p.value}"
    if isinstance(p, KeyEq):
        return f"key = {p.key}"
    if isinstance(p, And):
        return "(" + " and ".join(render(q) for q in p.items) + ")"
    if isinstance(p, Or):
        return "(" + " or ".join(render(q) for q in p.items) + ")"
    if isinstance(p, Not):
        return f"not {render(p.item)}"
    raise TypeError(f"not a predicate: {p!r}")
