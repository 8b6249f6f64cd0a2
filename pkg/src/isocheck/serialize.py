"""JSON encodings of histories, programs and reports.

Files are canonical: sorted object keys, two-space indent, trailing newline.
Event ids are written as ``"<txn>:<position>"`` where position 0 is the
implicit begin event, so the first body event of a transaction is ``t:1``.
"""

from __future__ import annotations

import json
import os
import tempfile
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Any, Union

import jsonschema

from . import predicate as pred
from .model import (
    Abort,
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
)

if TYPE_CHECKING:
    from .opsem import Program


class FormatError(ValueError):
    """Input that cannot be turned into a history or program."""


@lru_cache(maxsize=None)
def schema(name: str) -> dict:
    text = resources.files("isocheck").joinpath("data", f"{name}.schema.json").read_text()
    return json.loads(text)


@lru_cache(maxsize=None)
def validator(name: str) -> jsonschema.protocols.Validator:
    sch = schema(name)
    cls = jsonschema.validators.validator_for(sch)
    cls.check_schema(sch)
    return cls(sch)


def event_str(e: EventId) -> str:
    return f"{e[0]}:{e[1]}"


def parse_event_id(s: str) -> EventId:
    txn, sep, p = s.rpartition(":")
    if not sep or not txn or not p.isdigit():
        raise FormatError(f"malformed event id {s!r}")
    return txn, int(p)


# -- events --------------------------------------------------------------------


def op_to_json(op: Op) -> dict:
    if isinstance(op, Select):
        return {"op": "select", "where": pred.to_json(op.where)}
    if isinstance(op, Insert):
        return {"op": "insert", "rows": {k: v for k, v in op.rows}}
    if isinstance(op, Delete):
        return {"op": "delete", "where": pred.to_json(op.where)}
    if isinstance(op, Update):
        return {"op": "update", "where": pred.to_json(op.where), "set": dict(op.set)}
    if isinstance(op, Abort):
        return {"op": "abort"}
    raise TypeError(f"not a body event: {op!r}")


def op_from_json(obj: Any) -> Op:
    kind = obj.get("op")
    try:
        if kind == "select":
            return Select(pred.from_json(obj["where"]))
        if kind == "insert":
            return Insert(obj["rows"])
        if kind == "delete":
            return Delete(pred.from_json(obj["where"]))
        if kind == "update":
            return Update(pred.from_json(obj["where"]), obj["set"])
        if kind == "abort":
            return Abort()
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad {kind} event: {exc}") from None
    raise FormatError(f"unknown event kind {kind!r}")


def _initial_to_json(h: History) -> dict:
    return {k: ("absent" if v is None else v) for k, v in h.initial}


def _initial_from_json(obj: dict, keys: list[str]) -> dict:
    out = {}
    for k in keys:
        v = obj.get(k, "absent")
        out[k] = None if v == "absent" else v
    extra = set(obj) - set(keys)
    if extra:
        raise FormatError(f"initial_state names undeclared keys {sorted(extra)}")
    return out


# -- histories -----------------------------------------------------------------


def history_to_json(h: History) -> dict:
    sessions = []
    for s in h.sessions:
        txns = []
        for t in s.transactions:
            txns.append(
                {
                    "id": t.id,
                    "iso": t.iso.value,
                    "status": t.status.value,
                    "events": [op_to_json(e) for e in t.events[1:-1]],
                }
            )
        sessions.append({"id": s.id, "transactions": txns})
    return {
        "kind": "history",
        "keys": list(h.keys),
        "initial_state": _initial_to_json(h),
        "sessions": sessions,
        "wr": [
            {"key": e.key, "from_event": event_str(e.write), "to_event": event_str(e.read)}
            for e in h.wr
        ],
    }


def _validate_schema(obj: Any, name: str) -> None:
    try:
        validator(name).validate(obj)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise FormatError(f"{where}: {exc.message}") from None


def history_from_json(obj: Any) -> History:
    _validate_schema(obj, "history")
    keys = list(obj["keys"])
    initial = _initial_from_json(obj.get("initial_state", {}), keys)
    sessions = []
    for s in obj["sessions"]:
        txns = []
        for t in s["transactions"]:
            if t.get("status") == "pending":
                raise FormatError(f"{t['id']}: pending transactions are not supported, histories must be complete")
            body = [op_from_json(e) for e in t["events"]]
            aborted = t.get("status", "committed") == Status.ABORTED.value
            if body and isinstance(body[-1], Abort):
                if not aborted:
                    raise FormatError(f"{t['id']}: abort event in a committed transaction")
                body = body[:-1]
            if any(isinstance(e, Abort) for e in body):
                raise FormatError(f"{t['id']}: abort must be the last event")
            txns.append(TransactionLog.of(t["id"], t["iso"], body, aborted=aborted))
        sessions.append((s["id"], txns))
    wr = [
        WrEdge(e["key"], parse_event_id(e["from_event"]), parse_event_id(e["to_event"]))
        for e in obj.get("wr", [])
    ]
    return History.make(keys, initial, sessions, wr)


# -- programs ------------------------------------------------------------------


def program_to_json(p: "Program") -> dict:
    return {
        "kind": "program",
        "keys": list(p.keys),
        "initial_state": {k: ("absent" if v is None else v) for k, v in p.initial.items()},
        "sessions": [
            {
                "id": sid,
                "transactions": [
                    {
                        "id": body.id,
                        "iso": body.iso.value,
                        "events": [op_to_json(op) for op in body.instrs],
                    }
                    for body in bodies
                ],
            }
            for sid, bodies in p.sessions
        ],
    }


def program_from_json(obj: Any) -> "Program":
    from .opsem import Program, TxnBody

    _validate_schema(obj, "program")
    keys = list(obj["keys"])
    initial = _initial_from_json(obj.get("initial_state", {}), keys)
    sessions = []
    for s in obj["sessions"]:
        bodies = [
            TxnBody(t["id"], IsolationLevel(t["iso"]), tuple(op_from_json(e) for e in t["events"]))
            for t in s["transactions"]
        ]
        sessions.append((s["id"], tuple(bodies)))
    return Program(tuple(keys), initial, tuple(sessions))


# -- files ---------------------------------------------------------------------


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def dumps_line(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def loads_document(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_history(path: Union[str, Path]) -> History:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"not UTF-8 text (byte {exc.start})") from None
    obj = loads_document(text)
    if not isinstance(obj, dict) or obj.get("kind") != "history":
        raise FormatError("expected a document with kind \"history\"")
    return history_from_json(obj)


def write_atomic(path: Union[str, Path], text: Union[str, bytes]) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(text.encode("utf-8") if isinstance(text, str) else text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_history(path: Union[str, Path], h: History) -> None:
    write_atomic(path, dumps(history_to_json(h)))
