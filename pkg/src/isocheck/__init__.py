"""Consistency checking for transactional histories with SQL-style queries
and a possibly different isolation level per transaction."""

from .checker import InvalidHistory, Status, Verdict, check_consistency
from .model import History, IsolationLevel, TransactionLog, WrEdge, is_full, validate
from .oracle import OracleTooLarge, brute_force_check
from .saturation import check_saturable, saturate, saturate_fixpoint
from .serialize import FormatError, history_from_json, history_to_json, load_history

__all__ = [
    "FormatError",
    "History",
    "InvalidHistory",
    "IsolationLevel",
    "OracleTooLarge",
    "Status",
    "TransactionLog",
    "Verdict",
    "WrEdge",
    "brute_force_check",
    "check_consistency",
    "check_saturable",
    "history_from_json",
    "history_to_json",
    "is_full",
    "load_history",
    "saturate",
    "saturate_fixpoint",
    "validate",
]
