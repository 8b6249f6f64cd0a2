"""Report dictionaries, their text rendering, and the commit-order figure."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional, Union

from .checker import Verdict
from .model import INIT, History, WrEdge, txn_graph_acyclic
from .serialize import event_str, validator

OracleNote = Optional[str]  # "agree" | "disagree" | "too_large"


def _edge(e: WrEdge) -> dict:
    return {"key": e.key, "from_event": event_str(e.write), "to_event": event_str(e.read)}


def verdict_report(
    verdict: Verdict,
    *,
    input: Optional[str] = None,
    engine: str = "checker",
    with_time: bool = False,
    oracle: OracleNote = None,
) -> dict:
    """Canonical report for one verdict.

    ``elapsed_ms`` is only included with ``with_time`` so that reports of
    the same input are byte-identical across runs.
    """
    out: dict[str, Any] = {"status": verdict.status.value, "engine": engine}
    if input is not None:
        out["input"] = input
    if verdict.consistent and verdict.commit_order is not None:
        out["witness"] = {
            "wr_added": [_edge(e) for e in verdict.wr_added],
            "commit_order": list(verdict.commit_order),
        }
    if verdict.violation is not None:
        out["violation"] = dict(verdict.violation)
    if verdict.conflicts:
        out["conflicts"] = [{"read": event_str(c.read), "key": c.key} for c in verdict.conflicts]
    if oracle is not None:
        out["oracle"] = oracle
        if oracle == "disagree":
            out["status"] = "error"
            out["error"] = "checker and oracle disagree"
    stats: dict[str, Any] = {
        "prefixes_explored": verdict.stats.prefixes_explored,
        "extensions_tried": verdict.stats.extensions_tried,
    }
    if with_time:
        stats["elapsed_ms"] = round(verdict.stats.elapsed_ms, 3)
    out["stats"] = stats
    return out


def error_report(message: str, *, input: Optional[str] = None) -> dict:
    out: dict[str, Any] = {"status": "error", "error": message}
    if input is not None:
        out["input"] = input
    out["stats"] = {"prefixes_explored": 0, "extensions_tried": 0}
    return out


def validate_report(report: dict) -> None:
    validator("report").validate(report)


def render_text(report: dict) -> str:
    lines = [f"{report.get('input', '-')}: {report['status']}"]
    w = report.get("witness")
    if w:
        lines.append("  commit order: " + " < ".join(w["commit_order"]))
        for e in w["wr_added"]:
            lines.append(f"  added wr[{e['key']}]: {e['from_event']} -> {e['to_event']}")
    v = report.get("violation")
    if v:
        if v["kind"] == "cycle":
            lines.append("  cycle: " + " -> ".join(v["cycle"]))
        elif v["kind"] == "empty_zero_set":
            lines.append(f"  no admissible source for {v['read']} on {v['key']}")
        else:
            lines.append(f"  no extension admits a commit order ({v['extensions']} tried)")
    for c in report.get("conflicts", []):
        lines.append(f"  conflict: {c['read']} on {c['key']}")
    if "oracle" in report:
        lines.append(f"  oracle: {report['oracle']}")
    if "error" in report:
        lines.append(f"  error: {report['error']}")
    s = report["stats"]
    tail = f"  prefixes={s['prefixes_explored']} extensions={s['extensions_tried']}"
    if "elapsed_ms" in s:
        tail += f" elapsed_ms={s['elapsed_ms']}"
    lines.append(tail)
    return "\n".join(lines) + "\n"


# -- figure ------------------------------------------------------------------


def _layout_order(h: History, verdict: Verdict) -> list[str]:
    """Commit order when there is one, otherwise some so ∪ wr linearization."""
    if verdict.commit_order:
        return list(verdict.commit_order)
    ix = h.index
    if not txn_graph_acyclic(ix.n, ix.sowr_pred):
        return list(ix.ids)
    placed, order = 0, []
    while len(order) < ix.n:
        for i in range(ix.n):
            if not placed >> i & 1 and ix.sowr_pred[i] & ~placed == 0:
                order.append(ix.ids[i])
                placed |= 1 << i
                break
    return order


def render_figure(h: History, verdict: Verdict, path: Union[str, Path], title: Optional[str] = None) -> Path:
    """Draw transactions on session lanes along the commit order.

    Recorded wr edges are solid, edges added by the witness dashed and a
    violating cycle is drawn in red.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    order = _layout_order(h, verdict)
    xpos = {t: i for i, t in enumerate(order)}
    lane = {INIT: 0}
    for si, s in enumerate(h.sessions, start=1):
        for t in s.transactions:
            lane[t.id] = si
    iso = {t.id: t.iso.value for t in h.transactions}

    fig, ax = plt.subplots(figsize=(1.4 + 1.1 * len(order), 1.2 + 0.9 * len(h.sessions)))
    for t in order:
        ax.annotate(
            f"{t}\n{iso[t]}" if t != INIT else t,
            (xpos[t], lane[t]),
            ha="center",
            va="center",
            fontsize=8,
            bbox=dict(boxstyle="round,pad=0.3", fc="white", ec="0.3"),
            zorder=3,
        )

    def arrow(a: str, b: str, **style) -> None:
        ax.annotate(
            "",
            xy=(xpos[b], lane[b]),
            xytext=(xpos[a], lane[a]),
            arrowprops=dict(arrowstyle="->", shrinkA=14, shrinkB=14, **style),
            zorder=2,
        )

    for s in h.sessions:
        ts = [t.id for t in s.transactions]
        for a, b in zip(ts, ts[1:]):
            arrow(a, b, color="0.6")
    added = set(verdict.wr_added)
    edges = list(h.wr) + sorted(added, key=lambda e: (e.read, e.key))
    seen = set()
    for e in edges:
        a, b = e.write[0], e.read[0]
        if a == b or (a, b, e in added) in seen:
            continue
        seen.add((a, b, e in added))
        dashed = e in added
        arrow(
            a,
            b,
            color="tab:orange" if dashed else "tab:blue",
            linestyle="--" if dashed else "-",
            connectionstyle="arc3,rad=0.25",
        )
    v = verdict.violation or {}
    if v.get("kind") == "cycle":
        cyc = v["cycle"]
        for a, b in zip(cyc, cyc[1:]):
            if a in xpos and b in xpos and a != b:
                arrow(a, b, color="tab:red", lw=1.6, connectionstyle="arc3,rad=-0.3")

    from matplotlib.lines import Line2D

    legend = [
        Line2D([], [], color="0.6", label="so"),
        Line2D([], [], color="tab:blue", label="wr"),
        Line2D([], [], color="tab:orange", linestyle="--", label="wr (added)"),
    ]
    if v.get("kind") == "cycle":
        legend.append(Line2D([], [], color="tab:red", label="cycle"))
    ax.legend(handles=legend, loc="lower right", fontsize=7, frameon=False)
    ax.set_yticks(range(len(h.sessions) + 1))
    ax.set_yticklabels(["init"] + [s.id for s in h.sessions])
    ax.set_xticks(range(len(order)))
    ax.set_xticklabels([str(i) for i in range(len(order))])
    ax.set_xlabel("commit order position" if verdict.commit_order else "so ∪ wr order")
    ax.set_xlim(-0.7, len(order) - 0.3)
    ax.set_ylim(len(h.sessions) + 0.6, -0.6)
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    ax.set_title(title or verdict.status.value, fontsize=10)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
