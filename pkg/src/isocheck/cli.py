"""``isocheck`` command line: check, generate, oracle.

Reports go to stdout, one JSON object per line and per input, in input
order.  Exit codes: 0 all consistent, 1 some inconsistent, 2 input or
usage error, 3 some unknown (or oracle budget exceeded).  When several
apply the most severe wins: 2, then 1, then 3.
"""

from __future__ import annotations

import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click

from .checker import InvalidHistory, check_consistency
from .model import IsolationLevel
from .opsem import GENERATED_LEVELS, random_program, run_to_history
from .oracle import OracleTooLarge, brute_force_check
from .report import error_report, render_figure, render_text, verdict_report
from .serialize import FormatError, dumps, dumps_line, history_to_json, load_history, program_to_json, write_atomic

log = logging.getLogger("isocheck")

EXIT_OK, EXIT_INCONSISTENT, EXIT_ERROR, EXIT_UNKNOWN = 0, 1, 2, 3
_SEVERITY = {EXIT_OK: 0, EXIT_UNKNOWN: 1, EXIT_INCONSISTENT: 2, EXIT_ERROR: 3}
_STATUS_CODE = {"consistent": EXIT_OK, "inconsistent": EXIT_INCONSISTENT, "unknown": EXIT_UNKNOWN, "error": EXIT_ERROR}


def worst(codes) -> int:
    return max(codes, key=_SEVERITY.__getitem__, default=EXIT_OK)


def _setup_logging() -> None:
    level = os.environ.get("ISOCHECK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


@dataclass(frozen=True)
class CheckTask:
    path: str
    oracle: bool
    max_extensions: Optional[int]
    with_time: bool
    mode: str
    report_base: Optional[str]  # path prefix for .report.json / .png


def check_one(task: CheckTask) -> dict:
    """Check a single file; never raises for bad input."""
    try:
        h = load_history(task.path)
        verdict = check_consistency(h, max_extensions=task.max_extensions, mode=task.mode)
    except (FormatError, InvalidHistory) as exc:
        log.warning("%s: %s", task.path, exc)
        return error_report(str(exc), input=task.path)
    except OSError as exc:
        return error_report(f"cannot read input: {exc.strerror or exc}", input=task.path)
    note = None
    if task.oracle:
        try:
            ov = brute_force_check(h)
            note = "agree" if ov.status is verdict.status else "disagree"
        except OracleTooLarge:
            note = "too_large"
    report = verdict_report(verdict, input=task.path, with_time=task.with_time, oracle=note)
    log.info("%s: %s", task.path, report["status"])
    if task.report_base:
        write_atomic(task.report_base + ".report.json", dumps(report))
        render_figure(h, verdict, task.report_base + ".png", title=f"{Path(task.path).name}: {report['status']}")
    return report


def _report_bases(paths: list[str], out: Path) -> list[str]:
    bases, used = [], set()
    for p in paths:
        stem = Path(p).stem
        name, n = stem, 1
        while name in used:
            n += 1
            name = f"{stem}-{n}"
        used.add(name)
        bases.append(str(out / name))
    return bases


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main() -> None:
    """Check transactional histories against per-transaction isolation levels."""
    _setup_logging()


@main.command()
@click.argument("paths", nargs=-1, required=True)
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json", show_default=True)
@click.option("--oracle", is_flag=True, help="Cross-check every verdict with the brute-force oracle.")
@click.option("--max-extensions", type=click.IntRange(min=1), default=None, help="Give up (unknown) after this many extensions.")
@click.option("--jobs", "-j", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--stats", "with_time", is_flag=True, help="Include elapsed time in reports.")
@click.option("--mode", type=click.Choice(["exact", "literal"]), default="exact", hidden=True)
@click.option("--report-dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Also write per-input report JSON and a commit-order figure here.")
def check(paths, fmt, oracle, max_extensions, jobs, with_time, mode, report_dir) -> None:
    """Check each history file and print one report per input."""
    bases: list[Optional[str]] = [None] * len(paths)
    if report_dir is not None:
        try:
            report_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise click.ClickException(f"cannot create {report_dir}: {exc.strerror}") from None
        bases = _report_bases(list(paths), report_dir)
    tasks = [CheckTask(p, oracle, max_extensions, with_time, mode, b) for p, b in zip(paths, bases)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(check_one, tasks))
    else:
        reports = [check_one(t) for t in tasks]
    for r in reports:
        click.echo(dumps_line(r) if fmt == "json" else render_text(r), nl=fmt == "json")
    sys.exit(worst(_STATUS_CODE[r["status"]] for r in reports))


def parse_mix(text: str) -> object:
    """"mixed", a single level, or weights like "SER:1,RC:3"."""
    if text == "mixed":
        return text
    try:
        if ":" not in text:
            lvl = IsolationLevel(text.upper())
            if lvl not in GENERATED_LEVELS:
                raise ValueError
            return lvl
        out = {}
        for part in text.split(","):
            name, w = part.split(":")
            lvl = IsolationLevel(name.strip().upper())
            if lvl not in GENERATED_LEVELS or float(w) < 0:
                raise ValueError
            out[lvl] = float(w)
        if not sum(out.values()) > 0:
            raise ValueError
        return out
    except ValueError:
        raise click.BadParameter("use mixed, one of SER/SI/RC, or weights like SER:1,RC:3") from None


@main.command()
@click.option("--sessions", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--txns", type=click.IntRange(min=1), default=10, show_default=True, help="Transactions per session.")
@click.option("--keys", type=click.IntRange(min=1), default=4, show_default=True)
@click.option("--iso", "iso_mix", default="mixed", show_default=True, help="mixed, SER, SI, RC or weights like SER:1,RC:3.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--read-ratio", type=click.FloatRange(0, 1), default=0.5, show_default=True)
@click.option("--programs", is_flag=True, help="Also save the generated programs.")
@click.option("-o", "--out", "out", type=click.Path(file_okay=False, path_type=Path), required=True)
def generate(sessions, txns, keys, iso_mix, seed, count, read_ratio, programs, out) -> None:
    """Write COUNT histories produced by running random programs."""
    mix = parse_mix(iso_mix)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            s = seed + i
            prog = random_program(sessions, txns, keys, mix, s, read_ratio=read_ratio)
            h = run_to_history(prog, s)
            write_atomic(out / f"history-{s:06d}.json", dumps(history_to_json(h)))
            if programs:
                write_atomic(out / f"program-{s:06d}.json", dumps(program_to_json(prog)))
    except OSError as exc:
        click.echo(f"error: cannot write to {out}: {exc.strerror or exc}", err=True)
        sys.exit(EXIT_ERROR)
    click.echo(f"wrote {count} histories to {out}", err=True)


@main.command("oracle")
@click.argument("path")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json", show_default=True)
def oracle_cmd(path, fmt) -> None:
    """Decide PATH by exhaustive enumeration (small histories only)."""
    try:
        h = load_history(path)
        verdict = brute_force_check(h)
    except (FormatError, InvalidHistory) as exc:
        report = error_report(str(exc), input=path)
    except OSError as exc:
        report = error_report(f"cannot read input: {exc.strerror or exc}", input=path)
    except OracleTooLarge as exc:
        click.echo(f"error: too large: {exc}", err=True)
        sys.exit(EXIT_UNKNOWN)
    else:
        report = verdict_report(verdict, input=path, engine="oracle")
    click.echo(dumps_line(report) if fmt == "json" else render_text(report), nl=fmt == "json")
    sys.exit(_STATUS_CODE[report["status"]])


if __name__ == "__main__":  # pragma: no cover
    main()
