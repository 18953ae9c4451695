"""Run-log post-processing: text summaries and SVG plots of HI vs bound."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError


@dataclass
class RunTable:
    """A parsed run-log CSV, column-oriented."""

    sensor_ids: list[str]
    t: list[int]
    phase: list[str]
    hi: dict[str, list[float | None]]
    over: dict[str, list[bool]]
    bounds: dict[str, float | None]
    joint_hi: list[float | None]
    joint_over: list[bool]
    joint_bound: float | None
    triggers: list[list[str]] = field(default_factory=list)


def load_runlog(path) -> RunTable:
    """Parse a run-log CSV produced by RunLog.write_csv."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty run log") from None
        rows = list(reader)

    expected_tail = ["joint_hi", "joint_bound", "joint_over", "alarm_triggers"]
    if header[:2] != ["t", "phase"] or header[-4:] != expected_tail:
        raise ParseError(f"{path}: unrecognized run-log header")
    sensor_cols = header[2:-4]
    if len(sensor_cols) % 3 != 0:
        raise ParseError(f"{path}: malformed sensor columns")
    sensor_ids = [c[:-3] for c in sensor_cols[0::3]]
    for i, sid in enumerate(sensor_ids):
        if sensor_cols[3 * i:3 * i + 3] != [f"{sid}_hi", f"{sid}_bound", f"{sid}_over"]:
            raise ParseError(f"{path}: malformed columns for sensor {sid!r}")

    table = RunTable(sensor_ids=sensor_ids, t=[], phase=[],
                     hi={sid: [] for sid in sensor_ids},
                     over={sid: [] for sid in sensor_ids},
                     bounds={sid: None for sid in sensor_ids},
                     joint_hi=[], joint_over=[], joint_bound=None)
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(f"{path} line {lineno}: expected {len(header)} fields, "
                             f"got {len(row)}")
        try:
            table.t.append(int(row[0]))
            table.phase.append(row[1])
            for i, sid in enumerate(sensor_ids):
                hi_s, bound_s, over_s = row[2 + 3 * i:5 + 3 * i]
                table.hi[sid].append(float(hi_s) if hi_s else None)
                table.over[sid].append(over_s == "1")
                if bound_s:
                    table.bounds[sid] = float(bound_s)
            jhi, jbound, jover = row[-4], row[-3], row[-2]
            table.joint_hi.append(float(jhi) if jhi else None)
            table.joint_over.append(jover == "1")
            if jbound:
                table.joint_bound = float(jbound)
            table.triggers.append(row[-1].split(";") if row[-1] else [])
        except ValueError as exc:
            raise ParseError(f"{path} line {lineno}: bad value ({exc})") from None
    return table


def _first_true(ts: list[int], flags: list[bool]) -> int | None:
    for t, flag in zip(ts, flags):
        if flag:
            return t
    return None


def _spans(ts: list[int], flags: list[bool]) -> list[tuple[int, int]]:
    spans = []
    start = None
    prev_t = None
    for t, flag in zip(ts, flags):
        if flag:
            if start is None:
                start = t
            prev_t = t
        elif start is not None:
            spans.append((start, prev_t))
            start = None
    if start is not None:
        spans.append((start, prev_t))
    return spans


def summarize(table: RunTable) -> dict:
    """First crossings, alarm spans, and burn-in extent from a run table."""
    burn_in_ts = [t for t, ph in zip(table.t, table.phase) if ph == "burn_in"]
    alarm_flags = [bool(trig) for trig in table.triggers]
    summary = {
        "burn_in_end": max(burn_in_ts) if burn_in_ts else None,
        "steps": len(table.t),
        "first_crossing": {sid: _first_true(table.t, table.over[sid])
                           for sid in table.sensor_ids},
        "joint_first_crossing": _first_true(table.t, table.joint_over),
        "first_alarm": _first_true(table.t, alarm_flags),
        "alarm_spans": _spans(table.t, alarm_flags),
        "bounds": dict(table.bounds),
        "joint_bound": table.joint_bound,
    }
    return summary


def format_summary(summary: dict) -> str:
    lines = [f"steps: {summary['steps']}",
             f"burn-in ends at t={summary['burn_in_end']}"]
    for sid, t in summary["first_crossing"].items():
        bound = summary["bounds"].get(sid)
        bound_s = f"{bound:.6g}" if bound is not None else "n/a"
        lines.append(f"sensor {sid}: bound={bound_s}, "
                     f"first crossing {'t=%d' % t if t is not None else 'never'}")
    jb = summary["joint_bound"]
    jt = summary["joint_first_crossing"]
    lines.append(f"joint: bound={jb:.6g}" if jb is not None else "joint: bound=n/a")
    lines.append(f"joint first crossing: {'t=%d' % jt if jt is not None else 'never'}")
    if summary["alarm_spans"]:
        spans = ", ".join(f"{a}..{b}" for a, b in summary["alarm_spans"])
        lines.append(f"first alarm: t={summary['first_alarm']}")
        lines.append(f"alarm spans: {spans}")
    else:
        lines.append("no alarms")
    return "\n".join(lines)


def write_plots(table: RunTable, out_dir, fmt: str = "svg") -> list[Path]:
    """One plot per sensor plus the joint HI: HI trace, red bound line,
    green burn-in end line, orange alarm shading."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(table)
    burn_in_end = summary["burn_in_end"]
    alarm_spans = summary["alarm_spans"]
    written = []

    def render(name: str, values: list[float | None], bound: float | None):
        fig, ax = plt.subplots(figsize=(8, 3))
        ts = [t for t, v in zip(table.t, values) if v is not None]
        vs = [v for v in values if v is not None]
        ax.plot(ts, vs, lw=1.0, label="HI")
        if bound is not None:
            ax.axhline(bound, color="red", lw=1.0, label="bound")
        if burn_in_end is not None:
            ax.axvline(burn_in_end, color="green", lw=1.0, label="burn-in end")
        for a, b in alarm_spans:
            ax.axvspan(a, b, color="orange", alpha=0.3)
        ax.set_xlabel("t")
        ax.set_ylabel("HI")
        ax.set_title(name)
        ax.legend(loc="upper left", fontsize=8)
        path = out / f"{name}.{fmt}"
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    for sid in table.sensor_ids:
        render(sid, table.hi[sid], table.bounds.get(sid))
    render("joint", table.joint_hi, table.joint_bound)
    return written
