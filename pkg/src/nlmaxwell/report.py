"""Plain-text run reports.

A report is a ``key: value`` file holding every :class:`SolverReport` field
plus the echoed run configuration, and a CSV with one row per iteration.
Floats are written with ``repr`` so that parsing a report gives back the
exact doubles.  Wall-clock times are deliberately left out: two runs of the
same configuration produce byte-identical reports.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import fields
from pathlib import Path

from .solver import SolverReport

REPORT_NAME = "report.txt"
TRACE_NAME = "energy_trace.csv"
CONFIG_PREFIX = "config."


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, dict):
        return "; ".join(f"{k}={_fmt(x)}" for k, x in sorted(v.items()))
    return str(v)


def format_report(rep: SolverReport, config_echo: str = "") -> str:
    lines = []
    for f in fields(SolverReport):
        if f.name in ("energy_trace", "residual_trace"):
            continue
        lines.append(f"{f.name}: {_fmt(getattr(rep, f.name))}")
    lines.append(f"energy_trace_length: {len(rep.energy_trace)}")
    lines.append(f"energy_trace_file: {TRACE_NAME}")
    lines.append(f"status: {'CONVERGED' if rep.converged else 'FAILED'}")
    for row in config_echo.splitlines():
        if row.strip():
            key, value = (s.strip() for s in row.split("=", 1))
            lines.append(f"{CONFIG_PREFIX}{key}: {value}")
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(f"{path.name}.tmp{os.getpid()}")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_trace(rep: SolverReport, path) -> None:
    path = Path(path)
    tmp = path.with_name(f"{path.name}.tmp{os.getpid()}")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "reduced_energy", "dual_residual"])
        res = list(rep.residual_trace)
        for i, e in enumerate(rep.energy_trace):
            r = res[i] if i < len(res) else math.nan
            w.writerow([i, repr(float(e)), repr(float(r))])
    os.replace(tmp, path)


def write_report(rep: SolverReport, out_dir, config_echo: str = "") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / REPORT_NAME
    _atomic_write(path, format_report(rep, config_echo))
    write_trace(rep, out / TRACE_NAME)
    return path


def parse_report(text: str) -> dict[str, str]:
    """``key: value`` lines to a dict of raw strings."""
    out = {}
    for row in text.splitlines():
        if ": " in row:
            key, value = row.split(": ", 1)
            out[key] = value
    return out


def config_from_report(text: str) -> str:
    """Recover the echoed configuration as a ``key = value`` document."""
    rows = [
        f"{k[len(CONFIG_PREFIX):]} = {v}"
        for k, v in parse_report(text).items()
        if k.startswith(CONFIG_PREFIX)
    ]
    return "\n".join(rows) + "\n"
