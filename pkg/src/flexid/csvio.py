"""Deterministic CSV writers.

All floats are rendered with 17 significant digits so identical inputs
produce byte-identical files; rows end with a plain newline and the
file carries a trailing newline.  Text columns (the prompt) use
RFC-style quoting via the csv module.
"""

from __future__ import annotations

import csv
import io
from typing import Iterable

from .gating import ScheduleSample
from .pipeline import GenerationTrace

SCHEDULE_COLUMNS = ("step", "t_hat", "indicator", "gamma_sem", "gamma_vis",
                    "T_sem", "T_vis", "alpha_final", "w_final")

TRACE_COLUMNS = SCHEDULE_COLUMNS + ("v_uncond_norm", "v_cond_norm", "v_guided_norm")

REPORT_COLUMNS = ("record_kind", "config_id", "prompt", "seed",
                  "id_sim", "attr_adherence", "error")


def fmt(value) -> str:
    """Render a cell: floats at 17 significant digits, ints plainly."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _render(rows: Iterable[Iterable], header: Iterable[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([fmt(cell) for cell in row])
    return buf.getvalue()


def schedule_rows(schedule: list[ScheduleSample]):
    for ss in schedule:
        yield (ss.step, ss.t_hat, ss.indicator, ss.gamma_sem, ss.gamma_vis,
               ss.T_sem, ss.T_vis, ss.alpha_final, ss.w_final)


def schedule_csv(schedule: list[ScheduleSample]) -> str:
    return _render(schedule_rows(schedule), SCHEDULE_COLUMNS)


def trace_csv(trace: GenerationTrace) -> str:
    def rows():
        for ss, rec in zip(trace.schedule, trace.records):
            yield (ss.step, ss.t_hat, ss.indicator, ss.gamma_sem, ss.gamma_vis,
                   ss.T_sem, ss.T_vis, ss.alpha_final, ss.w_final,
                   rec.v_uncond_norm, rec.v_cond_norm, rec.v_guided_norm)

    return _render(rows(), TRACE_COLUMNS)


def write_text(text: str, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def export_csv(obj, path) -> None:
    """Write a schedule, trace or report to ``path`` deterministically."""
    from .sweep import EvalReport, report_csv

    if isinstance(obj, GenerationTrace):
        text = trace_csv(obj)
    elif isinstance(obj, EvalReport):
        text = report_csv(obj)
    elif isinstance(obj, list) and (not obj or isinstance(obj[0], ScheduleSample)):
        text = schedule_csv(obj)
    else:
        raise TypeError(f"cannot export object of type {type(obj).__name__}")
    write_text(text, path)
