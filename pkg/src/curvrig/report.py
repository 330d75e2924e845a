"""Delimited run report: one row per scenario, wide quantity columns.

Columns are `scenario`, the sorted union of every quantity name any row
reports, then `verdict`.  Quantities render with 17 significant digits so
repeat runs compare byte for byte; cells a row does not report stay empty.
Timing never enters the report.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

__all__ = ["ReportRow", "render_report", "write_report", "has_nan"]


@dataclass
class ReportRow:
    scenario: str
    verdict: str
    quantities: dict = field(default_factory=dict)


def has_nan(rows) -> bool:
    return any(
        not math.isfinite(v) for row in rows for v in row.quantities.values()
    )


def render_report(rows) -> str:
    rows = sorted(rows, key=lambda r: r.scenario)
    names = sorted({name for row in rows for name in row.quantities})
    buf = io.StringIO()
    buf.write(",".join(["scenario"] + names + ["verdict"]) + "\n")
    for row in rows:
        cells = [row.scenario]
        for name in names:
            if name in row.quantities:
                cells.append(format(float(row.quantities[name]), ".17g"))
            else:
                cells.append("")
        cells.append(row.verdict)
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def write_report(rows, path) -> None:
    text = render_report(rows)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
