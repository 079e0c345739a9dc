"""Plain report tables written as CSV and Markdown."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .data import format_value

# regression-table cut-offs: *p<0.1; **p<0.05; ***p<0.01
REGRESSION_STARS = ((0.01, "***"), (0.05, "**"), (0.1, "*"))


def stars(p, thresholds=REGRESSION_STARS) -> str:
    if p is None or not math.isfinite(p):
        return ""
    for cut, mark in thresholds:
        if p < cut:
            return mark
    return ""


def _fmt(v, digits: int) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if not math.isfinite(v):
            return ""
        return f"{v:.{digits}g}" if abs(v) >= 1e-4 or v == 0 else f"{v:.2e}"
    return str(v)


def coef_cell(beta: float, se: float, p: float, digits: int = 3) -> str:
    """``0.076* (0.04)`` style entry."""
    return f"{beta:.{digits}f}{stars(p)} ({se:.{digits}f})"


@dataclass
class Table:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    title: str = ""
    note: str = ""

    def add(self, row) -> None:
        if isinstance(row, dict):
            row = [row.get(c, "") for c in self.columns]
        if len(row) != len(self.columns):
            raise ValueError(f"{self.name}: row has {len(row)} cells, expected {len(self.columns)}")
        self.rows.append(list(row))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([format_value(v) if isinstance(v, float) else ("" if v is None else v) for v in r])
        return buf.getvalue()

    def to_markdown(self, digits: int = 4) -> str:
        lines = []
        if self.title:
            lines += [f"### {self.title}", ""]
        lines.append("| " + " | ".join(str(c) for c in self.columns) + " |")
        lines.append("|" + "|".join("---" for _ in self.columns) + "|")
        for r in self.rows:
            lines.append("| " + " | ".join(_fmt(v, digits) for v in r) + " |")
        if self.note:
            lines += ["", self.note]
        return "\n".join(lines) + "\n"

    def write(self, directory, markdown: bool = True) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        out = [directory / f"{self.name}.csv"]
        out[0].write_text(self.to_csv(), encoding="utf-8")
        if markdown:
            md = directory / f"{self.name}.md"
            md.write_text(self.to_markdown(), encoding="utf-8")
            out.append(md)
        return out


def read_csv_rows(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
