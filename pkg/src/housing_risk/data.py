"""Monthly series containers, CSV ingestion and descriptive statistics."""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import (
    DateMisalignment,
    GapInDates,
    MissingValue,
    NonPositiveValue,
    ParseError,
    SchemaMismatch,
    TooShort,
    ZeroVariance,
)

MONTH = "datetime64[M]"
_DATE_RE = re.compile(r"^(\d{4})-(\d{2})(?:-(\d{2}))?")
_MISSING_TOKENS = {"", "na", "nan", "n/a", "null", "none", "."}


def _frozen(a, dtype=None):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def parse_month(text: str) -> np.datetime64:
    """Parse ``YYYY-MM`` or ``YYYY-MM-DD`` (day validated, then dropped)."""
    m = _DATE_RE.match(text.strip())
    if m is None:
        raise ValueError(f"not an ISO year-month: {text!r}")
    year, month = int(m.group(1)), int(m.group(2))
    day = int(m.group(3)) if m.group(3) else 1
    date(year, month, day)  # raises ValueError on impossible dates
    return np.datetime64(f"{year:04d}-{month:02d}", "M")


def month_range(start, n: int) -> np.ndarray:
    start = np.datetime64(start, "M")
    return start + np.arange(n)


def month_iso(m) -> str:
    return str(np.datetime64(m, "M"))


def month_label(m) -> str:
    """Break-date style label, e.g. ``2009:M4``."""
    y, mo = month_iso(m).split("-")
    return f"{y}:M{int(mo)}"


def month_span_label(m) -> str:
    """Sub-sample label style, e.g. ``1971M1``."""
    y, mo = month_iso(m).split("-")
    return f"{y}M{int(mo)}"


def _check_axis(dates: np.ndarray) -> None:
    if dates.size > 1:
        steps = np.diff(dates).astype(int)
        bad = np.flatnonzero(steps != 1)
        if bad.size:
            raise GapInDates(month_iso(dates[bad[0] + 1]))


@dataclass(frozen=True)
class TimeSeries:
    """A gap-free monthly series of finite values."""

    id: str
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        dates = _frozen(self.dates, MONTH)
        values = _frozen(self.values, float)
        if dates.ndim != 1 or values.shape != dates.shape:
            raise SchemaMismatch(f"{self.id}: dates and values must be 1-d of equal length")
        if dates.size < 1:
            raise TooShort(f"{self.id}: empty series")
        if not np.all(np.isfinite(values)):
            raise MissingValue(int(np.flatnonzero(~np.isfinite(values))[0]), self.id)
        _check_axis(dates)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @property
    def start(self):
        return self.dates[0]

    @property
    def end(self):
        return self.dates[-1]

    def renamed(self, new_id: str) -> "TimeSeries":
        return TimeSeries(new_id, self.dates, self.values)

    def window(self, start=None, end=None) -> "TimeSeries":
        """Inclusive date window."""
        mask = np.ones(len(self), bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start, "M")
        if end is not None:
            mask &= self.dates <= np.datetime64(end, "M")
        if not mask.any():
            raise TooShort(f"{self.id}: window [{start}, {end}] is empty")
        return TimeSeries(self.id, self.dates[mask], self.values[mask])

    def shift(self, months: int) -> "TimeSeries":
        """Relabel so that the value observed at t is stamped t + months."""
        return TimeSeries(self.id, self.dates + months, self.values)


@dataclass(frozen=True)
class Panel:
    """Ordered columns sharing one monthly date axis."""

    columns: tuple

    def __post_init__(self):
        cols = tuple(self.columns)
        if cols:
            ids = [c.id for c in cols]
            if len(set(ids)) != len(ids):
                raise SchemaMismatch(f"duplicate column ids: {ids}")
            axis = cols[0].dates
            for c in cols[1:]:
                if c.dates.shape != axis.shape or not np.array_equal(c.dates, axis):
                    raise DateMisalignment(f"column {c.id!r} is not on the panel date axis")
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_array(cls, ids: Sequence[str], dates, matrix) -> "Panel":
        matrix = np.asarray(matrix, float)
        if matrix.ndim == 1:
            matrix = matrix[:, None]
        if matrix.shape[1] != len(ids):
            raise SchemaMismatch("column count does not match ids")
        return cls(tuple(TimeSeries(i, dates, matrix[:, k]) for k, i in enumerate(ids)))

    @property
    def ids(self) -> list[str]:
        return [c.id for c in self.columns]

    @property
    def dates(self) -> np.ndarray:
        if not self.columns:
            return np.array([], MONTH)
        return self.columns[0].dates

    @property
    def n(self) -> int:
        return len(self.dates)

    @property
    def k(self) -> int:
        return len(self.columns)

    def __len__(self):
        return self.n

    def __getitem__(self, key: str) -> TimeSeries:
        for c in self.columns:
            if c.id == key:
                return c
        raise KeyError(key)

    def __contains__(self, key):
        return key in self.ids

    def to_array(self) -> np.ndarray:
        if not self.columns:
            return np.empty((0, 0))
        return np.column_stack([c.values for c in self.columns])

    def select(self, ids: Iterable[str]) -> "Panel":
        missing = [i for i in ids if i not in self.ids]
        if missing:
            raise SchemaMismatch(f"columns not in panel: {missing}")
        return Panel(tuple(self[i] for i in ids))

    def window(self, start=None, end=None) -> "Panel":
        return Panel(tuple(c.window(start, end) for c in self.columns))


def align(series: Sequence[TimeSeries]) -> Panel:
    """Intersect date axes; the common range must itself be gap-free."""
    if not series:
        return Panel(())
    start = max(s.start for s in series)
    end = min(s.end for s in series)
    if start > end:
        raise DateMisalignment("series share no common dates")
    return Panel(tuple(s.window(start, end) for s in series))


# -- CSV ---------------------------------------------------------------------

def load_panel(path, date_column: str, value_columns: Sequence[str] | None = None) -> Panel:
    """Read a monthly CSV into a :class:`Panel`.

    Rows are sorted by date; missing cells, unparsable values and skipped
    months are errors, never imputed. ``value_columns=None`` takes every
    non-date column in file order.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(0, date_column, "empty file") from None
        if date_column not in header:
            raise SchemaMismatch(f"{path}: no date column {date_column!r}")
        if value_columns is None:
            value_columns = [h for h in header if h != date_column]
        missing = [c for c in value_columns if c not in header]
        if missing:
            raise SchemaMismatch(f"{path}: columns not found: {missing}")
        di = header.index(date_column)
        idx = [header.index(c) for c in value_columns]
        dates, rows = [], []
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                dates.append(parse_month(row[di]))
            except (ValueError, IndexError) as exc:
                raise ParseError(rownum, date_column, str(exc)) from None
            vals = []
            for col, j in zip(value_columns, idx):
                cell = row[j].strip() if j < len(row) else ""
                if cell.lower() in _MISSING_TOKENS:
                    raise MissingValue(rownum, col)
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(rownum, col, f"not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise MissingValue(rownum, col)
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise TooShort(f"{path}: no data rows")
    dates = np.array(dates, MONTH)
    order = np.argsort(dates, kind="stable")
    dates = dates[order]
    if np.any(np.diff(dates).astype(int) == 0):
        dup = dates[np.flatnonzero(np.diff(dates).astype(int) == 0)[0]]
        raise ParseError(0, date_column, f"duplicate month {month_iso(dup)}")
    matrix = np.asarray(rows, float)[order]
    return Panel.from_array(list(value_columns), dates, matrix)


def format_value(v: float) -> str:
    return f"{v:.12g}"


def write_panel(panel: Panel, path, date_column: str = "date") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = panel.to_array()
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([date_column, *panel.ids])
        for t, d in enumerate(panel.dates):
            w.writerow([month_iso(d), *(format_value(v) for v in data[t])])
    return path


def write_series(series: TimeSeries, path, date_column: str = "date") -> Path:
    return write_panel(Panel((series,)), path, date_column)


# -- transforms ----------------------------------------------------------------

TRANSFORMS = ("none", "log", "diff", "pct_change", "standardize")


def transform(s: TimeSeries, kind: str) -> TimeSeries:
    if kind in ("none", "level", None):
        return s
    v = s.values
    if kind == "log":
        if np.any(v <= 0):
            raise NonPositiveValue(f"{s.id}: log of non-positive value")
        return TimeSeries(s.id, s.dates, np.log(v))
    if kind in ("diff", "pct_change"):
        if len(s) < 2:
            raise TooShort(f"{s.id}: {kind} needs at least 2 observations")
        if kind == "diff":
            out = np.diff(v)
        else:
            if np.any(v[:-1] == 0):
                raise ZeroVariance(f"{s.id}: pct_change with a zero base value")
            out = v[1:] / v[:-1] - 1.0
        return TimeSeries(s.id, s.dates[1:], out)
    if kind == "standardize":
        if len(s) < 2:
            raise TooShort(f"{s.id}: standardize needs at least 2 observations")
        sd = v.std(ddof=1)
        if not sd > 0 or sd < 1e-300:
            raise ZeroVariance(f"{s.id}: zero variance")
        z = (v - v.mean()) / sd
        # a second pass removes the O(eps) residual mean/scale error
        z = (z - z.mean()) / z.std(ddof=1)
        return TimeSeries(s.id, s.dates, z)
    raise ValueError(f"unknown transform {kind!r}; expected one of {TRANSFORMS}")


def standardize(s: TimeSeries) -> TimeSeries:
    return transform(s, "standardize")


# -- descriptive statistics ------------------------------------------------------

@dataclass(frozen=True)
class TestResult:
    statistic: float
    pvalue: float


@dataclass(frozen=True)
class SummaryStats:
    id: str
    n: int
    mean: float
    std_dev: float
    min: float
    max: float
    skewness: float
    excess_kurtosis: float
    jarque_bera: TestResult | None
    ljung_box_q1: TestResult | None

    def row(self) -> dict:
        jb = self.jarque_bera
        q1 = self.ljung_box_q1
        return {
            "variable": self.id,
            "N": self.n,
            "Mean": self.mean,
            "Std. Dev.": self.std_dev,
            "Min": self.min,
            "Max": self.max,
            "Skew": self.skewness,
            "Kurt": self.excess_kurtosis,
            "JB": jb.statistic if jb else float("nan"),
            "JB p": jb.pvalue if jb else float("nan"),
            "Q(1)": q1.statistic if q1 else float("nan"),
            "Q(1) p": q1.pvalue if q1 else float("nan"),
        }


def describe(s: TimeSeries) -> SummaryStats:
    """Table-style summary of one series.

    The standard deviation uses the ``n - 1`` divisor. Skewness and excess
    kurtosis are the moment ratios ``m3 / m2**1.5`` and ``m4 / m2**2 - 3``
    (central moments with divisor ``n``), the form the Jarque-Bera statistic
    ``n/6 * (S**2 + K**2/4)`` is built on. JB and the lag-1 Ljung-Box Q are
    only reported when ``n >= 8``.
    """
    v = s.values
    n = v.size
    if n < 2:
        raise TooShort(f"{s.id}: describe needs at least 2 observations")
    mean = v.mean()
    d = v - mean
    m2 = np.mean(d**2)
    if m2 > 0:
        skew = float(np.mean(d**3) / m2**1.5)
        kurt = float(np.mean(d**4) / m2**2 - 3.0)
    else:
        skew, kurt = 0.0, 0.0
    jb = q1 = None
    if n >= 8:
        jb_stat = n / 6.0 * (skew**2 + kurt**2 / 4.0)
        jb = TestResult(jb_stat, float(stats.chi2.sf(jb_stat, 2)))
        denom = np.sum(d**2)
        rho1 = float(np.sum(d[1:] * d[:-1]) / denom) if denom > 0 else 0.0
        q = n * (n + 2) * rho1**2 / (n - 1)
        q1 = TestResult(q, float(stats.chi2.sf(q, 1)))
    return SummaryStats(
        id=s.id,
        n=n,
        mean=float(mean),
        std_dev=float(v.std(ddof=1)),
        min=float(v.min()),
        max=float(v.max()),
        skewness=skew,
        excess_kurtosis=kurt,
        jarque_bera=jb,
        ljung_box_q1=q1,
    )


# -- correlations ----------------------------------------------------------------

def significance_stars(p: float, thresholds=((0.001, "***"), (0.01, "**"), (0.05, "*"))) -> str:
    """Stars for a p-value. Default cut-offs are the correlation-table ones."""
    if p is None or not np.isfinite(p):
        return ""
    for cut, mark in thresholds:
        if p < cut:
            return mark
    return ""


@dataclass(frozen=True)
class CorrMatrix:
    ids: tuple
    rho: np.ndarray
    pvals: np.ndarray
    n: int
    stars: tuple = field(default=())

    def cell(self, i, j) -> str:
        return f"{self.rho[i, j]:.2f}{self.stars[i][j]}"

    def lower_triangle_rows(self) -> list[list[str]]:
        k = len(self.ids)
        rows = []
        for i in range(k):
            rows.append([self.ids[i]] + [self.cell(i, j) if j <= i else "" for j in range(k)])
        return rows


def corr_matrix(p: Panel) -> CorrMatrix:
    """Pearson correlations with two-sided t-test p-values and stars."""
    n = p.n
    if n < 3:
        raise TooShort("correlation matrix needs at least 3 observations")
    x = p.to_array()
    d = x - x.mean(axis=0)
    ss = np.sqrt(np.sum(d**2, axis=0))
    if np.any(ss == 0):
        bad = [p.ids[j] for j in np.flatnonzero(ss == 0)]
        raise ZeroVariance(f"constant columns: {bad}")
    rho = (d.T @ d) / np.outer(ss, ss)
    rho = np.clip((rho + rho.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(rho, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = rho * np.sqrt((n - 2) / (1.0 - rho**2))
    pvals = np.where(np.abs(rho) >= 1.0, 0.0, 2.0 * stats.t.sf(np.abs(t), n - 2))
    np.fill_diagonal(pvals, 0.0)
    stars = tuple(tuple(significance_stars(pv) for pv in row) for row in pvals)
    return CorrMatrix(tuple(p.ids), _frozen(rho), _frozen(pvals), n, stars)
