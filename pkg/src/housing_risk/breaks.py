"""Multiple structural breaks in linear regressions.

Break placements minimise the total sum of squared residuals by dynamic
programming over a table of segment SSRs (Bai & Perron, 2003); the number
of breaks is the BIC minimiser over ``m = 0..max_breaks``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Panel, TimeSeries, month_label, month_span_label
from .errors import InfeasibleTrim, RankDeficient, SchemaMismatch, SegmentTooShort, TooShort
from .regression import PredictiveSpec, QuantileFit, RegressionFit, predictive_regression
from .tables import Table


def _design(y: TimeSeries, X: Panel | None) -> np.ndarray:
    n = len(y)
    if X is None or not X.k:
        return np.ones((n, 1))
    if not np.array_equal(X.dates, y.dates):
        raise SchemaMismatch("dependent and regressors must share one date axis")
    return np.column_stack([np.ones(n), X.to_array()])


def segment_ssr(y: np.ndarray, Z: np.ndarray) -> float:
    beta, *_ = np.linalg.lstsq(Z, y, rcond=None)
    r = y - Z @ beta
    return float(r @ r)


def ssr_table(y: np.ndarray, Z: np.ndarray, h: int) -> np.ndarray:
    """``cost[i, j]`` = SSR of the OLS fit on observations ``i..j`` (inclusive).

    Segments shorter than ``h`` or with a singular design are ``inf``.
    Built from running cross-product sums on globally centred data.
    """
    n, q = Z.shape
    yc = y - y.mean()
    Zc = Z.copy()
    varying = Zc.std(axis=0) > 0
    if varying.any() and not varying.all():
        Zc[:, varying] -= Zc[:, varying].mean(axis=0)
    cost = np.full((n, n), np.inf)
    for i in range(0, n - h + 1):
        zi = Zc[i:]
        yi = yc[i:]
        cxx = np.cumsum(zi[:, :, None] * zi[:, None, :], axis=0)[h - 1:]
        cxy = np.cumsum(zi * yi[:, None], axis=0)[h - 1:]
        cyy = np.cumsum(yi * yi)[h - 1:]
        try:
            b = np.linalg.solve(cxx, cxy[:, :, None])[:, :, 0]
            ok = np.ones(len(cyy), bool)
        except np.linalg.LinAlgError:
            b = np.zeros_like(cxy)
            ok = np.zeros(len(cyy), bool)
            for j in range(len(cyy)):
                if np.linalg.matrix_rank(cxx[j]) == q:
                    b[j] = np.linalg.solve(cxx[j], cxy[j])
                    ok[j] = True
        ssr = cyy - np.einsum("jk,jk->j", cxy, b)
        ssr = np.where(ok, np.maximum(ssr, 0.0), np.inf)
        cost[i, i + h - 1:] = ssr
    return cost


def _partition(cost: np.ndarray, m: int, h: int):
    """Optimal ``m``-break partition of ``0..n-1``; returns (ssr, last indices of regimes 1..m)."""
    n = cost.shape[0]
    best = cost[0].copy()  # best[j]: one segment covering 0..j
    back = []
    for _ in range(m):
        new = np.full(n, np.inf)
        arg = np.full(n, -1)
        for j in range(n):
            prev = best[: j]  # previous segment ends at b, new one is b+1..j
            cand = prev + cost[1: j + 1, j]
            if cand.size:
                b = int(np.argmin(cand))
                if np.isfinite(cand[b]):
                    new[j], arg[j] = cand[b], b
        back.append(arg)
        best = new
    total = best[n - 1]
    if not np.isfinite(total):
        return np.inf, []
    ends = []
    j = n - 1
    for arg in reversed(back):
        j = int(arg[j])
        ends.append(j)
    return float(total), sorted(ends)


@dataclass(frozen=True)
class BreakpointSet:
    break_indices: tuple
    break_dates: tuple
    segment_ssr: tuple
    chosen_m: int
    criterion_values: tuple
    ssr_by_m: tuple
    trim: float
    min_length: int
    n: int
    dates: np.ndarray = field(repr=False)

    @property
    def labels(self) -> list[str]:
        return [month_label(d) for d in self.break_dates]

    @property
    def total_ssr(self) -> float:
        return float(sum(self.segment_ssr))

    def segments(self) -> list[tuple[int, int]]:
        starts = [0, *(b + 1 for b in self.break_indices)]
        ends = [*self.break_indices, self.n - 1]
        return list(zip(starts, ends))

    def tables(self) -> tuple[Table, Table]:
        dates = Table("breaks_dates", ["break", "date", "index", "segment", "segment_ssr"],
                      title="Estimated structural breaks")
        for k, (s, e) in enumerate(self.segments()):
            label = self.labels[k] if k < self.chosen_m else ""
            idx = self.break_indices[k] if k < self.chosen_m else ""
            seg = f"{month_span_label(self.dates[s])}-{month_span_label(self.dates[e])}"
            dates.add([k + 1 if k < self.chosen_m else "", label, idx, seg, self.segment_ssr[k]])
        crit = Table("breaks_criterion", ["m", "ssr", "bic", "chosen"], title="Break-count selection (BIC)")
        for m, (ssr, bic) in enumerate(zip(self.ssr_by_m, self.criterion_values)):
            crit.add([m, ssr, bic, "*" if m == self.chosen_m else ""])
        return dates, crit


def find_breaks(y: TimeSeries, X: Panel | None = None, max_breaks: int = 5, trim: float = 0.15) -> BreakpointSet:
    """Least-squares break dates with BIC choice of their number.

    Every regime holds at least ``ceil(trim * n)`` observations; a break
    date is the last month of the regime before it. BIC is
    ``ln(SSR_m / n) + p_m ln(n) / n`` with ``p_m = (m + 1) q + m``.
    """
    if not 0.0 < trim < 0.5:
        raise InfeasibleTrim(f"trim must lie in (0, 0.5), got {trim}")
    Z = _design(y, X)
    n, q = Z.shape
    h = max(int(math.ceil(trim * n)), q + 1)
    if (max_breaks + 1) * h > n:
        raise InfeasibleTrim(f"{max_breaks} breaks with minimum regime length {h} do not fit in n={n}")
    yv = y.values
    if np.linalg.matrix_rank(Z) < q:
        raise RankDeficient("break regression design is rank deficient")
    cost = ssr_table(yv, Z, h)
    ssrs, bics, placements = [], [], []
    for m in range(max_breaks + 1):
        total, ends = _partition(cost, m, h)
        if not np.isfinite(total):
            if m == 0:
                raise RankDeficient("no admissible full-rank partition")
            ssrs.append(float("inf"))
            bics.append(float("inf"))
            placements.append(None)
            continue
        ssrs.append(total)
        bics.append(math.log(max(total, np.finfo(float).tiny) / n) + ((m + 1) * q + m) * math.log(n) / n)
        placements.append(ends)
    chosen = int(np.argmin(bics))
    ends = placements[chosen]
    bounds = list(zip([0, *(e + 1 for e in ends)], [*ends, n - 1]))
    seg = tuple(segment_ssr(yv[s: e + 1], Z[s: e + 1]) for s, e in bounds)
    return BreakpointSet(
        break_indices=tuple(ends),
        break_dates=tuple(y.dates[e] for e in ends),
        segment_ssr=seg,
        chosen_m=chosen,
        criterion_values=tuple(bics),
        ssr_by_m=tuple(ssrs),
        trim=trim,
        min_length=h,
        n=n,
        dates=y.dates,
    )


def admissible(ends, n: int, h: int) -> bool:
    bounds = list(zip([0, *(e + 1 for e in ends)], [*ends, n - 1]))
    return all(e - s + 1 >= h for s, e in bounds)


def partition_ssr(y: TimeSeries, X: Panel | None, ends) -> float:
    Z = _design(y, X)
    n = len(y)
    bounds = list(zip([0, *(e + 1 for e in ends)], [*ends, n - 1]))
    return sum(segment_ssr(y.values[s: e + 1], Z[s: e + 1]) for s, e in bounds)


# -- sub-sample re-estimation ------------------------------------------------------

def subsample_fit(returns: TimeSeries, index: TimeSeries | None, controls: Panel | None, break_date,
                  spec: PredictiveSpec | None = None):
    """Predictive regressions before (through ``break_date``) and after the break."""
    spec = spec or PredictiveSpec()
    bd = np.datetime64(break_date, "M")
    out = []
    for start, end, side in ((None, bd, "pre"), (bd + 1, None, "post")):
        try:
            out.append(predictive_regression(returns, index, controls, spec, start=start, end=end))
        except TooShort as exc:
            raise SegmentTooShort(f"{side}-break sample: {exc}") from None
    return out[0], out[1]


def subsample_table(results: dict, key: str, name: str = "table_3_6_subsamples") -> Table:
    """Two-panel layout: for each sample span, OLS with Adj R-sq and N, then quantile rows.

    ``results`` maps dependent id -> (pre_fits, post_fits).
    """
    deps = list(results)
    t = Table(name, ["Sub-sample", "Model", *deps], title="Housing risk beta in sub-samples",
              note="*p<0.1; **p<0.05; ***p<0.01")
    for side in (0, 1):
        first = results[deps[0]][side]
        span = _span(first[0])
        rows = {}
        order = []
        for dep in deps:
            qk = 0
            for fit in results[dep][side]:
                if isinstance(fit, RegressionFit):
                    for label, val in (("OLS", fit.cell(key)), ("Adj R-sq", f"{fit.adj_r2:.3f}"), ("N", str(fit.n))):
                        rows.setdefault(label, {})[dep] = val
                        if label not in order:
                            order.append(label)
                elif isinstance(fit, QuantileFit):
                    qk += 1
                    label = f"Q{qk} ({fit.tau:g})"
                    rows.setdefault(label, {})[dep] = fit.cell(key)
                    if label not in order:
                        order.append(label)
        for label in order:
            t.add([span, label, *(rows[label].get(d, "") for d in deps)])
    return t


def _span(fit: RegressionFit) -> str:
    d = fit.dates
    return f"{month_span_label(d[0])}-{month_span_label(d[-1])}"
