"""Predictive OLS with Newey-West errors and linear quantile regression."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.optimize import linprog

from .data import Panel, TimeSeries, align, month_span_label
from .errors import AlignmentEmpty, RankDeficient, SchemaMismatch, TauOutOfRange, TooShort
from .tables import coef_cell

CONST = "const"


def auto_lag(n: int) -> int:
    """Newey-West (1994) plug-in: ``floor(4 * (n/100)**(2/9))``."""
    return int(math.floor(4.0 * (n / 100.0) ** (2.0 / 9.0)))


def pinball_loss(u, tau: float) -> float:
    u = np.asarray(u, float)
    return float(np.sum(u * (tau - (u < 0))))


def _design(y: TimeSeries, X: Panel | None):
    if X is not None and X.k:
        if not np.array_equal(X.dates, y.dates):
            raise SchemaMismatch("dependent and regressors must share one date axis; align them first")
        names = [CONST, *X.ids]
        mat = np.column_stack([np.ones(len(y)), X.to_array()])
    else:
        names = [CONST]
        mat = np.ones((len(y), 1))
    n, k = mat.shape
    if n <= k + 1:
        raise TooShort(f"{n} observations for {k} coefficients")
    if np.linalg.matrix_rank(mat) < k:
        raise RankDeficient(f"design {names} is rank deficient")
    return names, mat, y.values


def hac_meat(scores: np.ndarray, lag: int) -> np.ndarray:
    """Bartlett-weighted long-run covariance of the score rows."""
    s = scores.T @ scores
    for j in range(1, lag + 1):
        w = 1.0 - j / (lag + 1.0)
        g = scores[j:].T @ scores[:-j]
        s += w * (g + g.T)
    return s


@dataclass(frozen=True)
class RegressionSpec:
    dependent: str
    regressors: tuple = ()
    lag_index: int = 0
    lead_dependent: int = 0
    label: str = ""


@dataclass(frozen=True)
class RegressionFit:
    spec: RegressionSpec
    names: tuple
    coefficients: np.ndarray
    hac_se: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r2: float
    adj_r2: float
    n: int
    nw_lag: int
    cov: np.ndarray = field(repr=False)
    residuals: np.ndarray = field(repr=False)
    fitted: np.ndarray = field(repr=False)
    dates: np.ndarray = field(repr=False)

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.index_of(name)])

    def cell(self, name: str, digits: int = 3) -> str:
        i = self.index_of(name)
        return coef_cell(self.coefficients[i], self.hac_se[i], self.p_values[i], digits)

    @property
    def ssr(self) -> float:
        return float(self.residuals @ self.residuals)

    @property
    def residual_std_error(self) -> float:
        return math.sqrt(self.ssr / (self.n - len(self.names)))

    def predict(self, X: Panel | None, n: int | None = None) -> np.ndarray:
        """Fitted values for new regressors; intercept-only models need ``n``."""
        if X is None or not X.k:
            if len(self.names) != 1:
                raise SchemaMismatch("regressors required")
            return np.full(n if n is not None else X.n, self.coefficients[0])
        if list(X.ids) != list(self.names[1:]):
            raise SchemaMismatch(f"regressors {X.ids} do not match fitted {self.names[1:]}")
        return self.coefficients[0] + X.to_array() @ self.coefficients[1:]


def ols_nw(y: TimeSeries, X: Panel | None = None, lag="auto", spec: RegressionSpec | None = None) -> RegressionFit:
    """OLS with Newey-West HAC covariance ``(X'X)^-1 S (X'X)^-1``.

    ``S`` is the Bartlett-weighted sum of score autocovariances up to ``lag``
    (no small-sample scaling, so ``lag=0`` is HC0). ``lag="auto"`` uses
    :func:`auto_lag`. t-tests use ``n - k`` degrees of freedom.
    """
    names, mat, yv = _design(y, X)
    n, k = mat.shape
    L = auto_lag(n) if lag in ("auto", None) else int(lag)
    if L < 0:
        raise ValueError("HAC lag must be non-negative")
    xtx_inv = np.linalg.inv(mat.T @ mat)
    beta = xtx_inv @ (mat.T @ yv)
    fitted = mat @ beta
    resid = yv - fitted
    cov = xtx_inv @ hac_meat(mat * resid[:, None], L) @ xtx_inv
    cov = (cov + cov.T) / 2.0
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        tst = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pv = 2.0 * stats.t.sf(np.abs(tst), n - k)
    sst = float(np.sum((yv - yv.mean()) ** 2))
    ssr = float(resid @ resid)
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k)
    spec = spec or RegressionSpec(y.id, tuple(names[1:]))
    return RegressionFit(spec, tuple(names), beta, se, tst, pv, r2, adj, n, L, cov, resid, fitted, y.dates)


# -- quantile regression ---------------------------------------------------------

def _solve_lp(mat: np.ndarray, yv: np.ndarray, tau: float) -> np.ndarray:
    """Exact pinball-loss minimiser via the bounded dual LP.

    ``max y'a  s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1``; the primal
    coefficients are the equality-constraint multipliers. The LP answer is
    then snapped to the basic solution through the ``k`` smallest
    residuals when that is at least as good.
    """
    n, k = mat.shape
    res = linprog(-yv, A_eq=mat.T, b_eq=(1.0 - tau) * mat.sum(axis=0), bounds=(0.0, 1.0), method="highs")
    if res.status != 0:
        raise RankDeficient(f"quantile LP failed: {res.message}")
    beta = -np.asarray(res.eqlin.marginals, float)
    best = pinball_loss(yv - mat @ beta, tau)
    basis = np.argsort(np.abs(yv - mat @ beta), kind="stable")[:k]
    sub = mat[basis]
    if np.linalg.matrix_rank(sub) == k:
        snapped = np.linalg.solve(sub, yv[basis])
        val = pinball_loss(yv - mat @ snapped, tau)
        if val <= best * (1 + 1e-12) + 1e-300:
            beta = snapped
    return beta


@dataclass(frozen=True)
class QuantileFit:
    tau: float
    names: tuple
    coefficients: np.ndarray
    se: np.ndarray
    objective: float
    n: int
    spec: RegressionSpec | None = None
    n_boot: int = 0

    @property
    def t_stats(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.se > 0, self.coefficients / self.se, np.nan)

    @property
    def p_values(self) -> np.ndarray:
        return 2.0 * stats.norm.sf(np.abs(self.t_stats))

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def cell(self, name: str, digits: int = 3) -> str:
        i = self.names.index(name)
        if not np.isfinite(self.se[i]):
            return f"{self.coefficients[i]:.{digits}f}"
        return coef_cell(self.coefficients[i], self.se[i], self.p_values[i], digits)


def quantile_fit(y: TimeSeries, X: Panel | None, tau: float, n_boot: int = 499, seed: int = 0,
                 spec: RegressionSpec | None = None) -> QuantileFit:
    """Linear quantile regression minimising ``sum rho_tau(y - Xb)``.

    Standard errors come from an ``(x, y)`` pairs bootstrap with ``n_boot``
    resamples drawn from a generator seeded with ``seed``; ``n_boot=0``
    skips them (SEs reported as NaN).
    """
    if not 0.0 < tau < 1.0:
        raise TauOutOfRange(f"tau must lie in (0, 1), got {tau}")
    names, mat, yv = _design(y, X)
    beta = _solve_lp(mat, yv, tau)
    obj = pinball_loss(yv - mat @ beta, tau)
    se = np.full(beta.size, np.nan)
    if n_boot > 0:
        rng = np.random.default_rng(seed)
        n, k = mat.shape
        draws = []
        for _ in range(n_boot):
            idx = rng.integers(0, n, n)
            m = mat[idx]
            if np.linalg.matrix_rank(m) < k:
                continue
            draws.append(_solve_lp(m, yv[idx], tau))
        if len(draws) >= 2:
            se = np.asarray(draws).std(axis=0, ddof=1)
    return QuantileFit(float(tau), tuple(names), beta, se, obj, len(yv), spec, n_boot)


# -- predictive designs ------------------------------------------------------------

@dataclass(frozen=True)
class PredictiveSpec:
    """Alignment of a predictive regression.

    The observation stamped ``t`` pairs the dependent variable at
    ``t + lead_dependent`` and the controls at the same date with the index
    at ``t - lag_index``. ``R_t on H_{t-1}`` is ``lag_index=1``;
    ``Index_{t+1} on H_t`` is ``lead_dependent=1``.
    """

    lag_index: int = 1
    lead_dependent: int = 0
    quantiles: tuple = ()
    nw_lag: object = "auto"
    n_boot: int = 499
    seed: int = 0
    label: str = ""


def build_design(returns: TimeSeries, index: TimeSeries | None, controls: Panel | None, spec: PredictiveSpec,
                 start=None, end=None):
    """Aligned ``(y, X)`` for a predictive regression, optionally windowed on ``t``."""
    parts = [returns.shift(-spec.lead_dependent)]
    if index is not None:
        parts.append(index.shift(spec.lag_index))
    if controls is not None:
        parts.extend(c.shift(-spec.lead_dependent) for c in controls.columns)
    try:
        panel = align(parts)
        if start is not None or end is not None:
            panel = panel.window(start, end)
    except Exception as exc:
        raise AlignmentEmpty(f"no overlapping dates for {returns.id}: {exc}") from None
    y = panel.columns[0]
    X = Panel(panel.columns[1:])
    if y.values.size < 30:
        raise TooShort(f"{returns.id}: only {y.values.size} aligned observations (need 30)")
    return y, X


def predictive_regression(returns: TimeSeries, index: TimeSeries | None, controls: Panel | None = None,
                          spec: PredictiveSpec | None = None, start=None, end=None) -> list:
    """OLS (Newey-West) plus optional quantile fits of returns on the lagged index."""
    spec = spec or PredictiveSpec()
    y, X = build_design(returns, index, controls, spec, start, end)
    rspec = RegressionSpec(returns.id, tuple(X.ids), spec.lag_index, spec.lead_dependent, spec.label)
    out = [ols_nw(y, X, spec.nw_lag, rspec)]
    for q in spec.quantiles:
        out.append(quantile_fit(y, X, float(q), spec.n_boot, spec.seed, rspec))
    return out


def sample_label(fit) -> str:
    d = fit.dates if isinstance(fit, RegressionFit) else None
    if d is None or not len(d):
        return ""
    return f"{month_span_label(d[0])}-{month_span_label(d[-1])}"


def quantile_label(tau: float, k: int) -> str:
    return f"Q{k} ({tau:g})"


def summary_rows(fits: Sequence, key: str) -> list[tuple[str, str]]:
    """(row label, cell) pairs in the baseline-table layout for one dependent variable."""
    rows = []
    qk = 0
    for fit in fits:
        if isinstance(fit, RegressionFit):
            label = fit.spec.label or "OLS"
            rows.append((label, fit.cell(key)))
            rows.append(("Adj R-Sq", f"{fit.adj_r2:.4f} ({100 * fit.adj_r2:.2f}%)"))
            rows.append(("N", str(fit.n)))
        else:
            qk += 1
            rows.append((quantile_label(fit.tau, qk), fit.cell(key)))
    return rows
