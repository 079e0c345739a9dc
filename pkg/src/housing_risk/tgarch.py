"""Factor-augmented bivariate threshold GARCH(1,1).

Two steps: a VAR(1) in the housing variable ``x`` and the macro factor
``f`` gives the residual pair ``(e_x, e_f)``; a bivariate GJR-type
recursion for the conditional variances and covariance is then fitted to
those residuals by Gaussian maximum likelihood.

    s2x_t = w_x + a_x e_x^2 + p_x s2x_{t-1} + g_x e_x^2 1[e_x<0]
    s2f_t = w_f + a_f e_f^2 + p_f s2f_{t-1} + g_f e_f^2 1[e_f<0]
    sxf_t = w_c + a_c e_x e_f + p_c sxf_{t-1} + g_c e_x e_f 1[e_x<0] 1[e_f<0]

with lagged residuals on the right-hand side. The first conditional
covariance of the sample is the supplied initial state.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .data import Panel, TimeSeries, align, month_range
from .errors import (
    CollinearRegressors,
    NonPositiveDefinite,
    NonStationaryParams,
    OptimizerDiverged,
    SchemaMismatch,
    TooShort,
)
from .optimize import nelder_mead_jit

LOG_2PI = math.log(2.0 * math.pi)
PENALTY = 1e10


# -- parameters ----------------------------------------------------------------

@dataclass(frozen=True)
class EquationParams:
    omega: float
    alpha: float
    phi: float
    gamma: float

    def as_tuple(self):
        return (self.omega, self.alpha, self.phi, self.gamma)


@dataclass(frozen=True)
class TGarchParams:
    """Parameter quadruples for the housing variance, factor variance and covariance."""

    housing: EquationParams
    factor: EquationParams
    covariance: EquationParams

    def __post_init__(self):
        for name in ("housing", "factor"):
            eq = getattr(self, name)
            if not (eq.omega > 0 and eq.alpha >= 0 and eq.phi >= 0 and eq.alpha + eq.phi <= 1 + 1e-12):
                raise ValueError(
                    f"{name} variance equation violates omega>0, alpha>=0, phi>=0, alpha+phi<=1: {eq}"
                )

    @classmethod
    def from_vector(cls, v) -> "TGarchParams":
        v = [float(x) for x in v]
        return cls(EquationParams(*v[0:4]), EquationParams(*v[4:8]), EquationParams(*v[8:12]))

    def vector(self) -> np.ndarray:
        return np.array(self.housing.as_tuple() + self.factor.as_tuple() + self.covariance.as_tuple())

    def is_stationary(self) -> bool:
        return all(eq.alpha + eq.phi + eq.gamma / 2.0 < 1.0 for eq in (self.housing, self.factor))

    def as_dict(self) -> dict:
        return {k: asdict(getattr(self, k)) for k in ("housing", "factor", "covariance")}


# -- kernels -------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _filter_kernel(ex, ef, p, s0x, s0f, s0c, s2x, s2f, sxf):
    """Run the recursion into the output arrays; returns first non-PD index or -1."""
    n = ex.shape[0]
    s2x[0] = s0x
    s2f[0] = s0f
    sxf[0] = s0c
    if not (s0x > 0.0 and s0f > 0.0 and s0x * s0f - s0c * s0c > 0.0):
        return 0
    for t in range(1, n):
        a = ex[t - 1]
        b = ef[t - 1]
        da = 1.0 if a < 0.0 else 0.0
        db = 1.0 if b < 0.0 else 0.0
        s2x[t] = p[0] + p[1] * a * a + p[2] * s2x[t - 1] + p[3] * a * a * da
        s2f[t] = p[4] + p[5] * b * b + p[6] * s2f[t - 1] + p[7] * b * b * db
        sxf[t] = p[8] + p[9] * a * b + p[10] * sxf[t - 1] + p[11] * a * b * da * db
        if not (s2x[t] > 0.0 and s2f[t] > 0.0 and s2x[t] * s2f[t] - sxf[t] * sxf[t] > 0.0):
            return t
    return -1


@numba.njit(cache=True, nogil=True)
def _negloglik_kernel(ex, ef, p, s0x, s0f, s0c):
    n = ex.shape[0]
    hx = s0x
    hf = s0f
    hc = s0c
    total = 0.0
    for t in range(n):
        if t > 0:
            a = ex[t - 1]
            b = ef[t - 1]
            da = 1.0 if a < 0.0 else 0.0
            db = 1.0 if b < 0.0 else 0.0
            hx = p[0] + p[1] * a * a + p[2] * hx + p[3] * a * a * da
            hf = p[4] + p[5] * b * b + p[6] * hf + p[7] * b * b * db
            hc = p[8] + p[9] * a * b + p[10] * hc + p[11] * a * b * da * db
        det = hx * hf - hc * hc
        if not (hx > 0.0 and hf > 0.0 and det > 0.0):
            return 1e10
        u = ex[t]
        v = ef[t]
        quad = (hf * u * u - 2.0 * hc * u * v + hx * v * v) / det
        total += 2.0 * 1.8378770664093453 + math.log(det) + quad
    return 0.5 * total


@numba.njit(cache=True, nogil=True)
def _softplus(w):
    if w > 30.0:
        return w
    return math.log1p(math.exp(w))


@numba.njit(cache=True, nogil=True)
def _logistic(a):
    if a >= 0:
        return 1.0 / (1.0 + math.exp(-a))
    e = math.exp(a)
    return e / (1.0 + e)


@numba.njit(cache=True, nogil=True)
def _theta_to_params(theta, vx, vf, cscale, out):
    for k in (0, 4):
        v = vx if k == 0 else vf
        s = _logistic(theta[k + 1])
        u = _logistic(theta[k + 2])
        out[k] = max(_softplus(theta[k]) * v, 1e-300)
        out[k + 1] = s * u
        out[k + 2] = s * (1.0 - u)
        out[k + 3] = theta[k + 3]
    out[8] = theta[8] * cscale
    out[9] = theta[9]
    out[10] = theta[10]
    out[11] = theta[11]


@numba.njit(cache=True, nogil=True)
def _objective(theta, ex, ef, vx, vf, cscale, s0x, s0f, s0c):
    p = np.empty(12)
    _theta_to_params(theta, vx, vf, cscale, p)
    return _negloglik_kernel(ex, ef, p, s0x, s0f, s0c)


def _minimize(theta0, args, step, xtol, max_evals):
    return nelder_mead_jit(_objective, theta0, args, step=step, xtol=xtol, max_evals=max_evals)


def _inv_softplus(y):
    return float(y + math.log(-math.expm1(-y))) if y < 30 else float(y)


def _logit(p):
    return math.log(p / (1.0 - p))


def params_to_theta(params: TGarchParams, vx: float, vf: float, cscale: float) -> np.ndarray:
    """Map constrained parameters into the unconstrained optimisation space."""
    theta = np.empty(12)
    for k, eq, v in ((0, params.housing, vx), (4, params.factor, vf)):
        s = min(max(eq.alpha + eq.phi, 1e-9), 1 - 1e-9)
        u = min(max(eq.alpha / s, 1e-9), 1 - 1e-9)
        theta[k] = _inv_softplus(eq.omega / v)
        theta[k + 1] = _logit(s)
        theta[k + 2] = _logit(u)
        theta[k + 3] = eq.gamma
    c = params.covariance
    theta[8:] = (c.omega / cscale, c.alpha, c.phi, c.gamma)
    return theta


def theta_to_params(theta, vx: float, vf: float, cscale: float) -> TGarchParams:
    out = np.empty(12)
    _theta_to_params(np.asarray(theta, float), vx, vf, cscale, out)
    return TGarchParams.from_vector(out)


# -- VAR(1) mean equation --------------------------------------------------------

@dataclass(frozen=True)
class VarFit:
    """Equation-by-equation OLS of ``(x_t, f_t)`` on ``(1, x_{t-1}, f_{t-1})``.

    ``coef[i]`` holds the slopes of equation ``i`` (0 = housing, 1 = factor)
    on ``(x_{t-1}, f_{t-1})``; ``std_errors[i]`` are the homoskedastic OLS
    standard errors of ``(intercept, slope_x, slope_f)``.
    """

    x_id: str
    f_id: str
    intercepts: np.ndarray
    coef: np.ndarray
    std_errors: np.ndarray
    residuals: Panel
    fitted: Panel
    design: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.residuals.n

    def normal_equation_error(self) -> float:
        return float(np.max(np.abs(self.design.T @ self.residuals.to_array())))


def fit_var1(x: TimeSeries, f: TimeSeries) -> VarFit:
    p = align([x, f])
    if p.n < 10:
        raise TooShort(f"VAR(1) needs at least 10 common observations, got {p.n}")
    y = p.to_array()
    design = np.column_stack([np.ones(p.n - 1), y[:-1]])
    if np.linalg.matrix_rank(design) < 3 or np.any(y[:-1].std(axis=0) == 0):
        raise CollinearRegressors(f"lagged regressors of ({x.id}, {f.id}) are collinear with the intercept")
    lhs = y[1:]
    b, *_ = np.linalg.lstsq(design, lhs, rcond=None)
    fitted = design @ b
    resid = lhs - fitted
    dof = design.shape[0] - design.shape[1]
    xtx_inv = np.linalg.inv(design.T @ design)
    s2 = np.sum(resid**2, axis=0) / dof
    se = np.sqrt(np.outer(s2, np.diag(xtx_inv)))
    dates = p.dates[1:]
    ids = (f"e_{x.id}", f"e_{f.id}")
    return VarFit(
        x_id=x.id,
        f_id=f.id,
        intercepts=b[0].copy(),
        coef=b[1:].T.copy(),
        std_errors=se,
        residuals=Panel.from_array(ids, dates, resid),
        fitted=Panel.from_array((f"fit_{x.id}", f"fit_{f.id}"), dates, fitted),
        design=design,
    )


# -- filter and likelihood -------------------------------------------------------

@dataclass(frozen=True)
class CovariancePath:
    """Conditional variances and covariance; positive definite at every date."""

    sigma2_i: TimeSeries
    sigma2_f: TimeSeries
    sigma_if: TimeSeries

    def __post_init__(self):
        a, b, c = self.sigma2_i.values, self.sigma2_f.values, self.sigma_if.values
        if not (a.shape == b.shape == c.shape):
            raise SchemaMismatch("covariance path components differ in length")
        ok = (a > 0) & (b > 0) & (a * b - c * c > 0)
        if not ok.all():
            raise NonPositiveDefinite(int(np.flatnonzero(~ok)[0]))

    def __len__(self):
        return len(self.sigma2_i)

    @property
    def volatility(self) -> TimeSeries:
        """Conditional standard deviation of the housing variable."""
        return TimeSeries(self.sigma2_i.id.replace("sigma2_", "vol_"), self.sigma2_i.dates,
                          np.sqrt(self.sigma2_i.values))

    def determinants(self) -> np.ndarray:
        return self.sigma2_i.values * self.sigma2_f.values - self.sigma_if.values**2


def _pair(residuals):
    if isinstance(residuals, Panel):
        if residuals.k != 2:
            raise SchemaMismatch("residual panel must have exactly two columns")
        arr = residuals.to_array()
        return residuals.dates, np.ascontiguousarray(arr[:, 0]), np.ascontiguousarray(arr[:, 1])
    ex, ef = (np.ascontiguousarray(np.asarray(r, float)) for r in residuals)
    if ex.shape != ef.shape:
        raise SchemaMismatch("residual series differ in length")
    return month_range("2000-01", ex.size), ex, ef


def tgarch_filter(residuals, params: TGarchParams, init, name: str = "x") -> CovariancePath:
    """Conditional covariance path for a residual pair.

    ``residuals`` is a two-column :class:`Panel` (housing, factor) or a pair
    of arrays; ``init`` is ``(s2x_0, s2f_0, sxf_0)``, used as the
    conditional covariance of the first observation.
    """
    dates, ex, ef = _pair(residuals)
    n = ex.size
    s2x, s2f, sxf = np.empty(n), np.empty(n), np.empty(n)
    bad = _filter_kernel(ex, ef, params.vector(), float(init[0]), float(init[1]), float(init[2]), s2x, s2f, sxf)
    if bad >= 0:
        raise NonPositiveDefinite(int(bad))
    return CovariancePath(
        TimeSeries(f"sigma2_{name}", dates, s2x),
        TimeSeries("sigma2_f", dates, s2f),
        TimeSeries(f"sigma_{name}f", dates, sxf),
    )


def log_likelihood(residuals, path: CovariancePath) -> float:
    """Gaussian log-likelihood of the residual pair under the covariance path.

    ``-1/2 * sum_t [2 ln(2 pi) + ln det S_t + z_t' S_t^{-1} z_t]`` with the
    2x2 determinant ``s2x * s2f - sxf**2``.
    """
    _, ex, ef = _pair(residuals)
    if ex.size != len(path):
        raise SchemaMismatch("residuals and covariance path differ in length")
    hx, hf, hc = path.sigma2_i.values, path.sigma2_f.values, path.sigma_if.values
    det = hx * hf - hc * hc
    if np.any(det <= 0) or np.any(hx <= 0) or np.any(hf <= 0):
        raise NonPositiveDefinite(int(np.flatnonzero((det <= 0) | (hx <= 0) | (hf <= 0))[0]))
    quad = (hf * ex**2 - 2 * hc * ex * ef + hx * ef**2) / det
    return float(-0.5 * np.sum(2 * LOG_2PI + np.log(det) + quad))


# -- estimation --------------------------------------------------------------------

@dataclass(frozen=True)
class TGarchConfig:
    restarts: int = 20
    max_evals: int = 20000
    xtol: float = 1e-8
    jitter: float = 0.5
    seed: int = 0


@dataclass(frozen=True)
class OptimizerTrace:
    iterations: int
    evaluations: int
    converged: bool
    restarts_run: int
    feasible_starts: int
    best_restart: int


@dataclass(frozen=True)
class TGarchFit:
    var: VarFit
    params: TGarchParams
    path: CovariancePath
    loglik: float
    initial_loglik: float
    init: tuple
    optimizer_trace: OptimizerTrace

    @property
    def volatility(self) -> TimeSeries:
        return self.path.volatility.renamed(self.var.x_id)


def default_start(vx: float, vf: float, cxf: float) -> TGarchParams:
    return TGarchParams(
        EquationParams(0.1 * vx, 0.05, 0.85, 0.05),
        EquationParams(0.1 * vf, 0.05, 0.85, 0.05),
        EquationParams(0.1 * cxf, 0.05, 0.85, 0.05),
    )


def fit_tgarch(x: TimeSeries, f: TimeSeries, config: TGarchConfig | None = None) -> TGarchFit:
    """Two-step estimate: VAR(1) residuals, then Nelder-Mead on the likelihood.

    Variance equations are optimised through ``omega = softplus(w) * var``
    and ``(alpha, phi) = s * (u, 1 - u)`` with logistic ``s, u``, so the
    constraints hold by construction; the covariance equation and the
    ``gamma`` terms are free, and any non-positive-definite step scores the
    1e10 penalty. The best point over all restarts is returned.
    """
    config = config or TGarchConfig()
    var = fit_var1(x, f)
    n = var.n
    if n < 100:
        raise TooShort(f"T-GARCH needs at least 100 observations, got {n}")
    if n < 300:
        warnings.warn(f"T-GARCH on only {n} observations; estimates will be noisy", stacklevel=2)
    resid = var.residuals.to_array()
    ex = np.ascontiguousarray(resid[:, 0])
    ef = np.ascontiguousarray(resid[:, 1])
    vx = float(ex.var(ddof=1))
    vf = float(ef.var(ddof=1))
    cxf = float(np.cov(ex, ef, ddof=1)[0, 1])
    cscale = math.sqrt(vx * vf)
    init = (vx, vf, cxf)

    args = (ex, ef, vx, vf, cscale, vx, vf, cxf)

    def objective(theta):
        return _objective(np.asarray(theta, float), *args)

    start = params_to_theta(default_start(vx, vf, cxf), vx, vf, cscale)
    starts = [start]
    if objective(start) >= PENALTY:
        fallback = default_start(vx, vf, cxf)
        fallback = TGarchParams(fallback.housing, fallback.factor, EquationParams(0.0, 0.0, 0.0, 0.0))
        starts = [params_to_theta(fallback, vx, vf, cscale)]
        if objective(starts[0]) >= PENALTY:
            raise NonPositiveDefinite(0, "no positive-definite starting point")
    initial_value = objective(starts[0])

    rng = np.random.default_rng(config.seed)
    jitter_scale = np.array([1.0, 1.0, 1.0, 0.1] * 2 + [0.1, 0.05, 0.1, 0.05]) * config.jitter
    step = np.array([0.5, 0.5, 0.5, 0.05] * 2 + [0.05, 0.02, 0.05, 0.02])
    best = None
    best_k = 0
    iters = evals = feasible = 0
    for k in range(config.restarts):
        theta0 = starts[0] if k == 0 else starts[0] + rng.normal(size=12) * jitter_scale
        if objective(theta0) >= PENALTY:
            continue
        feasible += 1
        res = _minimize(theta0, args, step, config.xtol, config.max_evals)
        iters += res.iterations
        evals += res.evaluations
        if best is None or res.fun < best.fun:
            best, best_k = res, k
    if best is not None:
        # polish from the best vertex with a fresh simplex
        res = _minimize(best.x, args, step * 0.1, config.xtol, config.max_evals)
        iters += res.iterations
        evals += res.evaluations
        if res.fun <= best.fun:
            best = res
    if best is None or not np.isfinite(best.fun) or best.fun >= PENALTY:
        raise OptimizerDiverged("no feasible improvement found")
    params = theta_to_params(best.x, vx, vf, cscale)
    path = tgarch_filter(var.residuals, params, init, name=x.id)
    loglik = log_likelihood(var.residuals, path)
    trace = OptimizerTrace(iters, evals, bool(best.converged), config.restarts, feasible, best_k)
    return TGarchFit(var, params, path, loglik, -initial_value, init, trace)


# -- simulation ---------------------------------------------------------------------

def _unconditional(params: TGarchParams):
    vx = params.housing.omega / (1 - params.housing.alpha - params.housing.phi - params.housing.gamma / 2)
    vf = params.factor.omega / (1 - params.factor.alpha - params.factor.phi - params.factor.gamma / 2)
    c = params.covariance
    denom = 1 - c.alpha - c.phi - c.gamma / 4
    cov = c.omega / denom if denom > 0 else 0.0
    lim = 0.95 * math.sqrt(vx * vf)
    return vx, vf, float(np.clip(cov, -lim, lim))


@dataclass(frozen=True)
class SimulationTruth:
    params: TGarchParams
    intercepts: tuple
    coef: tuple
    n: int
    seed: int
    burn: int
    path: CovariancePath = field(repr=False)
    innovations: Panel = field(repr=False)

    def manifest(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "var_intercepts": list(self.intercepts),
            "var_coef": [list(r) for r in self.coef],
            "n": self.n,
            "seed": self.seed,
            "burn": self.burn,
        }


def simulate_tgarch(params: TGarchParams, var_coeffs=None, n: int = 1000, seed: int = 0,
                    burn: int = 500, start="1971-01", x_id="x", f_id="f"):
    """Draw ``(x, f, truth)`` from the VAR(1) + bivariate threshold GARCH model.

    ``var_coeffs`` is ``(intercepts, coef)`` in the :class:`VarFit` layout,
    or ``None`` for a zero mean equation. Deterministic for a fixed seed.
    """
    if not params.is_stationary():
        raise NonStationaryParams("need alpha + phi + gamma/2 < 1 in both variance equations")
    if var_coeffs is None:
        b0, b1 = np.zeros(2), np.zeros((2, 2))
    elif isinstance(var_coeffs, VarFit):
        b0, b1 = var_coeffs.intercepts, var_coeffs.coef
    else:
        b0, b1 = (np.asarray(a, float) for a in var_coeffs)
    if np.max(np.abs(np.linalg.eigvals(b1))) >= 1:
        raise NonStationaryParams("VAR(1) coefficient matrix has a unit or explosive root")
    rng = np.random.default_rng(seed)
    total = n + burn
    z = rng.standard_normal((total, 2))
    p = params.vector()
    hx, hf, hc = _unconditional(params)
    y = np.linalg.solve(np.eye(2) - b1, b0)
    eps = np.zeros(2)
    ys = np.empty((total, 2))
    es = np.empty((total, 2))
    hs = np.empty((total, 3))
    for t in range(total):
        if t > 0:
            a, b = eps
            da = 1.0 if a < 0 else 0.0
            db = 1.0 if b < 0 else 0.0
            hx = p[0] + p[1] * a * a + p[2] * hx + p[3] * a * a * da
            hf = p[4] + p[5] * b * b + p[6] * hf + p[7] * b * b * db
            hc = p[8] + p[9] * a * b + p[10] * hc + p[11] * a * b * da * db
        det = hx * hf - hc * hc
        if not (hx > 0 and hf > 0 and det > 0):
            raise NonPositiveDefinite(t - burn, "simulated covariance")
        l11 = math.sqrt(hx)
        l21 = hc / l11
        l22 = math.sqrt(hf - l21 * l21)
        eps = np.array([l11 * z[t, 0], l21 * z[t, 0] + l22 * z[t, 1]])
        y = b0 + b1 @ y + eps
        ys[t], es[t], hs[t] = y, eps, (hx, hf, hc)
    dates = month_range(start, n)
    x = TimeSeries(x_id, dates, ys[burn:, 0])
    f = TimeSeries(f_id, dates, ys[burn:, 1])
    path = CovariancePath(
        TimeSeries(f"sigma2_{x_id}", dates, hs[burn:, 0]),
        TimeSeries("sigma2_f", dates, hs[burn:, 1]),
        TimeSeries(f"sigma_{x_id}f", dates, hs[burn:, 2]),
    )
    truth = SimulationTruth(params, tuple(map(float, b0)), tuple(tuple(map(float, r)) for r in b1),
                            n, seed, burn, path, Panel.from_array(("e_x", "e_f"), dates, es[burn:]))
    return x, f, truth
