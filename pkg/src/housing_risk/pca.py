"""Principal components by cyclic Jacobi eigendecomposition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Panel, TimeSeries
from .errors import EigenNotConverged, NotEnoughRows, SchemaMismatch, ZeroVariance

MODES = ("covariance", "correlation")


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigenvalues and eigenvectors of a real symmetric matrix.

    Cyclic Jacobi rotations until the largest off-diagonal entry is below
    ``tol`` times the Frobenius norm. Returns ``(values, vectors, sweeps)``
    with values in descending order and unit-norm eigenvector columns.
    Raises :class:`EigenNotConverged` after ``max_sweeps``.
    """
    a = np.array(a, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix required")
    a = (a + a.T) / 2.0
    k = a.shape[0]
    v = np.eye(k)
    scale = np.linalg.norm(a)
    if k == 1 or scale == 0.0:
        return np.diag(a).copy(), v, 0
    thresh = tol * scale
    off_mask = ~np.eye(k, dtype=bool)
    for sweep in range(1, max_sweeps + 1):
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        if np.max(np.abs(a[off_mask])) <= thresh:
            vals = np.diag(a).copy()
            order = np.argsort(-vals, kind="stable")
            return vals[order], v[:, order], sweep
    raise EigenNotConverged(f"Jacobi did not converge in {max_sweeps} sweeps")


def _orient(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so loadings sum to >= 0; exact ties favour the largest entry."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        total = col.sum()
        if abs(total) < 1e-12:
            total = col[np.argmax(np.abs(col))]
        if total < 0:
            out[:, j] = -col
    return out


@dataclass(frozen=True)
class PcaModel:
    ids: tuple
    loadings: np.ndarray
    eigenvalues: np.ndarray
    proportions: np.ndarray
    centers: np.ndarray
    scales: np.ndarray
    mode: str
    matrix: np.ndarray
    sweeps: int = 0

    @property
    def k(self) -> int:
        return len(self.ids)

    @property
    def std_devs(self) -> np.ndarray:
        return np.sqrt(self.eigenvalues)

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.proportions)

    def residual(self) -> float:
        """max_j ||A v_j - e_j v_j|| on the input matrix."""
        r = self.matrix @ self.loadings - self.loadings * self.eigenvalues
        return float(np.max(np.linalg.norm(r, axis=0)))

    def standardized(self, p: Panel) -> np.ndarray:
        if list(p.ids) != list(self.ids):
            raise SchemaMismatch(f"panel columns {p.ids} do not match model {list(self.ids)}")
        return (p.to_array() - self.centers) / self.scales

    def proportions_table(self) -> list[dict]:
        rows = []
        names = [f"PC{j + 1}" for j in range(self.k)]
        for label, vals in (
            ("Standard deviation", self.std_devs),
            ("Proportion of Variance", self.proportions),
            ("Cumulative Proportion", self.cumulative),
        ):
            rows.append({"Statistic": label, **dict(zip(names, vals))})
        return rows

    def loadings_table(self) -> list[dict]:
        names = [f"PC{j + 1}" for j in range(self.k)]
        return [{"variable": v, **dict(zip(names, self.loadings[i]))} for i, v in enumerate(self.ids)]


def fit_pca(p: Panel, mode: str = "correlation", tol: float = 1e-12, max_sweeps: int = 100) -> PcaModel:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if p.n < 2:
        raise NotEnoughRows("PCA needs at least 2 rows")
    x = p.to_array()
    centers = x.mean(axis=0)
    sd = x.std(axis=0, ddof=1)
    if mode == "correlation":
        if np.any(sd <= 0):
            bad = [p.ids[j] for j in np.flatnonzero(sd <= 0)]
            raise ZeroVariance(f"zero-variance columns in correlation mode: {bad}")
        scales = sd
    else:
        scales = np.ones_like(sd)
    z = (x - centers) / scales
    mat = (z.T @ z) / (p.n - 1)
    mat = (mat + mat.T) / 2.0
    vals, vecs, sweeps = jacobi_eigh(mat, tol=tol, max_sweeps=max_sweeps)
    vals = np.where(vals < 0, 0.0, vals)  # round-off on rank-deficient input
    vecs = _orient(vecs)
    total = vals.sum()
    props = vals / total if total > 0 else np.full_like(vals, 1.0 / vals.size)
    for arr in (vals, vecs, props, centers, scales, mat):
        arr.setflags(write=False)
    return PcaModel(tuple(p.ids), vecs, vals, props, centers, scales, mode, mat, sweeps)


@dataclass(frozen=True)
class ScoreSeries:
    component_index: int
    series: TimeSeries


def scores(model: PcaModel, p: Panel, k: int | None = None) -> list[ScoreSeries]:
    """Component scores ``z_t @ loading_j`` for the first ``k`` components."""
    k = model.k if k is None else k
    if not 1 <= k <= model.k:
        raise ValueError(f"k must be in 1..{model.k}")
    z = model.standardized(p)
    s = z @ model.loadings[:, :k]
    return [ScoreSeries(j + 1, TimeSeries(f"PC{j + 1}", p.dates, s[:, j])) for j in range(k)]


def reconstruct(model: PcaModel, score_list: list[ScoreSeries]) -> np.ndarray:
    """Standardized panel implied by the given scores."""
    s = np.column_stack([sc.series.values for sc in score_list])
    idx = [sc.component_index - 1 for sc in score_list]
    return s @ model.loadings[:, idx].T
