"""Exhaustive covariate-subset ranking by BIC-approximated posterior odds."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .data import Panel, TimeSeries
from .errors import RankDeficient, SchemaMismatch, TooManyCandidates, TooShort
from .tables import Table

MAX_CANDIDATES = 20


@dataclass(frozen=True)
class ModelEntry:
    mask: int
    included: tuple
    log_marginal: float
    posterior_prob: float
    log_posterior_odds: float  # relative to the best model, <= 0

    @property
    def size(self) -> int:
        return len(self.included)


@dataclass(frozen=True)
class ModelRanking:
    candidates: tuple
    always_include: tuple
    entries: tuple
    top_k: int
    n: int

    @property
    def best(self) -> ModelEntry:
        return self.entries[0]

    def top(self, k: int | None = None) -> tuple:
        return self.entries[: (self.top_k if k is None else k)]

    def log_marginal_of(self, included: Sequence[str]) -> float:
        key = frozenset(included)
        for e in self.entries:
            if frozenset(e.included) == key:
                return e.log_marginal
        raise KeyError(tuple(included))

    def table(self, name: str = "selection_ranking") -> Table:
        cols = ["rank", "log_marginal", "log_posterior_odds", "posterior_prob", "n_predictors",
                "included", *self.candidates]
        t = Table(name, cols, title="Covariate selection by log posterior odds")
        for r, e in enumerate(self.top(), start=1):
            flags = [1 if c in e.included else 0 for c in self.candidates]
            t.add([r, e.log_marginal, e.log_posterior_odds, e.posterior_prob, e.size,
                   " + ".join(e.included) or "(intercept only)", *flags])
        return t


def gaussian_bic_log_marginal(y: np.ndarray, design: np.ndarray) -> float:
    """``max loglik - (p/2) ln n`` for a Gaussian linear model (``-BIC/2``)."""
    n, p = design.shape
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    r = y - design @ beta
    ssr = float(r @ r)
    if ssr <= 0:
        ssr = np.finfo(float).tiny
    loglik = -0.5 * n * (math.log(2 * math.pi) + math.log(ssr / n) + 1.0)
    return loglik - 0.5 * p * math.log(n)


def enumerate_models(y: TimeSeries, candidates: Panel, always_include: Sequence[str] = (),
                     top_k: int = 20) -> ModelRanking:
    """Rank every subset of ``candidates`` (plus an intercept and the pinned ids).

    Each subset's columns enter the design in sorted-id order, so a subset's
    log marginal depends only on its own columns. Prior over subsets is
    uniform; ties rank the smaller subset first, then by sorted ids.
    """
    if not np.array_equal(candidates.dates, y.dates):
        raise SchemaMismatch("dependent and candidates must share one date axis")
    pinned = tuple(always_include)
    missing = [c for c in pinned if c not in candidates.ids]
    if missing:
        raise SchemaMismatch(f"always_include ids not among candidates: {missing}")
    free = [c for c in candidates.ids if c not in pinned]
    if len(free) > MAX_CANDIDATES:
        raise TooManyCandidates(f"{len(free)} free candidates; exhaustive search allows {MAX_CANDIDATES}")
    n = len(y)
    if n <= len(candidates.ids) + 2:
        raise TooShort(f"{n} observations for up to {len(candidates.ids)} predictors")
    cols = {c: candidates[c].values for c in candidates.ids}
    yv = y.values
    order = {c: i for i, c in enumerate(candidates.ids)}
    raw = []
    for size in range(len(free) + 1):
        for combo in combinations(free, size):
            included = tuple(sorted(pinned + combo))
            design = np.column_stack([np.ones(n)] + [cols[c] for c in included])
            # redundant columns elsewhere only cost BIC penalty; the base must be sound
            if not combo and np.linalg.matrix_rank(design) < design.shape[1]:
                raise RankDeficient(f"intercept + pinned design {pinned} is rank deficient")
            lm = gaussian_bic_log_marginal(yv, design)
            mask = sum(1 << order[c] for c in included)
            listed = tuple(sorted(included, key=order.__getitem__))
            raw.append((lm, listed, mask, included))
    raw.sort(key=lambda r: (-r[0], len(r[3]), r[3]))
    lms = np.array([r[0] for r in raw])
    top = lms[0]
    w = np.exp(lms - top)
    probs = w / w.sum()
    entries = tuple(
        ModelEntry(mask, listed, lm, float(pr), lm - top)
        for (lm, listed, mask, _), pr in zip(raw, probs)
    )
    return ModelRanking(tuple(candidates.ids), pinned, entries, min(top_k, len(entries)), n)
