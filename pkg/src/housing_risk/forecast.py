"""Fixed-scheme in-sample / out-of-sample forecast evaluation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Panel, TimeSeries
from .errors import SchemaMismatch, TooShort
from .regression import ols_nw
from .tables import Table


@dataclass(frozen=True)
class Sample:
    y: TimeSeries
    X: Panel

    @property
    def n(self) -> int:
        return len(self.y)

    def columns(self, ids: Sequence[str]) -> Panel:
        return self.X.select(ids) if ids else Panel(())


def split_train_test(y: TimeSeries, X: Panel | None, ratio: float = 0.8) -> tuple[Sample, Sample]:
    """Chronological split: the first ``floor(ratio * n)`` observations train."""
    if not 0.0 < ratio < 1.0:
        raise TooShort(f"split ratio must lie strictly between 0 and 1, got {ratio}")
    X = X if X is not None else Panel(())
    if X.k and not np.array_equal(X.dates, y.dates):
        raise SchemaMismatch("dependent and regressors must share one date axis")
    n = len(y)
    n_train = int(math.floor(ratio * n + 1e-9))
    if n_train < 1 or n_train >= n:
        raise TooShort(f"ratio {ratio} leaves an empty side for n={n}")
    d = y.dates
    train = Sample(y.window(None, d[n_train - 1]), X.window(None, d[n_train - 1]) if X.k else X)
    test = Sample(y.window(d[n_train], None), X.window(d[n_train], None) if X.k else X)
    return train, test


def correlation_accuracy(actual, predicted) -> float:
    """100 x Pearson correlation; NaN when either side is constant."""
    a = np.asarray(actual, float)
    p = np.asarray(predicted, float)
    if a.std() == 0 or p.std() == 0:
        return float("nan")
    return float(100.0 * np.clip(np.corrcoef(a, p)[0, 1], -1.0, 1.0))


def sign_agreement(actual, predicted) -> float:
    return float(100.0 * np.mean(np.sign(actual) == np.sign(predicted)))


def msfe(actual, predicted) -> float:
    e = np.asarray(actual, float) - np.asarray(predicted, float)
    return float(np.mean(e * e))


@dataclass(frozen=True)
class ModelSpec:
    name: str
    regressors: tuple = ()


@dataclass(frozen=True)
class ForecastReport:
    model_id: str
    in_correlation_accuracy: float
    residual_std_error: float
    out_correlation_accuracy: float
    msfe: float
    sign_agreement: float
    n_train: int
    n_test: int

    @property
    def in_sample(self) -> dict:
        return {"correlation_accuracy": self.in_correlation_accuracy, "residual_std_error": self.residual_std_error}

    @property
    def out_of_sample(self) -> dict:
        return {"correlation_accuracy": self.out_correlation_accuracy, "msfe": self.msfe}


def evaluate(model: ModelSpec, train: Sample, test: Sample) -> ForecastReport:
    """Fit on ``train`` once, predict every ``test`` row with those coefficients."""
    Xtr = train.columns(model.regressors)
    fit = ols_nw(train.y, Xtr, lag=0)
    Xte = test.columns(model.regressors)
    pred = fit.predict(Xte, n=test.n)
    actual = test.y.values
    return ForecastReport(
        model_id=model.name,
        in_correlation_accuracy=correlation_accuracy(train.y.values, fit.fitted),
        residual_std_error=fit.residual_std_error,
        out_correlation_accuracy=correlation_accuracy(actual, pred),
        msfe=msfe(actual, pred),
        sign_agreement=sign_agreement(actual, pred),
        n_train=train.n,
        n_test=test.n,
    )


def comparison_table(reports: Sequence[ForecastReport], name: str = "table_3_7_forecast",
                     label: str = "Models") -> Table:
    """One row per model; the lowest-MSFE model is starred."""
    t = Table(name, [label, "In-sample Correlation Accuracy (%)", "Residual Std. error",
                     "Out-of-sample Correlation Accuracy (%)", "MSFE", "Sign agreement (%)",
                     "n_train", "n_test"],
              title="In-sample and out-of-sample accuracy", note="* indicates best predictive model (lowest MSFE)")
    best = int(np.nanargmin([r.msfe for r in reports])) if reports else -1
    for k, r in enumerate(reports):
        mark = "*" if k == best else ""
        t.add([r.model_id + mark, r.in_correlation_accuracy, r.residual_std_error,
               r.out_correlation_accuracy, r.msfe, r.sign_agreement, r.n_train, r.n_test])
    return t
