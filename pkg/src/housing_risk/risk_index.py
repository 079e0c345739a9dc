"""Housing risk index: first principal component of conditional volatilities."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Panel, TimeSeries, standardize
from .errors import DateMisalignment, TooShort
from .pca import PcaModel, fit_pca, scores
from .tables import Table

HOUSING_IDS = ("HOUST", "PERMIT", "HPRICE", "HSTMW", "HSTNE", "HSTSOU", "HSTW", "HSOLD", "SATSOLD", "MORINT")


def build_volatility_panel(fits: Sequence, names: Sequence[str] | None = None) -> Panel:
    """Panel of conditional standard deviations, one column per fit."""
    vols = [f.volatility for f in fits]
    if names is not None:
        vols = [v.renamed(nm) for v, nm in zip(vols, names, strict=True)]
    axis = vols[0].dates
    for v in vols[1:]:
        if v.dates.shape != axis.shape or not np.array_equal(v.dates, axis):
            raise DateMisalignment(f"volatility of {v.id} is not on the common date axis")
    return Panel(tuple(vols))


@dataclass(frozen=True)
class RiskIndex:
    ids: tuple
    loadings: np.ndarray
    raw: TimeSeries
    standardized: TimeSeries
    explained_share: float
    model: PcaModel

    def loadings_table(self, name: str = "index_loadings") -> Table:
        t = Table(name, ["variable", "loading", "center", "scale"], title="Risk index weights (PC1)")
        for v, w, c, s in zip(self.ids, self.loadings, self.model.centers, self.model.scales):
            t.add([v, float(w), float(c), float(s)])
        return t


def build_risk_index(vol_panel: Panel, mode: str = "covariance", name: str = "H") -> RiskIndex:
    """PC1 score of the volatility panel and its z-scored version."""
    if vol_panel.n < 24:
        raise TooShort(f"risk index needs at least 24 months, got {vol_panel.n}")
    model = fit_pca(vol_panel, mode)
    pc1 = scores(model, vol_panel, 1)[0].series.renamed(f"{name}_raw")
    h = standardize(pc1).renamed(name)
    return RiskIndex(tuple(vol_panel.ids), model.loadings[:, 0].copy(), pc1, h,
                     float(model.proportions[0]), model)


def index_from_loadings(vol_panel: Panel, loadings, centers, scales, name: str = "H") -> TimeSeries:
    """Recompute the standardized index from stored weights."""
    z = (vol_panel.to_array() - np.asarray(centers, float)) / np.asarray(scales, float)
    raw = TimeSeries(f"{name}_raw", vol_panel.dates, z @ np.asarray(loadings, float))
    return standardize(raw).renamed(name)
