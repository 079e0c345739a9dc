"""Housing risk index toolkit: threshold-GARCH volatilities, a PCA risk index,
and predictive-regression, selection, break and forecast diagnostics."""

__version__ = "0.1.0"

from .data import Panel, TimeSeries, describe, load_panel, transform, write_panel  # noqa: E402
from .errors import HousingRiskError  # noqa: E402
from .pca import fit_pca, scores  # noqa: E402
from .regression import ols_nw, predictive_regression, quantile_fit  # noqa: E402
from .risk_index import build_risk_index  # noqa: E402
from .tgarch import fit_tgarch, simulate_tgarch, tgarch_filter  # noqa: E402

__all__ = [
    "Panel", "TimeSeries", "describe", "load_panel", "transform", "write_panel", "HousingRiskError",
    "fit_pca", "scores", "ols_nw", "predictive_regression", "quantile_fit", "build_risk_index",
    "fit_tgarch", "simulate_tgarch", "tgarch_filter",
]
