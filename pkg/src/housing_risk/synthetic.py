"""Synthetic input bundle with known ground truth.

One latent macro factor drives a 76-column macro panel; ten housing series
carry GJR-type conditional variances scaled by a shared, persistent
volatility component; REIT excess returns load on the standardized lagged
common volatility (the true index) and on Fama-French-style factors.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import Panel, month_range, write_panel
from .errors import NonStationaryParams
from .risk_index import HOUSING_IDS

CONTROL_IDS = ("Mkt-RF", "SMB", "HML", "MOM", "D12", "E12", "b/m", "lty", "ntis", "svar", "dfy", "Skew")
FF3 = ("Mkt-RF", "SMB", "HML")
RETURN_IDS = ("ALLREIT", "EQREIT")
ECON_IDS = ("CFNAI", "KCFSI", "IPG")


@dataclass(frozen=True)
class SimulatorSettings:
    n: int = 576
    start: str = "1971-01"
    n_macro: int = 76
    factor_ar: float = 0.7
    macro_noise: float = 1.0
    housing_ar: float = 0.3
    housing_alpha: float = 0.05
    housing_phi: float = 0.85
    housing_gamma: float = 0.05
    common_vol_ar: float = 0.98
    common_vol_sd: float = 0.25
    index_loading: float = 0.1
    ff_loadings: tuple = (0.3, 0.15, 0.15)
    return_noise: float = 0.3
    econ_loadings: tuple = (-0.1, 0.1, -0.05)
    econ_noise: float = 0.5
    nber_threshold: float = -1.0
    burn: int = 200

    def check(self) -> None:
        if self.housing_alpha + self.housing_phi + self.housing_gamma / 2 >= 1:
            raise NonStationaryParams("housing GARCH parameters imply alpha + phi + gamma/2 >= 1")
        if not (abs(self.factor_ar) < 1 and abs(self.common_vol_ar) < 1 and abs(self.housing_ar) < 1):
            raise NonStationaryParams("autoregressive coefficients must lie inside the unit circle")


def _ar1(rng, n, rho, sd, burn):
    e = rng.standard_normal(n + burn) * sd
    out = np.empty(n + burn)
    prev = 0.0
    for t in range(n + burn):
        prev = rho * prev + e[t]
        out[t] = prev
    return out[burn:]


def simulate(settings: SimulatorSettings | None = None, seed: int = 0) -> dict:
    """Generate all synthetic series; returns panels plus a truth dict."""
    s = settings or SimulatorSettings()
    s.check()
    rng = np.random.default_rng(seed)
    n, burn = s.n, s.burn
    total = n + burn
    dates = month_range(s.start, n)

    # latent macro factor and macro panel
    g = _ar1(rng, total, s.factor_ar, 1.0, 0)
    g = g / g[burn:].std()
    lam = rng.uniform(0.4, 1.0, s.n_macro) * rng.choice([-1.0, 1.0], s.n_macro)
    macro = g[burn:, None] * lam + s.macro_noise * rng.standard_normal((n, s.n_macro))
    macro_ids = [f"M{j + 1:02d}" for j in range(s.n_macro)]

    # shared volatility component
    lvol = _ar1(rng, total, s.common_vol_ar, s.common_vol_sd, 0)
    cvol = np.exp(lvol - lvol[burn:].mean())

    # housing series
    k = len(HOUSING_IDS)
    scales = rng.uniform(0.5, 3.0, k)
    fac_load = rng.uniform(0.1, 0.4, k)
    omega = 1.0 - s.housing_alpha - s.housing_phi - s.housing_gamma / 2
    housing = np.empty((total, k))
    q = np.ones(k)
    eta = np.zeros(k)
    x = np.zeros(k)
    z = rng.standard_normal((total, k))
    for t in range(total):
        if t > 0:
            neg = (eta < 0).astype(float)
            q = omega + s.housing_alpha * eta**2 + s.housing_gamma * eta**2 * neg + s.housing_phi * q
        eta = np.sqrt(q) * z[t]
        eps = scales * np.sqrt(cvol[t]) * eta
        x = s.housing_ar * x + fac_load * (g[t - 1] if t else 0.0) + eps
        housing[t] = x
    housing = housing[burn:]

    true_vol = np.sqrt(cvol[burn:])
    true_index = (true_vol - true_vol.mean()) / true_vol.std(ddof=1)

    # controls: three priced factors, one momentum-like factor, eight persistent predictors
    ctrl = np.empty((n, len(CONTROL_IDS)))
    ctrl[:, :4] = rng.standard_normal((n, 4))
    for j in range(4, len(CONTROL_IDS)):
        ctrl[:, j] = _ar1(rng, n, 0.9, 0.3, 100)

    # returns: r_t = loading * H*_{t-1} + FF3 + noise
    lagged = np.concatenate([[0.0], true_index[:-1]])
    base = s.index_loading * lagged + ctrl[:, :3] @ np.asarray(s.ff_loadings)
    ret = np.column_stack([
        base + s.return_noise * rng.standard_normal(n),
        base + s.return_noise * rng.standard_normal(n),
    ])[1:]
    rdates = dates[1:]

    nber = (g[burn:] < s.nber_threshold).astype(float)
    vix = 15.0 + 5.0 * true_index + rng.standard_normal(n)
    econ = np.empty((n - 1, len(ECON_IDS)))
    for j, b in enumerate(s.econ_loadings):
        econ[:, j] = b * true_index[:-1] + s.econ_noise * rng.standard_normal(n - 1)
    econ_dates = dates[1:]  # Index_{t+1} = a + b H*_t + e

    truth = {
        "seed": seed,
        "settings": asdict(s),
        "macro_loadings": lam.tolist(),
        "housing_scales": scales.tolist(),
        "housing_factor_loadings": fac_load.tolist(),
        "housing_garch": {"omega": omega, "alpha": s.housing_alpha, "phi": s.housing_phi,
                          "gamma": s.housing_gamma},
        "index_loading": s.index_loading,
        "ff_loadings": dict(zip(FF3, s.ff_loadings)),
        "econ_loadings": dict(zip(ECON_IDS, s.econ_loadings)),
    }
    return {
        "macro": Panel.from_array(macro_ids, dates, macro),
        "housing": Panel.from_array(HOUSING_IDS, dates, housing),
        "returns": Panel.from_array(RETURN_IDS, rdates, ret),
        "controls": Panel.from_array(CONTROL_IDS, dates, ctrl),
        "nber": Panel.from_array(("NBER",), dates, nber),
        "vix": Panel.from_array(("VIX",), dates, vix),
        "econ": Panel.from_array(ECON_IDS, econ_dates, econ),
        "latent": Panel.from_array(("factor", "common_vol", "true_index"), dates,
                                   np.column_stack([g[burn:], true_vol, true_index])),
        "truth": truth,
    }


FILES = {
    "macro": "macro.csv",
    "housing": "housing.csv",
    "returns": "returns.csv",
    "controls": "controls.csv",
    "nber": "nber.csv",
    "vix": "vix.csv",
    "econ": "econ.csv",
    "latent": "truth_series.csv",
}

CONFIG_TEMPLATE = """\
# Generated by `housing-risk simulate`; paths are relative to this file.
[paths]
macro = macro.csv
housing = housing.csv
returns = returns.csv
controls = controls.csv
nber = nber.csv
vix = vix.csv
econ = econ.csv

[run]
seed = {seed}
"""


def write_bundle(directory, settings: SimulatorSettings | None = None, seed: int = 0) -> dict:
    """Write the synthetic CSVs, ``truth.json`` and a ready-to-run ``config.ini``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    sim = simulate(settings, seed)
    paths = {}
    for key, fname in FILES.items():
        paths[key] = write_panel(sim[key], directory / fname)
    (directory / "truth.json").write_text(json.dumps(sim["truth"], indent=2, sort_keys=True) + "\n",
                                          encoding="utf-8")
    (directory / "config.ini").write_text(CONFIG_TEMPLATE.format(seed=seed), encoding="utf-8")
    return {"paths": paths, "truth": sim["truth"], "config": directory / "config.ini"}
