"""Pipeline configuration read from a sectioned INI file.

Relative paths are resolved against the directory holding the config file.
Every key has a default except the four required inputs (macro, housing,
returns, controls); see ``config/example.ini`` for an annotated copy.
"""
from __future__ import annotations

import configparser
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

from .data import TRANSFORMS
from .errors import ConfigError, MissingInputFile
from .pca import MODES

OUTPUT_ENV = "HOUSING_RISK_OUTPUT"
REQUIRED_INPUTS = ("macro", "housing", "returns", "controls")
OPTIONAL_INPUTS = ("nber", "vix", "econ")

DEFAULTS = {
    "data": {"date_column": "date", "min_months": "120"},
    "factor": {"mode": "correlation"},
    "tgarch": {"restarts": "20", "max_evals": "20000", "xtol": "1e-8", "jitter": "0.5",
               "standardize": "true", "workers": "4"},
    "index": {"mode": "covariance", "name": "H"},
    "regression": {"dependents": "", "lag": "1", "quantiles": "0.25, 0.5, 0.75, 0.95",
                   "nw_lag": "auto", "n_boot": "499"},
    "selection": {"candidates": "", "always_include": "Mkt-RF, SMB, HML", "top_k": "20"},
    "breaks": {"dependent": "", "regressors": "H, Mkt-RF, SMB, HML", "max_breaks": "5",
               "trim": "0.15", "subsample": "last", "controls": "Mkt-RF, SMB, HML"},
    "forecast": {"ratio": "0.8", "dependent": "", "ff_factors": "Mkt-RF, SMB, HML"},
    "run": {"seed": "0"},
}


def _list(text: str) -> tuple:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


@dataclass(frozen=True)
class TGarchSettings:
    restarts: int = 20
    max_evals: int = 20000
    xtol: float = 1e-8
    jitter: float = 0.5
    standardize: bool = True
    workers: int = 4


@dataclass(frozen=True)
class PipelineConfig:
    paths: dict
    output: Path
    date_column: str = "date"
    min_months: int = 120
    macro_transforms: dict = field(default_factory=dict)
    housing_transforms: dict = field(default_factory=dict)
    factor_mode: str = "correlation"
    tgarch: TGarchSettings = TGarchSettings()
    index_mode: str = "covariance"
    index_name: str = "H"
    dependents: tuple = ()
    lag: int = 1
    quantiles: tuple = (0.25, 0.5, 0.75, 0.95)
    nw_lag: object = "auto"
    n_boot: int = 499
    candidates: tuple = ()
    always_include: tuple = ("Mkt-RF", "SMB", "HML")
    top_k: int = 20
    break_dependent: str = ""
    break_regressors: tuple = ("H", "Mkt-RF", "SMB", "HML")
    max_breaks: int = 5
    trim: float = 0.15
    subsample: str = "last"
    subsample_controls: tuple = ("Mkt-RF", "SMB", "HML")
    ratio: float = 0.8
    forecast_dependent: str = ""
    ff_factors: tuple = ("Mkt-RF", "SMB", "HML")
    seed: int = 0
    source: Path | None = None
    config_sha256: str = ""

    def path(self, role: str) -> Path | None:
        return self.paths.get(role)

    def transform_for(self, group: str, column: str) -> str:
        table = self.macro_transforms if group == "macro" else self.housing_transforms
        return table.get(column, table.get("default", "none"))

    def validate(self) -> "PipelineConfig":
        """Check every referenced input exists; missing files raise :class:`MissingInputFile`."""
        for role in REQUIRED_INPUTS:
            p = self.paths.get(role)
            if p is None:
                raise ConfigError(f"[paths] {role} is required")
            if not Path(p).is_file():
                raise MissingInputFile(p, role)
        for role in OPTIONAL_INPUTS:
            p = self.paths.get(role)
            if p is not None and not Path(p).is_file():
                raise MissingInputFile(p, role)
        return self

    def with_overrides(self, output=None, seed=None) -> "PipelineConfig":
        import dataclasses

        kw = {}
        if output is not None:
            kw["output"] = Path(output)
        if seed is not None:
            kw["seed"] = int(seed)
        return dataclasses.replace(self, **kw) if kw else self


def _transforms(cp, section: str) -> dict:
    out = {}
    if cp.has_section(section):
        for key, val in cp.items(section):
            kind = val.strip()
            if kind not in TRANSFORMS:
                raise ConfigError(f"[{section}] {key}: unknown transform {kind!r}; expected one of {TRANSFORMS}")
            out[key] = kind
    return out


def load_config(path, output=None, seed=None) -> PipelineConfig:
    """Parse ``path``. Output directory precedence: ``output`` argument,
    then ``$HOUSING_RISK_OUTPUT``, then ``[paths] output``, then ``./output``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_bytes()
    # keys are case-sensitive because they name data columns
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(raw.decode("utf-8"), source=str(path))
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    base = path.parent.resolve()

    def get(section, key):
        if cp.has_option(section, key):
            return cp.get(section, key)
        return DEFAULTS[section][key]

    paths = {}
    if cp.has_section("paths"):
        for role, val in cp.items("paths"):
            if role == "output" or not val.strip():
                continue
            if role not in REQUIRED_INPUTS + OPTIONAL_INPUTS:
                raise ConfigError(f"[paths] unknown key {role!r}")
            paths[role] = (base / val.strip()).resolve()
    if output or os.environ.get(OUTPUT_ENV):
        # command-line and environment overrides are relative to the working directory
        out = Path(output or os.environ[OUTPUT_ENV]).resolve()
    else:
        out = base / (cp.get("paths", "output", fallback="").strip() or "output")

    try:
        nw = get("regression", "nw_lag").strip()
        cfg = PipelineConfig(
            paths=paths,
            output=out,
            date_column=get("data", "date_column").strip(),
            min_months=int(get("data", "min_months")),
            macro_transforms=_transforms(cp, "macro_transforms"),
            housing_transforms=_transforms(cp, "housing_transforms"),
            factor_mode=get("factor", "mode").strip(),
            tgarch=TGarchSettings(
                restarts=int(get("tgarch", "restarts")),
                max_evals=int(get("tgarch", "max_evals")),
                xtol=float(get("tgarch", "xtol")),
                jitter=float(get("tgarch", "jitter")),
                standardize=_bool(get("tgarch", "standardize"), "tgarch.standardize"),
                workers=int(get("tgarch", "workers")),
            ),
            index_mode=get("index", "mode").strip(),
            index_name=get("index", "name").strip(),
            dependents=_list(get("regression", "dependents")),
            lag=int(get("regression", "lag")),
            quantiles=tuple(float(q) for q in _list(get("regression", "quantiles"))),
            nw_lag=nw if nw == "auto" else int(nw),
            n_boot=int(get("regression", "n_boot")),
            candidates=_list(get("selection", "candidates")),
            always_include=_list(get("selection", "always_include")),
            top_k=int(get("selection", "top_k")),
            break_dependent=get("breaks", "dependent").strip(),
            break_regressors=_list(get("breaks", "regressors")),
            max_breaks=int(get("breaks", "max_breaks")),
            trim=float(get("breaks", "trim")),
            subsample=get("breaks", "subsample").strip(),
            subsample_controls=_list(get("breaks", "controls")),
            ratio=float(get("forecast", "ratio")),
            forecast_dependent=get("forecast", "dependent").strip(),
            ff_factors=_list(get("forecast", "ff_factors")),
            seed=int(get("run", "seed")),
            source=path.resolve(),
            config_sha256=hashlib.sha256(raw).hexdigest(),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for mode in (cfg.factor_mode, cfg.index_mode):
        if mode not in MODES:
            raise ConfigError(f"PCA mode must be one of {MODES}, got {mode!r}")
    if cfg.tgarch.restarts < 1 or cfg.tgarch.workers < 1:
        raise ConfigError("tgarch.restarts and tgarch.workers must be positive")
    return cfg.with_overrides(seed=seed)
