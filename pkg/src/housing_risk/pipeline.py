"""End-to-end run: factor -> T-GARCH -> index -> regressions -> selection -> breaks -> forecast.

Each stage reads its inputs from files (raw inputs or CSVs written by an
earlier stage) and writes its outputs under the configured output
directory, so a stage rerun from cached intermediates reproduces the same
bytes as a full run.
"""
from __future__ import annotations

import hashlib
import json
import logging
import platform
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .breaks import find_breaks, subsample_fit, subsample_table
from .config import PipelineConfig
from .data import (Panel, TimeSeries, align, corr_matrix, describe, load_panel, standardize,
                   transform, write_panel)
from .errors import ConfigError, HousingRiskError, SchemaMismatch, TooShort
from .forecast import ModelSpec, comparison_table, evaluate, split_train_test
from .pca import fit_pca, scores
from .regression import CONST, PredictiveSpec, build_design, predictive_regression, quantile_label
from .risk_index import build_risk_index, build_volatility_panel
from .selection import enumerate_models
from .tables import Table, read_csv_rows, stars
from .tgarch import TGarchConfig, fit_tgarch

log = logging.getLogger(__name__)

STAGES = ("factor", "tgarch", "index", "regress", "select", "breaks", "forecast")

LAYOUT = {
    "factor": "factor/macro_factor.csv",
    "volatility": "tgarch/volatility_panel.csv",
    "covariance": "tgarch/covariance_panel.csv",
    "index": "index/risk_index.csv",
    "selected": "selection/selected_covariates.csv",
}


def out_path(cfg: PipelineConfig, key: str) -> Path:
    return Path(cfg.output) / LAYOUT[key]


def _stage_dir(cfg: PipelineConfig, name: str) -> Path:
    d = Path(cfg.output) / name
    d.mkdir(parents=True, exist_ok=True)
    return d


# -- inputs ------------------------------------------------------------------------

def load_input(cfg: PipelineConfig, role: str, required: bool = True) -> Panel | None:
    p = cfg.path(role)
    if p is None:
        if required:
            raise ConfigError(f"[paths] {role} is required")
        return None
    return load_panel(p, cfg.date_column)


def _transformed(cfg: PipelineConfig, group: str) -> Panel:
    raw = load_input(cfg, group)
    return align([transform(c, cfg.transform_for(group, c.id)) for c in raw.columns])


def _read_series(path: Path, column: str) -> TimeSeries:
    if not path.is_file():
        raise ConfigError(f"intermediate file missing: {path} (run the upstream stage first)")
    return load_panel(path, "date", [column])[column]


def _dependents(cfg: PipelineConfig, returns: Panel) -> list[str]:
    deps = list(cfg.dependents) or list(returns.ids)
    missing = [d for d in deps if d not in returns.ids]
    if missing:
        raise SchemaMismatch(f"dependent variables not in returns file: {missing}")
    return deps


def _spec(cfg: PipelineConfig, quantiles=None, **kw) -> PredictiveSpec:
    return PredictiveSpec(lag_index=kw.pop("lag_index", cfg.lag), quantiles=tuple(cfg.quantiles if quantiles is None
                                                                                else quantiles),
                          nw_lag=cfg.nw_lag, n_boot=cfg.n_boot, seed=cfg.seed, **kw)


def _adj(fit) -> str:
    # fraction and percent, since published tables mix the two
    return f"{fit.adj_r2:.4f} ({100 * fit.adj_r2:.2f}%)"


# -- stage: factor -----------------------------------------------------------------

def stage_factor(cfg: PipelineConfig) -> dict:
    macro = _transformed(cfg, "macro")
    model = fit_pca(macro, cfg.factor_mode)
    f1 = scores(model, macro, 1)[0].series.renamed("F1")
    d = _stage_dir(cfg, "factor")
    write_panel(Panel((f1,)), out_path(cfg, "factor"))
    _records_table("factor_proportions", model.proportions_table(), "Macro factor: importance of components").write(d)
    _records_table("factor_loadings", model.loadings_table(), "Macro factor: loadings").write(d)
    return {"share": float(model.proportions[0]), "n": macro.n, "k": macro.k}


def _records_table(name: str, records: list[dict], title: str) -> Table:
    t = Table(name, list(records[0]), title=title)
    for r in records:
        t.add([float(v) if isinstance(v, (np.floating, float)) else v for v in r.values()])
    return t


# -- stage: tgarch -----------------------------------------------------------------

PARAM_COLUMNS = [f"{p}_{eq}" for eq in ("x", "f", "xf") for p in ("omega", "alpha", "phi", "gamma")]


def stage_tgarch(cfg: PipelineConfig) -> dict:
    housing = _transformed(cfg, "housing")
    f = _read_series(out_path(cfg, "factor"), "F1")
    s = cfg.tgarch

    def fit_one(j):
        col = housing.columns[j]
        x = standardize(col) if s.standardize else col
        conf = TGarchConfig(restarts=s.restarts, max_evals=s.max_evals, xtol=s.xtol, jitter=s.jitter,
                            seed=cfg.seed + j)
        return fit_tgarch(x, f, conf)

    # one seed per variable: results do not depend on the worker count
    with ThreadPoolExecutor(max_workers=s.workers) as pool:
        fits = list(pool.map(fit_one, range(housing.k)))
    names = list(housing.ids)
    d = _stage_dir(cfg, "tgarch")
    write_panel(build_volatility_panel(fits, names), out_path(cfg, "volatility"))
    cov = [fit.path.sigma_if.renamed(nm) for fit, nm in zip(fits, names)]
    write_panel(Panel(tuple(cov)), out_path(cfg, "covariance"))
    t = Table("tgarch_params", ["variable", *PARAM_COLUMNS, "loglik", "initial_loglik", "evaluations",
                                "converged", "n"], title="Bivariate threshold-GARCH estimates")
    for nm, fit in zip(names, fits):
        tr = fit.optimizer_trace
        t.add([nm, *(float(v) for v in fit.params.vector()), fit.loglik, fit.initial_loglik,
               tr.evaluations, int(tr.converged), fit.var.n])
    t.write(d)
    v = Table("var_coefficients", ["variable", "b0_x", "b0_f", "x_on_x", "x_on_f", "f_on_x", "f_on_f"],
              title="VAR(1) mean equations")
    for nm, fit in zip(names, fits):
        b0, b1 = fit.var.intercepts, fit.var.coef
        v.add([nm, float(b0[0]), float(b0[1]), float(b1[0, 0]), float(b1[0, 1]), float(b1[1, 0]), float(b1[1, 1])])
    v.write(d)
    return {"fits": len(fits)}


# -- stage: index ------------------------------------------------------------------

def stage_index(cfg: PipelineConfig) -> dict:
    vol = load_panel(out_path(cfg, "volatility"), "date")
    ri = build_risk_index(vol, cfg.index_mode, cfg.index_name)
    d = _stage_dir(cfg, "index")
    write_panel(Panel((ri.standardized, ri.raw)), out_path(cfg, "index"))
    ri.loadings_table().write(d)
    _records_table("index_proportions", ri.model.proportions_table(), "Risk index: importance of components").write(d)
    _records_table("index_all_loadings", ri.model.loadings_table(), "Risk index: loadings").write(d)

    a = Table("table_3_1_panel_a", ["Statistic", "N", "Mean", "St. Dev.", "Min", "Pctl(25)", "Pctl(75)", "Max"],
              title="Housing risk factors (conditional volatilities)")
    for c in vol.columns:
        v = c.values
        a.add([c.id, len(v), float(v.mean()), float(v.std(ddof=1)), float(v.min()),
               float(np.percentile(v, 25)), float(np.percentile(v, 75)), float(v.max())])
    a.write(d)
    cm = corr_matrix(vol)
    b = Table("table_3_1_panel_b", ["", *cm.ids], title="Correlation matrix of the housing risk factors",
              note="p < .001 '***', p < .01 '**', p < .05 '*'")
    for row in cm.lower_triangle_rows():
        b.add(row)
    b.write(d)
    controls = load_input(cfg, "controls")
    joint = align([*vol.columns, *controls.columns])
    cj = corr_matrix(joint)
    k = vol.k
    c = Table("table_3_1_panel_c", ["", *vol.ids],
              title="Correlation of the housing risk factors with macro-finance factors",
              note="p < .001 '***', p < .01 '**', p < .05 '*'")
    for i, cid in enumerate(controls.ids):
        c.add([cid, *(f"{cj.rho[k + i, j]:.3f}{cj.stars[k + i][j]}" for j in range(k))])
    c.write(d)
    return {"explained_share": ri.explained_share}


# -- stage: regress ----------------------------------------------------------------

def _index(cfg: PipelineConfig) -> TimeSeries:
    return _read_series(out_path(cfg, "index"), cfg.index_name)


def stage_regress(cfg: PipelineConfig) -> dict:
    returns = load_input(cfg, "returns")
    controls = load_input(cfg, "controls")
    nber = load_input(cfg, "nber", required=False)
    vix = load_input(cfg, "vix", required=False)
    econ = load_input(cfg, "econ", required=False)
    h = _index(cfg)
    deps = _dependents(cfg, returns)
    d = _stage_dir(cfg, "tables")
    key = cfg.index_name

    # Table 3.3: descriptive statistics
    a = Table("table_3_3_panel_a", ["Series", "N", "Mean", "Std. Dev.", "Min", "Max", "Skew", "Kurt", "JB", "Q (1)"],
              title="Descriptive statistics of monthly returns", note="*p<0.1; **p<0.05; ***p<0.01")
    for dep in deps:
        s = describe(returns[dep])
        jb = f"{s.jarque_bera.statistic:.2f}{stars(s.jarque_bera.pvalue)}" if s.jarque_bera else ""
        q1 = f"{s.ljung_box_q1.statistic:.2f}{stars(s.ljung_box_q1.pvalue)}" if s.ljung_box_q1 else ""
        a.add([dep, s.n, s.mean, s.std_dev, s.min, s.max, s.skewness, s.excess_kurtosis, jb, q1])
    a.write(d)
    b = Table("table_3_3_panel_b", ["Variables", "N", "Mean", "Std. Dev.", "Min", "Max", "Skew", "Kurt"],
              title="Summary statistics of predictive variables")
    for s in [describe(h.renamed("Housing Risk Index"))] + [describe(c) for c in controls.columns]:
        b.add([s.id, s.n, s.mean, s.std_dev, s.min, s.max, s.skewness, s.excess_kurtosis])
    b.write(d)

    # Table 3.4: baseline OLS variants (Panel A) and univariate quantiles (Panel B)
    variants = [("Univariate OLS", None)]
    if nber is not None:
        variants.append(("OLS (with NBER dummy)", nber))
    if vix is not None:
        variants.append(("OLS (with VIX)", vix))
    pa = Table("table_3_4_panel_a", ["Housing beta", *deps], title="Baseline regression: OLS",
               note="*p<0.1; **p<0.05; ***p<0.01; Newey-West standard errors in parentheses; "
                    "Adj R-Sq as fraction (percent)")
    pb = Table("table_3_4_panel_b", ["Housing beta", *deps], title="Baseline regression: univariate quantile",
               note="*p<0.1; **p<0.05; ***p<0.01; bootstrap standard errors in parentheses")
    summary = {}
    for label, extra in variants:
        fits = {dep: predictive_regression(returns[dep], h, extra, _spec(cfg, quantiles=()))[0] for dep in deps}
        pa.add([label, *(fits[x].cell(key) for x in deps)])
        pa.add(["Adj R-Sq", *(_adj(fits[x]) for x in deps)])
        pa.add(["N", *(fits[x].n for x in deps)])
        if extra is None:
            summary = {dep: {"beta": fits[dep].coef(key), "p": float(fits[dep].p_values[1])} for dep in deps}
    qfits = {dep: predictive_regression(returns[dep], h, None, _spec(cfg))[1:] for dep in deps}
    for k, tau in enumerate(cfg.quantiles):
        pb.add([quantile_label(tau, k + 1), *(qfits[x][k].cell(key) for x in deps)])
    if cfg.quantiles:
        pb.add(["N", *(qfits[x][0].n for x in deps)])
    pa.write(d)
    pb.write(d)

    # Table 3.8: next-month economic conditions on the current index
    targets = []
    if nber is not None:
        targets += list(nber.columns)
    if econ is not None:
        targets += list(econ.columns)
    if targets:
        efits = [predictive_regression(s, h, None, _spec(cfg, quantiles=(), lag_index=0, lead_dependent=1))[0]
                 for s in targets]
        t8 = Table("table_3_8_economic_conditions", ["", *(s.id for s in targets)],
                   title="Regression of next-month economic conditions on the housing risk index",
                   note="*p<0.1; **p<0.05; ***p<0.01; Newey-West standard errors in parentheses")
        t8.add(["Housing Risk Index", *(f.cell(key) for f in efits)])
        t8.add(["Constant", *(f.cell(CONST) for f in efits)])
        t8.add(["Observations", *(f.n for f in efits)])
        t8.add(["R2", *(round(f.r2, 6) for f in efits)])
        t8.write(d)
    return {"univariate": summary}


def summary_rows_table(fits: dict, key: str, controls=(), name: str = "regress") -> Table:
    """Columns per dependent; OLS rows for the index, controls, constant, Adj R-Sq and N,
    then one row per quantile fit (index coefficient)."""
    deps = list(fits)
    t = Table(name, ["", *deps], title="Predictive regressions",
              note="*p<0.1; **p<0.05; ***p<0.01; Newey-West (OLS) or bootstrap (quantile) standard errors")
    first = fits[deps[0]]
    ols = [f for f in first if not hasattr(f, "tau")]
    if ols:
        for label in (key, *controls, CONST):
            t.add([label, *(fits[x][0].cell(label) for x in deps)])
        t.add(["Adj R-Sq", *(_adj(fits[x][0]) for x in deps)])
        t.add(["N", *(fits[x][0].n for x in deps)])
    qs = [f for f in first if hasattr(f, "tau")]
    off = len(ols)
    for k, q in enumerate(qs):
        t.add([quantile_label(q.tau, k + 1), *(fits[x][off + k].cell(key) for x in deps)])
    if qs:
        t.add(["N (quantile)", *(fits[x][off].n for x in deps)])
    return t


# -- stage: select -----------------------------------------------------------------

def stage_select(cfg: PipelineConfig) -> dict:
    returns = load_input(cfg, "returns")
    controls = load_input(cfg, "controls")
    h = _index(cfg)
    deps = _dependents(cfg, returns)
    cands = list(cfg.candidates) or list(controls.ids)
    missing = [c for c in cands if c not in controls.ids]
    if missing:
        raise SchemaMismatch(f"selection candidates not in controls file: {missing}")
    pinned = [c for c in cfg.always_include if c in cands]
    d = _stage_dir(cfg, "selection")
    chosen = {}
    for dep in deps:
        # same sample as the multivariate regression, which includes the lagged index
        y, X = build_design(returns[dep], h, controls.select(cands), _spec(cfg))
        ranking = enumerate_models(y, X.select(cands), pinned, cfg.top_k)
        t = ranking.table(f"selection_{_slug(dep)}")
        t.title = f"{t.title}: {dep}"
        t.write(d)
        chosen[dep] = ranking.best.included
    sel = Table("selected_covariates", ["dependent", "included"], title="Selected covariates (top model)")
    for dep in deps:
        sel.add([dep, " ".join(chosen[dep])])
    sel.write(d, markdown=False)

    tabs = _dir_tables(cfg)
    key = cfg.index_name
    order = [c for c in cands if any(c in chosen[dep] for dep in deps)]
    pa = Table("table_3_5_panel_a", ["Predictors", *deps], title="Housing risk beta with selected control variables",
               note="*p<0.1; **p<0.05; ***p<0.01")
    pb = Table("table_3_5_panel_b", ["Housing beta", *deps], title="Quantile regression with selected control variables",
               note="*p<0.1; **p<0.05; ***p<0.01")
    fits = {dep: predictive_regression(returns[dep], h, controls.select(chosen[dep]) if chosen[dep] else None,
                                       _spec(cfg)) for dep in deps}
    pa.add(["Housing risk index", *(fits[x][0].cell(key) for x in deps)])
    for c in order:
        pa.add([c, *(fits[x][0].cell(c) if c in chosen[x] else "" for x in deps)])
    pa.add(["Adj R-Sq", *(_adj(fits[x][0]) for x in deps)])
    pa.add(["N", *(fits[x][0].n for x in deps)])
    for k, tau in enumerate(cfg.quantiles):
        pb.add([quantile_label(tau, k + 1), *(fits[x][k + 1].cell(key) for x in deps)])
    if cfg.quantiles:
        pb.add(["N", *(fits[x][1].n for x in deps)])
    pa.write(tabs)
    pb.write(tabs)
    return {"selected": {k: list(v) for k, v in chosen.items()}}


def _slug(name: str) -> str:
    return "".join(ch if ch.isalnum() else "_" for ch in name)


def _dir_tables(cfg: PipelineConfig) -> Path:
    return _stage_dir(cfg, "tables")


def read_selected(cfg: PipelineConfig) -> dict:
    path = out_path(cfg, "selected")
    if not path.is_file():
        raise ConfigError(f"intermediate file missing: {path} (run the select stage first)")
    _, rows = read_csv_rows(path)
    return {r[0]: tuple(r[1].split()) for r in rows}


# -- stage: breaks -----------------------------------------------------------------

def _split_regressors(cfg: PipelineConfig, names) -> tuple[bool, list[str]]:
    use_index = cfg.index_name in names
    return use_index, [n for n in names if n != cfg.index_name]


def stage_breaks(cfg: PipelineConfig) -> dict:
    returns = load_input(cfg, "returns")
    controls = load_input(cfg, "controls")
    h = _index(cfg)
    deps = _dependents(cfg, returns)
    dep = cfg.break_dependent or deps[0]
    if dep not in returns.ids:
        raise SchemaMismatch(f"break dependent {dep!r} not in returns file")
    use_h, ctrl = _split_regressors(cfg, cfg.break_regressors)
    y, X = build_design(returns[dep], h if use_h else None, controls.select(ctrl) if ctrl else None,
                        _spec(cfg, quantiles=()))
    bp = find_breaks(y, X, cfg.max_breaks, cfg.trim)
    d = _stage_dir(cfg, "breaks")
    for t in bp.tables():
        t.write(d)

    if cfg.subsample == "midpoint" or bp.chosen_m == 0:
        bd = y.dates[len(y) // 2 - 1]
    elif cfg.subsample == "last":
        bd = bp.break_dates[-1]
    elif cfg.subsample == "first":
        bd = bp.break_dates[0]
    else:
        bd = np.datetime64(cfg.subsample, "M")
    sub_ctrl = controls.select(cfg.subsample_controls) if cfg.subsample_controls else None
    results = {x: subsample_fit(returns[x], h, sub_ctrl, bd, _spec(cfg)) for x in deps}
    subsample_table(results, cfg.index_name).write(_dir_tables(cfg))
    return {"dependent": dep, "breaks": bp.labels, "chosen_m": bp.chosen_m}


# -- stage: forecast ---------------------------------------------------------------

def stage_forecast(cfg: PipelineConfig) -> dict:
    returns = load_input(cfg, "returns")
    controls = load_input(cfg, "controls")
    nber = load_input(cfg, "nber", required=False)
    h = _index(cfg)
    deps = _dependents(cfg, returns)
    dep = cfg.forecast_dependent or deps[0]
    if dep not in returns.ids:
        raise SchemaMismatch(f"forecast dependent {dep!r} not in returns file")
    selected = read_selected(cfg)
    key = cfg.index_name
    extra = list(controls.columns) + (list(nber.columns) if nber is not None else [])
    y, X = build_design(returns[dep], h, Panel(tuple(extra)), _spec(cfg, quantiles=()))
    train, test = split_train_test(y, X, cfg.ratio)
    models = [ModelSpec("Univariate", (key,))]
    if nber is not None:
        models.append(ModelSpec("Univariate with NBER dummy", (key, *nber.ids)))
    models.append(ModelSpec("Multivariate with risk factors", (key, *selected.get(dep, ()))))
    models.append(ModelSpec("Fama-French three-factors", tuple(cfg.ff_factors)))
    reports = [evaluate(m, train, test) for m in models]
    d = _dir_tables(cfg)
    comparison_table(reports, "table_3_7_panel_a").write(d)

    rows = []
    for x in deps:
        yx, Xx = build_design(returns[x], h, controls.select(cfg.ff_factors), _spec(cfg, quantiles=()))
        tr, te = split_train_test(yx, Xx, cfg.ratio)
        rows.append(evaluate(ModelSpec(x, (key, *cfg.ff_factors)), tr, te))
    t = comparison_table(rows, "table_3_7_panel_b", label="Dependent variable")
    t.title = "Housing risk beta with Fama-French three factors: in-sample and out-of-sample accuracy"
    t.write(d)
    return {"dependent": dep, "msfe": {r.model_id: r.msfe for r in reports}}


STAGE_FUNCS = {
    "factor": stage_factor,
    "tgarch": stage_tgarch,
    "index": stage_index,
    "regress": stage_regress,
    "select": stage_select,
    "breaks": stage_breaks,
    "forecast": stage_forecast,
}


def run_stage(name: str, cfg: PipelineConfig) -> dict:
    """Run one stage; errors keep their class but carry the stage name."""
    try:
        return STAGE_FUNCS[name](cfg)
    except HousingRiskError as exc:
        exc.stage = name
        exc.args = (f"[{name}] {exc}",)
        raise


# -- bundle --------------------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _versions() -> dict:
    import numba
    import scipy

    return {"housing_risk": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def check_sample(cfg: PipelineConfig) -> int:
    """The raw panels must overlap on at least ``min_months`` months."""
    cols = []
    for role in ("macro", "housing", "returns", "controls"):
        cols.extend(load_input(cfg, role).columns[:1])
    n = align(cols).n
    if n < cfg.min_months:
        raise TooShort(f"inputs share {n} months; need at least {cfg.min_months}")
    return n


def write_manifest(cfg: PipelineConfig, summaries: dict) -> Path:
    out = Path(cfg.output)
    inputs = {role: sha256_file(p) for role, p in sorted(cfg.paths.items())}
    run_key = hashlib.sha256(json.dumps({"config": cfg.config_sha256, "inputs": inputs, "seed": cfg.seed},
                                        sort_keys=True).encode()).hexdigest()
    files = sorted(p for p in out.rglob("*") if p.is_file() and p.name not in ("manifest.json",))
    manifest = {
        "run_id": run_key,
        "config_sha256": cfg.config_sha256,
        "inputs": inputs,
        "seed": cfg.seed,
        "versions": _versions(),
        "stages": summaries,
        "outputs": {p.relative_to(out).as_posix(): sha256_file(p) for p in files},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


REPORT_ORDER = [
    "factor/factor_proportions.md",
    "index/table_3_1_panel_a.md", "index/table_3_1_panel_b.md", "index/table_3_1_panel_c.md",
    "index/index_proportions.md", "index/index_loadings.md",
    "tgarch/tgarch_params.md",
    "tables/table_3_3_panel_a.md", "tables/table_3_3_panel_b.md",
    "tables/table_3_4_panel_a.md", "tables/table_3_4_panel_b.md",
    "tables/table_3_5_panel_a.md", "tables/table_3_5_panel_b.md",
    "breaks/breaks_dates.md", "breaks/breaks_criterion.md",
    "tables/table_3_6_subsamples.md",
    "tables/table_3_7_panel_a.md", "tables/table_3_7_panel_b.md",
    "tables/table_3_8_economic_conditions.md",
]


def write_report(cfg: PipelineConfig) -> Path:
    """Concatenate the Markdown tables present in the bundle into ``report.md``."""
    out = Path(cfg.output)
    parts = ["# Housing risk report", ""]
    for rel in REPORT_ORDER:
        p = out / rel
        if p.is_file():
            parts.append(p.read_text(encoding="utf-8"))
    sel = sorted((out / "selection").glob("selection_*.md")) if (out / "selection").is_dir() else []
    for p in sel:
        parts.append(p.read_text(encoding="utf-8"))
    path = out / "report.md"
    path.write_text("\n".join(parts), encoding="utf-8")
    return path


def run_pipeline(cfg: PipelineConfig, stages=STAGES) -> dict:
    """Validate, run ``stages`` in order, then write ``report.md`` and ``manifest.json``."""
    cfg.validate()
    Path(cfg.output).mkdir(parents=True, exist_ok=True)
    check_sample(cfg)
    summaries = {}
    for name in stages:
        log.info("stage %s", name)
        summaries[name] = run_stage(name, cfg)
    write_report(cfg)
    write_manifest(cfg, summaries)
    return summaries
