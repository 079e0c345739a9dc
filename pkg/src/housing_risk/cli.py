"""Command-line entry point ``housing-risk``.

Exit codes: 0 success, 1 configuration or usage error, 2 data error
(including a configured input file that does not exist), 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .config import DEFAULTS, OUTPUT_ENV, load_config
from .data import Panel, align, load_panel, month_iso
from .errors import ConfigError, HousingRiskError, SchemaMismatch
from .forecast import ModelSpec, comparison_table, evaluate, split_train_test
from .pipeline import (_index, _spec, build_design, check_sample, load_input, out_path, read_selected,
                       run_pipeline, run_stage, summary_rows_table, write_manifest, write_report)
from .regression import predictive_regression
from .synthetic import SimulatorSettings, write_bundle

log = logging.getLogger("housing_risk")


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors (exit 1), not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _config_epilog() -> str:
    lines = ["config defaults (section.key = value):"]
    for sec, kv in DEFAULTS.items():
        for k, v in kv.items():
            lines.append(f"  {sec}.{k} = {v or '(all columns)'}")
    lines.append(f"output directory: --output, else ${OUTPUT_ENV}, else [paths] output, else ./output next to the config")
    return "\n".join(lines)


def _common(p, seed=True):
    p.add_argument("--config", "-c", required=True, help="pipeline INI file")
    p.add_argument("--output", "-o", default=None, help=f"output directory (overrides ${OUTPUT_ENV} and the config)")
    if seed:
        p.add_argument("--seed", type=int, default=None, help="random seed (overrides [run] seed)")


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip()) if text else ()


def _names(text):
    return tuple(x.strip() for x in text.split(",") if x.strip()) if text else ()


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="housing-risk", description=__doc__.splitlines()[0], epilog=_config_epilog(),
                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true", help="log stage progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="load and validate every configured input", formatter_class=fmt)
    _common(s, seed=False)

    s = sub.add_parser("factor", help="macro factor by PCA (loadings + proportions CSV)", formatter_class=fmt)
    _common(s, seed=False)
    s.add_argument("--mode", choices=("covariance", "correlation"), default=None, help="PCA mode [factor] mode")

    s = sub.add_parser("tgarch", help="bivariate T-GARCH fits; parameter CSV and volatility panel", formatter_class=fmt)
    _common(s)
    s.add_argument("--housing", default=None, help="housing panel CSV (overrides [paths] housing)")
    s.add_argument("--factor", default=None, help="factor CSV with an F1 column (default: factor stage output)")
    s.add_argument("--restarts", type=int, default=None, help="optimizer restarts per fit")
    s.add_argument("--workers", type=int, default=None, help="parallel fits (does not change results)")

    s = sub.add_parser("index", help="risk index: loadings, proportions and H series", formatter_class=fmt)
    _common(s, seed=False)
    s.add_argument("--mode", choices=("covariance", "correlation"), default=None)

    for name, helptext in (("regress", "predictive OLS (Newey-West) with optional quantiles"),
                           ("quantile", "predictive quantile regressions only")):
        s = sub.add_parser(name, help=helptext, formatter_class=fmt)
        _common(s)
        s.add_argument("--dep", default=None, help="dependent column(s), comma-separated (default: all returns)")
        s.add_argument("--index", default=None, help="index CSV (default: index stage output)")
        s.add_argument("--lag", type=int, default=1, help="months the index is lagged")
        s.add_argument("--lead", type=int, default=0, help="months the dependent is led")
        s.add_argument("--controls", default="", help="control columns from the controls file, comma-separated")
        s.add_argument("--quantiles", default="0.25,0.5,0.75,0.95" if name == "quantile" else "",
                       help="quantile levels, comma-separated")
        s.add_argument("--nw-lag", default="auto", help="Newey-West lag: auto or an integer")
        s.add_argument("--n-boot", type=int, default=None, help="bootstrap resamples for quantile SEs")
        s.add_argument("--name", default=None, help="output table name")

    s = sub.add_parser("select", help="Bayesian covariate selection ranking", formatter_class=fmt)
    _common(s, seed=False)
    s.add_argument("--top-k", type=int, default=None)
    s.add_argument("--always-include", default=None, help="pinned controls, comma-separated")

    s = sub.add_parser("breaks", help="structural breaks and sub-sample table", formatter_class=fmt)
    _common(s)
    s.add_argument("--dependent", default=None)
    s.add_argument("--regressors", default=None, help="design columns, e.g. H,Mkt-RF,SMB,HML")
    s.add_argument("--max-breaks", type=int, default=None)
    s.add_argument("--trim", type=float, default=None)

    s = sub.add_parser("forecast", help="in-sample and out-of-sample forecast comparison", formatter_class=fmt)
    _common(s)
    s.add_argument("--ratio", type=float, default=None, help="training share of the sample (config default 0.8)")
    s.add_argument("--models", default=None,
                   help="comma list of univariate,nber,multivariate,ff3 (default: the full panel-A set)")

    s = sub.add_parser("simulate", help="write a synthetic input bundle with ground truth", formatter_class=fmt)
    s.add_argument("--out", "-o", required=True, help="directory for the synthetic CSVs")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, default=576, help="months")
    s.add_argument("--index-loading", type=float, default=0.1, help="return loading on the true lagged index")

    s = sub.add_parser("run", help="full pipeline into a report bundle", formatter_class=fmt)
    _common(s)

    s = sub.add_parser("report", help="rebuild report.md and manifest.json from an existing bundle",
                       formatter_class=fmt)
    _common(s, seed=False)
    return p


def _cfg(args):
    cfg = load_config(args.config, output=args.output, seed=getattr(args, "seed", None))
    return cfg


def _cmd_ingest(args):
    cfg = _cfg(args).validate()
    info = {}
    for role in sorted(cfg.paths):
        p = load_input(cfg, role)
        info[role] = {"columns": p.k, "months": p.n, "start": month_iso(p.dates[0]), "end": month_iso(p.dates[-1])}
    info["common_months"] = check_sample(cfg)
    print(json.dumps(info, indent=2, sort_keys=True))


def _cmd_stage(name, **overrides):
    def run(args):
        cfg = _cfg(args)
        kw = {k: v(args) for k, v in overrides.items()}
        kw = {k: v for k, v in kw.items() if v is not None}
        if kw:
            cfg = dataclasses.replace(cfg, **kw)
        cfg.validate()
        print(json.dumps(run_stage(name, cfg), indent=2, sort_keys=True, default=str))
    return run


def _tgarch_overrides(args, cfg):
    paths = dict(cfg.paths)
    if args.housing:
        paths["housing"] = Path(args.housing).resolve()
    tg = cfg.tgarch
    if args.restarts is not None:
        tg = dataclasses.replace(tg, restarts=args.restarts)
    if args.workers is not None:
        tg = dataclasses.replace(tg, workers=args.workers)
    return dataclasses.replace(cfg, paths=paths, tgarch=tg)


def _cmd_tgarch(args):
    cfg = _tgarch_overrides(args, _cfg(args)).validate()
    if args.factor:
        f = load_panel(args.factor, "date")
        if "F1" not in f.ids:
            raise SchemaMismatch(f"{args.factor}: needs an F1 column")
        from .data import write_panel
        write_panel(f.select(["F1"]), out_path(cfg, "factor"))
    print(json.dumps(run_stage("tgarch", cfg), indent=2, sort_keys=True))


def _cmd_regress(args, quantile_only=False):
    cfg = _cfg(args).validate()
    returns = load_input(cfg, "returns")
    # --controls may name columns of the controls, NBER or VIX files
    pool = {c.id: c for role in ("controls", "nber", "vix")
            for c in (load_input(cfg, role, required=False) or Panel(())).columns}
    if args.index:
        h = load_panel(args.index, "date")
        h = h[cfg.index_name] if cfg.index_name in h.ids else h.columns[0]
    else:
        h = _index(cfg)
    deps = _names(args.dep) or tuple(cfg.dependents) or tuple(returns.ids)
    ctrl = _names(args.controls)
    unknown = [c for c in ctrl if c not in pool]
    if unknown:
        raise SchemaMismatch(f"controls not found in the controls, nber or vix files: {unknown}")
    controls = align([pool[c] for c in ctrl]) if ctrl else None
    nw = args.nw_lag if args.nw_lag == "auto" else int(args.nw_lag)
    qs = _floats(args.quantiles)
    if quantile_only and not qs:
        raise ConfigError("quantile: --quantiles is empty")
    cfg = dataclasses.replace(cfg, quantiles=qs, nw_lag=nw, n_boot=args.n_boot if args.n_boot is not None else cfg.n_boot)
    spec = _spec(cfg, lag_index=args.lag, lead_dependent=args.lead)
    fits = {}
    for dep in deps:
        if dep not in returns.ids:
            raise SchemaMismatch(f"dependent {dep!r} not in returns file")
        res = predictive_regression(returns[dep], h, controls, spec)
        fits[dep] = res[1:] if quantile_only else res
    name = args.name or ("quantile" if quantile_only else "regress") + f"_lag{args.lag}_lead{args.lead}"
    table = summary_rows_table(fits, h.id, ctrl, name)
    paths = table.write(Path(cfg.output) / "tables")
    print(table.to_markdown())
    print("wrote " + ", ".join(str(p) for p in paths))


MODEL_KEYS = ("univariate", "nber", "multivariate", "ff3")


def _cmd_forecast(args):
    cfg = _cfg(args)
    if args.ratio is not None:
        cfg = dataclasses.replace(cfg, ratio=args.ratio)
    cfg.validate()
    if not args.models:
        print(json.dumps(run_stage("forecast", cfg), indent=2, sort_keys=True))
        return
    keys = _names(args.models)
    bad = [k for k in keys if k not in MODEL_KEYS]
    if bad:
        raise ConfigError(f"unknown models {bad}; choose from {MODEL_KEYS}")
    returns = load_input(cfg, "returns")
    controls = load_input(cfg, "controls")
    nber = load_input(cfg, "nber", required=False)
    if "nber" in keys and nber is None:
        raise ConfigError("model 'nber' needs [paths] nber")
    h = _index(cfg)
    dep = cfg.forecast_dependent or (cfg.dependents or returns.ids)[0]
    key = cfg.index_name
    specs = {"univariate": ModelSpec("Univariate", (key,)),
             "nber": ModelSpec("Univariate with NBER dummy", (key, *(nber.ids if nber is not None else ()))),
             "ff3": ModelSpec("Fama-French three-factors", tuple(cfg.ff_factors))}
    if "multivariate" in keys:
        specs["multivariate"] = ModelSpec("Multivariate with risk factors", (key, *read_selected(cfg).get(dep, ())))
    extra = list(controls.columns) + (list(nber.columns) if nber is not None else [])
    y, X = build_design(returns[dep], h, Panel(tuple(extra)), _spec(cfg, quantiles=()))
    train, test = split_train_test(y, X, cfg.ratio)
    t = comparison_table([evaluate(specs[k], train, test) for k in keys], "forecast_selected_models")
    t.write(Path(cfg.output) / "tables")
    print(t.to_markdown())


def _cmd_simulate(args):
    s = SimulatorSettings(n=args.n, index_loading=args.index_loading)
    res = write_bundle(args.out, s, args.seed)
    print(f"wrote synthetic bundle to {args.out} (config: {res['config']})")


def _cmd_run(args):
    cfg = _cfg(args)
    summaries = run_pipeline(cfg)
    print(json.dumps({"output": str(cfg.output), "stages": list(summaries)}, indent=2))


def _cmd_report(args):
    cfg = _cfg(args).validate()
    if not Path(cfg.output).is_dir():
        raise ConfigError(f"no bundle at {cfg.output}")
    write_report(cfg)
    print(write_manifest(cfg, {}))


COMMANDS = {
    "ingest": _cmd_ingest,
    "factor": _cmd_stage("factor", factor_mode=lambda a: a.mode),
    "tgarch": _cmd_tgarch,
    "index": _cmd_stage("index", index_mode=lambda a: a.mode),
    "regress": _cmd_regress,
    "quantile": lambda a: _cmd_regress(a, quantile_only=True),
    "select": _cmd_stage("select", top_k=lambda a: a.top_k,
                         always_include=lambda a: _names(a.always_include) if a.always_include is not None else None),
    "breaks": _cmd_stage("breaks", break_dependent=lambda a: a.dependent,
                         break_regressors=lambda a: _names(a.regressors) if a.regressors else None,
                         max_breaks=lambda a: a.max_breaks, trim=lambda a: a.trim),
    "forecast": _cmd_forecast,
    "simulate": _cmd_simulate,
    "run": _cmd_run,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except HousingRiskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: ConfigError: file not found: {exc.filename or exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
