import filecmp
import json
import shutil
import warnings
from pathlib import Path

import pytest

from housing_risk.cli import main
from housing_risk.config import OUTPUT_ENV, load_config
from housing_risk.errors import ConfigError
from housing_risk.pipeline import run_stage, write_manifest
from housing_risk.synthetic import SimulatorSettings, write_bundle

SMALL = """
[tgarch]
restarts = 2

[regression]
n_boot = 19
"""


def small_bundle(directory, seed=3):
    info = write_bundle(directory, SimulatorSettings(n=240), seed=seed)
    with open(info["config"], "a") as fh:
        fh.write(SMALL)
    return info["config"]


def tree(root):
    root = Path(root)
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file())


def same_tree(a, b):
    files = tree(a)
    assert files == tree(b)
    _, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
    return not mismatch and not errors


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    cfg_path = small_bundle(root)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert main(["run", "-c", str(cfg_path)]) == 0
    return root, cfg_path


# -- configuration ------------------------------------------------------------------

def test_config_defaults_and_paths(tmp_path, monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    (tmp_path / "c.ini").write_text("[paths]\nreturns = data/r.csv\n")
    cfg = load_config(tmp_path / "c.ini")
    assert cfg.paths["returns"] == (tmp_path / "data/r.csv").resolve()
    assert cfg.output == tmp_path.resolve() / "output"
    assert cfg.tgarch.restarts == 20 and cfg.quantiles == (0.25, 0.5, 0.75, 0.95)
    assert cfg.factor_mode == "correlation" and cfg.index_mode == "covariance"


def test_output_precedence(tmp_path, monkeypatch):
    (tmp_path / "c.ini").write_text("[paths]\noutput = from_file\n")
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert load_config(tmp_path / "c.ini").output == tmp_path.resolve() / "from_file"
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "from_env"))
    assert load_config(tmp_path / "c.ini").output == tmp_path / "from_env"
    assert load_config(tmp_path / "c.ini", output=tmp_path / "arg").output == tmp_path / "arg"


def test_config_errors(tmp_path):
    (tmp_path / "a.ini").write_text("[macro_transforms]\nM01 = cube\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "a.ini")
    (tmp_path / "b.ini").write_text("[factor]\nmode = sparse\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "b.ini")
    (tmp_path / "c.ini").write_text("[paths]\nbogus = x.csv\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.ini")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")


def test_transform_lookup(tmp_path):
    (tmp_path / "c.ini").write_text("[macro_transforms]\ndefault = standardize\nM02 = diff\n")
    cfg = load_config(tmp_path / "c.ini")
    assert cfg.transform_for("macro", "M01") == "standardize"
    assert cfg.transform_for("macro", "M02") == "diff"
    assert cfg.transform_for("housing", "HOUST") == "none"


def test_example_config_parses():
    cfg = load_config(Path(__file__).parents[1] / "config" / "example.ini")
    assert cfg.tgarch.restarts == 20
    assert cfg.always_include == ("Mkt-RF", "SMB", "HML")


# -- command line ----------------------------------------------------------------------

def test_missing_returns_exit_2(tmp_path, capsys):
    cfg = small_bundle(tmp_path)
    (tmp_path / "returns.csv").unlink()
    assert main(["run", "-c", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "ConfigError" in err and str(tmp_path / "returns.csv") in err


def test_usage_and_config_errors_exit_1(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["regress"])
    assert exc.value.code == 1
    assert main(["run", "-c", str(tmp_path / "nope.ini")]) == 1


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    assert "tgarch.restarts = 20" in out and "forecast.ratio = 0.8" in out


def test_short_sample_exit_2(tmp_path):
    write_bundle(tmp_path, SimulatorSettings(n=100), seed=0)
    assert main(["run", "-c", str(tmp_path / "config.ini")]) == 2


def test_simulate_deterministic(tmp_path):
    assert main(["simulate", "--out", str(tmp_path / "a"), "--seed", "5", "--n", "150"]) == 0
    assert main(["simulate", "--out", str(tmp_path / "b"), "--seed", "5", "--n", "150"]) == 0
    assert same_tree(tmp_path / "a", tmp_path / "b")
    main(["simulate", "--out", str(tmp_path / "c"), "--seed", "6", "--n", "150"])
    assert (tmp_path / "a/returns.csv").read_bytes() != (tmp_path / "c/returns.csv").read_bytes()


def test_ingest(small_run, capsys):
    _, cfg = small_run
    assert main(["ingest", "-c", str(cfg)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert "returns" in json.dumps(info)


# -- pipeline bundle -----------------------------------------------------------------------

EXPECTED = [
    "factor/macro_factor.csv", "factor/factor_loadings.csv", "factor/factor_proportions.csv",
    "tgarch/volatility_panel.csv", "tgarch/tgarch_params.csv",
    "index/risk_index.csv", "index/index_loadings.csv", "index/table_3_1_panel_a.csv",
    "index/table_3_1_panel_b.csv", "index/table_3_1_panel_c.csv",
    "tables/table_3_3_panel_a.csv", "tables/table_3_4_panel_a.md", "tables/table_3_4_panel_b.csv",
    "tables/table_3_5_panel_a.csv", "tables/table_3_6_subsamples.csv", "tables/table_3_7_panel_a.csv",
    "tables/table_3_7_panel_b.csv", "tables/table_3_8_economic_conditions.csv",
    "breaks/breaks_dates.csv", "breaks/breaks_criterion.csv", "selection/selected_covariates.csv",
    "report.md", "manifest.json",
]


def test_bundle_contents(small_run):
    root, _ = small_run
    out = root / "output"
    for rel in EXPECTED:
        assert (out / rel).is_file(), rel
    man = json.loads((out / "manifest.json").read_text())
    assert set(man) >= {"run_id", "config_sha256", "inputs", "seed", "versions", "outputs"}
    assert man["seed"] == 3
    assert "report.md" in man["outputs"]
    report = (out / "report.md").read_text()
    assert "Adj R-Sq" in report


def test_stage_isolation(small_run, tmp_path):
    # downstream stages rerun from the cached intermediate CSVs reproduce the same bytes
    root, cfg_path = small_run
    copy = tmp_path / "out"
    shutil.copytree(root / "output", copy)
    for sub in ("tables", "selection", "breaks"):
        shutil.rmtree(copy / sub)
    cfg = load_config(cfg_path, output=copy)
    for stage in ("regress", "select", "breaks", "forecast"):
        run_stage(stage, cfg)
    for sub in ("tables", "selection", "breaks"):
        assert same_tree(root / "output" / sub, copy / sub), sub


def test_worker_count_invariance(small_run, tmp_path):
    root, cfg_path = small_run
    text = Path(cfg_path).read_text().replace("restarts = 2", "restarts = 2\nworkers = 1")
    one = Path(cfg_path).with_name("one.ini")
    one.write_text(text)
    cfg = load_config(one, output=tmp_path / "out")
    assert cfg.tgarch.workers == 1
    shutil.copytree(root / "output" / "factor", tmp_path / "out" / "factor")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run_stage("tgarch", cfg)
    assert same_tree(root / "output" / "tgarch", tmp_path / "out" / "tgarch")


def test_run_id_tracks_input_bytes(small_run, tmp_path):
    root, cfg_path = small_run
    base = json.loads((root / "output" / "manifest.json").read_text())["run_id"]
    cfg = load_config(cfg_path, output=tmp_path / "o1")
    (tmp_path / "o1").mkdir()
    assert json.loads(write_manifest(cfg, {}).read_text())["run_id"] == base
    seeded = cfg.with_overrides(output=tmp_path / "o2", seed=4)
    (tmp_path / "o2").mkdir()
    assert json.loads(write_manifest(seeded, {}).read_text())["run_id"] != base
    data = tmp_path / "data"
    shutil.copytree(root, data, ignore=shutil.ignore_patterns("output", "one.ini"))
    ret = data / "returns.csv"
    ret.write_bytes(ret.read_bytes() + b"\n")
    moved = load_config(data / "config.ini", output=tmp_path / "o3")
    (tmp_path / "o3").mkdir()
    assert json.loads(write_manifest(moved, {}).read_text())["run_id"] != base


def test_report_subcommand_rebuilds(small_run, tmp_path):
    root, cfg_path = small_run
    copy = tmp_path / "out"
    shutil.copytree(root / "output", copy)
    (copy / "report.md").unlink()
    assert main(["report", "-c", str(cfg_path), "-o", str(copy)]) == 0
    assert (copy / "report.md").read_bytes() == (root / "output" / "report.md").read_bytes()


def test_regress_subcommand(small_run, tmp_path):
    root, cfg_path = small_run
    copy = tmp_path / "out"
    shutil.copytree(root / "output", copy)
    rc = main(["regress", "-c", str(cfg_path), "-o", str(copy), "--dep", "ALLREIT", "--controls", "NBER",
               "--quantiles", "0.5", "--n-boot", "9", "--name", "custom"])
    assert rc == 0
    assert (copy / "tables" / "custom.csv").is_file()
