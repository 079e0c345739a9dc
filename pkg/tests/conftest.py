import numpy as np
import pytest

from housing_risk.data import Panel, TimeSeries, month_range


def series(values, id="y", start="2000-01"):
    values = np.asarray(values, float)
    return TimeSeries(id, month_range(start, values.size), values)


def panel(matrix, ids=None, start="2000-01"):
    matrix = np.asarray(matrix, float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    ids = ids or [f"x{j + 1}" for j in range(matrix.shape[1])]
    return Panel.from_array(ids, month_range(start, matrix.shape[0]), matrix)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines collected during the run and repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def run_cli(*args, env=None):
    """``housing-risk`` in a fresh interpreter; returns (exit code, seconds, stderr)."""
    import os
    import subprocess
    import sys
    import time

    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "housing_risk", *map(str, args)], capture_output=True, text=True,
                          env={**os.environ, **(env or {})})
    return proc.returncode, time.perf_counter() - t0, proc.stderr


@pytest.fixture(scope="session")
def synthetic_bundle(tmp_path_factory):
    """Seed-42 synthetic inputs plus one full ``run`` with the default settings."""
    root = tmp_path_factory.mktemp("syn42")
    code, _, err = run_cli("simulate", "--out", root, "--seed", 42)
    assert code == 0, err
    code, seconds, err = run_cli("run", "-c", root / "config.ini", "-o", root / "run1")
    assert code == 0, err
    return {"root": root, "run1": root / "run1", "seconds": seconds}
