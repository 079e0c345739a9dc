import numpy as np
import pytest

from housing_risk.errors import TooShort
from housing_risk.forecast import (ModelSpec, comparison_table, correlation_accuracy, evaluate, msfe,
                                   sign_agreement, split_train_test)

from conftest import panel, series


def test_hand_example():
    a, p = [1, 2, 3, 2, 1], [1, 1, 3, 3, 1]
    assert msfe(a, p) == pytest.approx(0.4, abs=1e-15)
    assert sign_agreement(a, p) == 100.0


def test_perfect_forecast():
    a = np.array([0.5, -1.0, 2.0, 0.1])
    assert msfe(a, a) == 0.0
    assert correlation_accuracy(a, a) == pytest.approx(100.0)


def test_split_sizes():
    tr, te = split_train_test(series(np.arange(576.0)), None, 0.8)
    assert (tr.n, te.n) == (460, 116)
    assert tr.y.end + 1 == te.y.start
    tr, te = split_train_test(series(np.arange(10.0)), None, 0.8)
    assert (tr.n, te.n) == (8, 2)
    with pytest.raises(TooShort):
        split_train_test(series(np.arange(10.0)), None, 1.0)


def test_metric_invariances(rng):
    a, p = rng.normal(size=40), rng.normal(size=40)
    perm = rng.permutation(40)
    assert msfe(a[perm], p[perm]) == pytest.approx(msfe(a, p), rel=1e-12)
    assert correlation_accuracy(3 * a + 1, 3 * p + 1) == pytest.approx(correlation_accuracy(a, p), abs=1e-10)


def test_evaluate_fixed_scheme(rng):
    x = rng.normal(size=(200, 2))
    y = series(x @ [0.5, 0.2] + rng.normal(size=200))
    tr, te = split_train_test(y, panel(x), 0.8)
    a = evaluate(ModelSpec("m", ("x1", "x2")), tr, te)
    b = evaluate(ModelSpec("m", ("x1", "x2")), tr, te)
    assert a == b
    assert a.n_train + a.n_test == 200
    assert a.msfe >= 0 and -100 <= a.out_correlation_accuracy <= 100
    coef = np.linalg.lstsq(np.column_stack([np.ones(160), x[:160]]), y.values[:160], rcond=None)[0]
    pred = np.column_stack([np.ones(40), x[160:]]) @ coef
    assert a.msfe == pytest.approx(np.mean((y.values[160:] - pred) ** 2), rel=1e-10)


def test_overfitting_detector():
    wins = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(300, 12))
        y = series(rng.normal(size=300))
        tr, te = split_train_test(y, panel(x), 0.8)
        small = evaluate(ModelSpec("const"), tr, te)
        big = evaluate(ModelSpec("all", tuple(f"x{j + 1}" for j in range(12))), tr, te)
        assert big.residual_std_error ** 2 * (240 - 13) <= small.residual_std_error ** 2 * 239 + 1e-9
        wins += small.msfe <= big.msfe
    assert wins >= 14


def test_comparison_table_stars_best(rng):
    x = rng.normal(size=(100, 1))
    y = series(2 * x[:, 0] + rng.normal(size=100))
    tr, te = split_train_test(y, panel(x), 0.8)
    reps = [evaluate(ModelSpec("const"), tr, te), evaluate(ModelSpec("x", ("x1",)), tr, te)]
    t = comparison_table(reps)
    assert t.rows[1][0] == "x*" and t.rows[0][0] == "const"
    assert len(t.rows) == 2
