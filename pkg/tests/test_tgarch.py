import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from housing_risk.data import describe
from housing_risk.errors import CollinearRegressors, NonPositiveDefinite, NonStationaryParams, TooShort
from housing_risk.tgarch import (EquationParams, TGarchConfig, TGarchParams, _objective, fit_tgarch, fit_var1,
                                 log_likelihood, params_to_theta, simulate_tgarch, tgarch_filter, theta_to_params)

from conftest import series


def eq(*v):
    return EquationParams(*v)


HAND = TGarchParams(eq(0.1, 0.2, 0.5, 0.3), eq(0.1, 0.2, 0.5, 0.3), eq(0.1, 0.2, 0.5, 0.3))
TRUE = TGarchParams(eq(0.1, 0.1, 0.8, 0.1), eq(0.1, 0.1, 0.8, 0.1), eq(0.03, 0.05, 0.8, 0.05))


def test_hand_recursion_three_steps():
    # sigma2_0 = 1 (init); sigma2_1 = .1 + .2*1 + .5*1 = .8 (e_0 = +1, no threshold)
    # sigma2_2 = .1 + .2*1 + .5*.8 + .3*1 = 1.0 (e_1 = -1 triggers gamma)
    x = np.array([1.0, -1.0, 1.0])
    path = tgarch_filter((x, x), HAND, (1.0, 1.0, 0.0))
    assert_array_equal(path.sigma2_i.values, [1.0, 0.1 + 0.2 + 0.5, 0.1 + 0.2 + 0.5 * 0.8 + 0.3])
    assert_array_equal(path.sigma2_f.values, path.sigma2_i.values)
    # covariance: c_1 = .1 + .2 + 0 = .3 ; c_2 = .1 + .2 + .5*.3 + .3 (both lagged residuals negative)
    assert_array_equal(path.sigma_if.values, [0.0, 0.1 + 0.2, 0.1 + 0.2 + 0.5 * (0.1 + 0.2) + 0.3])


def test_covariance_threshold_needs_both_negative():
    x = np.array([1.0, -1.0, 1.0])
    f = np.array([1.0, 1.0, 1.0])
    path = tgarch_filter((x, f), HAND, (1.0, 1.0, 0.0))
    # x_1 * f_1 = -1 with only one negative: gamma does not enter the covariance
    assert path.sigma_if.values[2] == pytest.approx(0.1 + 0.2 * -1.0 + 0.5 * 0.3, abs=1e-15)
    assert path.sigma2_f.values[2] == pytest.approx(0.1 + 0.2 + 0.5 * 0.8, abs=1e-15)


def test_constant_variance_degenerate(rng):
    p = TGarchParams(eq(0.7, 0, 0, 0), eq(1.3, 0, 0, 0), eq(0.2, 0, 0, 0))
    e = rng.normal(size=(2, 50))
    path = tgarch_filter((e[0], e[1]), p, (0.7, 1.3, 0.2))
    assert np.all(path.sigma2_i.values == 0.7)
    assert np.all(path.sigma2_f.values == 1.3)


def test_positive_shocks_never_raise_variance(rng):
    e = rng.normal(size=(2, 200))
    a = tgarch_filter((e[0], e[1]), TRUE, (1.0, 1.0, 0.1))
    b = tgarch_filter((np.abs(e[0]), np.abs(e[1])), TRUE, (1.0, 1.0, 0.1))
    assert np.all(b.sigma2_i.values <= a.sigma2_i.values)
    assert np.all(b.sigma2_f.values <= a.sigma2_f.values)


def test_non_pd_raises():
    bad = TGarchParams(eq(0.1, 0, 0, 0), eq(0.1, 0, 0, 0), eq(0.5, 0, 0, 0))
    with pytest.raises(NonPositiveDefinite) as exc:
        tgarch_filter((np.ones(3), np.ones(3)), bad, (1.0, 1.0, 0.0))
    assert exc.value.t == 1


def test_constraints_enforced():
    with pytest.raises(ValueError):
        TGarchParams(eq(0.1, 0.6, 0.6, 0), eq(0.1, 0, 0, 0), eq(0, 0, 0, 0))
    with pytest.raises(ValueError):
        TGarchParams(eq(0.0, 0.1, 0.1, 0), eq(0.1, 0, 0, 0), eq(0, 0, 0, 0))


def test_loglik_identity():
    z = np.array([[0.3, -1.2], [1.5, 0.2], [-0.7, 0.9]])
    p = TGarchParams(eq(1.0, 0, 0, 0), eq(1.0, 0, 0, 0), eq(0.0, 0, 0, 0))
    path = tgarch_filter((z[:, 0], z[:, 1]), p, (1.0, 1.0, 0.0))
    expected = -0.5 * sum(2 * math.log(2 * math.pi) + zt @ zt for zt in z)
    assert log_likelihood((z[:, 0], z[:, 1]), path) == pytest.approx(expected, abs=1e-12)
    one = tgarch_filter((np.zeros(1), np.zeros(1)), p, (1.0, 1.0, 0.0))
    assert log_likelihood((np.zeros(1), np.zeros(1)), one) == pytest.approx(-math.log(2 * math.pi), abs=1e-15)


def test_loglik_five_observation_explicit():
    ex = np.array([0.4, -1.1, 0.8, -0.3, 1.9])
    ef = np.array([-0.2, -0.9, 0.5, 0.6, -1.4])
    path = tgarch_filter((ex, ef), TRUE, (1.2, 0.9, 0.25))
    total = 0.0
    for t in range(5):
        S = np.array([[path.sigma2_i.values[t], path.sigma_if.values[t]],
                      [path.sigma_if.values[t], path.sigma2_f.values[t]]])
        det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
        inv = np.array([[S[1, 1], -S[0, 1]], [-S[1, 0], S[0, 0]]]) / det
        z = np.array([ex[t], ef[t]])
        total += math.log(2 * math.pi) * 2 + math.log(det) + z @ inv @ z
        assert_allclose(det, np.linalg.det(S), rtol=1e-12)
    assert abs(log_likelihood((ex, ef), path) - (-0.5 * total)) < 1e-12
    # the compiled objective agrees with the reference evaluation
    vx, vf, c = 1.2, 0.9, math.sqrt(1.2 * 0.9)
    theta = params_to_theta(TRUE, vx, vf, c)
    val = _objective(theta, ex, ef, vx, vf, c, 1.2, 0.9, 0.25)
    assert abs(-val - log_likelihood((ex, ef), tgarch_filter((ex, ef), theta_to_params(theta, vx, vf, c),
                                                             (1.2, 0.9, 0.25)))) < 1e-12


def test_theta_roundtrip():
    theta = params_to_theta(TRUE, 2.0, 0.5, 1.0)
    assert_allclose(theta_to_params(theta, 2.0, 0.5, 1.0).vector(), TRUE.vector(), rtol=1e-10, atol=1e-14)


def test_var1_null_and_recovery():
    # each of the four slopes, taken separately, stays inside 2 SE in >= 90% of seeds
    inside = np.zeros((2, 2))
    for seed in range(20):
        e = np.random.default_rng(seed).normal(size=(2, 2000))
        v = fit_var1(series(e[0], "x"), series(e[1], "f"))
        inside += np.abs(v.coef) <= 2 * v.std_errors[:, 1:]
        assert v.normal_equation_error() < 1e-8
        assert v.n == 1999
    assert inside.min() >= 18
    b1 = np.array([[0.5, 0.2], [0.1, 0.4]])
    x, f, _ = simulate_tgarch(TGarchParams(eq(1, 0, 0, 0), eq(1, 0, 0, 0), eq(0, 0, 0, 0)),
                              ([0.1, -0.2], b1), n=5000, seed=1)
    assert np.max(np.abs(fit_var1(x, f).coef - b1)) < 0.05


def test_var1_errors():
    with pytest.raises(CollinearRegressors):
        fit_var1(series(np.ones(50), "x"), series(np.arange(50.0), "f"))
    with pytest.raises(TooShort):
        fit_var1(series(np.arange(5.0), "x"), series(np.arange(5.0) ** 2, "f"))


def test_simulate_determinism_and_guard():
    a = simulate_tgarch(TRUE, n=300, seed=9)
    b = simulate_tgarch(TRUE, n=300, seed=9)
    assert_array_equal(a[0].values, b[0].values)
    assert_array_equal(a[1].values, b[1].values)
    with pytest.raises(NonStationaryParams):
        simulate_tgarch(TGarchParams(eq(0.1, 0.2, 0.75, 0.2), eq(0.1, 0.1, 0.8, 0), eq(0, 0, 0, 0)))


def test_simulate_unconditional_variance():
    p = TGarchParams(eq(0.1, 0.1, 0.8, 0.0), eq(0.1, 0.1, 0.8, 0.0), eq(0.0, 0.0, 0.0, 0.0))
    _, _, truth = simulate_tgarch(p, n=50000, seed=2)
    e = truth.innovations.to_array()
    assert_allclose(e.var(axis=0), 1.0, rtol=0.10)


def test_simulate_iid_gaussian():
    p = TGarchParams(eq(1.0, 0, 0, 0), eq(1.0, 0, 0, 0), eq(0.0, 0, 0, 0))
    ok = 0
    for seed in range(20):
        x, _, _ = simulate_tgarch(p, n=5000, seed=seed)
        ok += describe(x).jarque_bera.pvalue > 0.05
    assert ok >= 18


def test_true_params_beat_perturbations():
    x, f, truth = simulate_tgarch(TRUE, n=5000, seed=4)
    e = truth.innovations.to_array()
    res = (e[:, 0], e[:, 1])
    init = tuple(truth.path.sigma2_i.values[:1]) + tuple(truth.path.sigma2_f.values[:1]) + tuple(
        truth.path.sigma_if.values[:1])
    best = log_likelihood(res, tgarch_filter(res, TRUE, init))
    rng = np.random.default_rng(0)
    wins = tried = 0
    while tried < 50:
        v = TRUE.vector() + rng.normal(scale=0.03, size=12)
        try:
            p = TGarchParams.from_vector(v)
            ll = log_likelihood(res, tgarch_filter(res, p, init))
        except (ValueError, NonPositiveDefinite):
            continue
        tried += 1
        wins += best > ll
    assert wins / tried >= 0.95


def test_fit_small_sample_invariants():
    x, f, _ = simulate_tgarch(TRUE, n=600, seed=3)
    fit = fit_tgarch(x, f, TGarchConfig(restarts=3))
    assert fit.loglik >= fit.initial_loglik
    for e in (fit.params.housing, fit.params.factor):
        assert e.omega > 0 and e.alpha >= 0 and e.phi >= 0 and e.alpha + e.phi <= 1
    assert np.all(fit.path.determinants() > 0)
    assert np.all(fit.volatility.values > 0)
    assert fit.optimizer_trace.converged == (fit.optimizer_trace.evaluations > 0 and fit.optimizer_trace.converged)
    again = fit_tgarch(x, f, TGarchConfig(restarts=3))
    assert_array_equal(again.params.vector(), fit.params.vector())


def test_fit_too_short():
    x, f, _ = simulate_tgarch(TRUE, n=60, seed=3)
    with pytest.raises(TooShort):
        fit_tgarch(x, f)
