"""OLS fitting against a normal equations oracle."""

import numpy as np
import pytest

from splitcast.errors import DegenerateDesignError, ShapeMismatchError, TooFewRowsError
from splitcast.features import ModelSpec, design_rows, regressors, targets
from splitcast.models import check_design, ols_fit, point_forecast


def _well_conditioned(rng, n=60, p=5):
    X = rng.standard_normal((n, p))
    X[:, 0] = 1.0
    return X


def test_matches_normal_equations(rng):
    X = _well_conditioned(rng)
    y = rng.standard_normal(60)
    beta = ols_fit(X, y).beta
    oracle = np.linalg.solve(X.T @ X, X.T @ y)
    np.testing.assert_allclose(beta, oracle, rtol=1e-10, atol=1e-12)


def test_recovers_noiseless_coefficients(rng):
    X = _well_conditioned(rng)
    beta0 = np.array([2.0, -1.0, 0.5, 0.0, 3.0])
    beta = ols_fit(X, X @ beta0).beta
    np.testing.assert_allclose(beta, beta0, atol=1e-10)


def test_deterministic_refit(rng):
    X = _well_conditioned(rng)
    y = rng.standard_normal(60)
    np.testing.assert_array_equal(ols_fit(X, y).beta, ols_fit(X, y).beta)


def test_check_design_errors(rng):
    X = _well_conditioned(rng, n=8, p=5)
    with pytest.raises(TooFewRowsError):
        check_design(X, np.zeros(8))
    X = _well_conditioned(rng)
    with pytest.raises(ShapeMismatchError):
        check_design(X, np.zeros(59))
    with pytest.raises(ShapeMismatchError):
        check_design(np.zeros(60), np.zeros(60))
    bad = X.copy()
    bad[3, 2] = np.nan
    with pytest.raises(DegenerateDesignError):
        check_design(bad, np.zeros(60))
    dead = X.copy()
    dead[:, 4] = 0.0
    with pytest.raises(DegenerateDesignError, match="column"):
        check_design(dead)
    y = np.zeros(60)
    y[7] = np.inf
    with pytest.raises(DegenerateDesignError):
        check_design(X, y)


def test_point_forecast_inner_product(rng, data_small):
    spec = ModelSpec("L", 9)
    ts = np.arange(20, 60)
    X, labels = design_rows(spec, data_small, ts)
    coeffs = ols_fit(X, targets(spec, data_small, ts), spec=spec, labels=labels)
    row = regressors(spec, data_small, 61)
    assert point_forecast(coeffs, row) == float(row.values @ coeffs.beta)
    with pytest.raises(ShapeMismatchError):
        point_forecast(coeffs, np.zeros(3))


def test_fit_on_market_design(data_small):
    """Expert designs are full rank on synthetic data and fit closely."""
    spec = ModelSpec("DA", 12)
    ts = np.arange(30, 130)
    X, _ = design_rows(spec, data_small, ts)
    y = targets(spec, data_small, ts)
    beta = ols_fit(X, y).beta
    assert np.all(np.isfinite(beta))
    resid = y - X @ beta
    assert resid.std() < y.std()  # the model explains something
