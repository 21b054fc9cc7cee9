"""Split bookkeeping, ensemble construction, quantile interpolation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from splitcast.ensembles import (
    ForecastEnsemble,
    derived_ensemble,
    ensemble_fan,
    ensemble_interval,
    ensemble_quantile,
    ensemble_to_csv,
    historical_ensemble,
    historical_ensembles_for_day,
    interpolated_quantile,
    interpolated_quantiles,
    map_ensemble,
    ms_ensembles_for_day,
    multiple_split_ensemble,
    random_split,
)
from splitcast.errors import EmptyEnsembleError
from splitcast.features import ModelSpec, design_rows, targets
from splitcast.models import ols_fit


@settings(max_examples=60, deadline=None)
@given(st.integers(10, 400), st.sampled_from([0.3, 0.5, 0.7]), st.integers(0, 2**32 - 1))
def test_random_split_partitions(n, ratio, seed):
    days = np.arange(100, 100 + n)
    plan = random_split(days, ratio, np.random.default_rng(seed))
    assert plan.estimation_days.size == round(ratio * n)
    assert plan.calibration_days.size == n - round(ratio * n)
    assert np.all(np.diff(plan.estimation_days) > 0)
    assert np.all(np.diff(plan.calibration_days) > 0)
    merged = np.concatenate([plan.estimation_days, plan.calibration_days])
    np.testing.assert_array_equal(np.sort(merged), days)


def test_split_sizes_use_bankers_rounding():
    # round(0.5 * 365) == 182, so the calibration part keeps 183 days
    days = np.arange(365)
    plan = random_split(days, 0.5, np.random.default_rng(0))
    assert plan.estimation_days.size == 182
    assert plan.calibration_days.size == 183


def test_random_split_degenerate_ratio():
    with pytest.raises(ValueError):
        random_split(np.arange(10), 0.01, np.random.default_rng(0))


def test_ms_pool_size_and_meta(data_small):
    sample = np.arange(20, 120)  # 100 days -> 50 calibration errors per split
    out = ms_ensembles_for_day(data_small, ("DA", "ID", "W"), sample, 120,
                               hours=(1, 12), n_splits=3, ratio=0.5,
                               rng=np.random.default_rng(4))
    assert set(out) == {1, 12}
    ens = out[12]
    assert ens.variables == ("DA", "ID", "W")
    assert ens.members.shape == (3 * 50, 3)
    assert ens.meta["calibration_size"] == 50
    assert ens.meta["n_splits"] == 3
    assert ens.target_date == data_small.panel.dates[120]
    assert ens.hour == 12


def test_ms_deterministic(data_small):
    sample = np.arange(20, 120)
    a = multiple_split_ensemble(data_small, ("DA",), sample, 120, 6, 4, 0.5,
                                np.random.default_rng(9))
    b = multiple_split_ensemble(data_small, ("DA",), sample, 120, 6, 4, 0.5,
                                np.random.default_rng(9))
    np.testing.assert_array_equal(a.members, b.members)


def test_ms_members_recenter_on_target_point(data_small):
    """Each split chunk is the target point forecast plus calibration errors."""
    sample = np.arange(20, 120)
    rng = np.random.default_rng(21)
    ens = multiple_split_ensemble(data_small, ("DA",), sample, 120, 12, 1, 0.5, rng)
    # replay the single split with the same stream
    plan = random_split(sample, 0.5, np.random.default_rng(21))
    spec = ModelSpec("DA", 12)
    X, _ = design_rows(spec, data_small, np.append(sample, 120))
    y = targets(spec, data_small, np.append(sample, 120))
    fit_pos = np.searchsorted(sample, plan.estimation_days)
    cal_pos = np.searchsorted(sample, plan.calibration_days)
    coeffs = ols_fit(X[fit_pos], y[fit_pos])
    expected = X[-1] @ coeffs.beta + (y[cal_pos] - X[cal_pos] @ coeffs.beta)
    np.testing.assert_array_equal(ens.members[:, 0], expected)


def test_corr_mode_shares_plans_across_variables(data_small):
    """corr: one plan stream for all variables; uncorr: one per variable."""
    sample = np.arange(20, 120)
    joint = ms_ensembles_for_day(data_small, ("DA", "ID"), sample, 120, (12,),
                                 3, 0.5, np.random.default_rng(33))[12]
    alone = ms_ensembles_for_day(data_small, ("DA",), sample, 120, (12,),
                                 3, 0.5, np.random.default_rng(33))[12]
    np.testing.assert_array_equal(joint.column("DA"), alone.column("DA"))

    streams = [np.random.default_rng(33), np.random.default_rng(77)]
    un = ms_ensembles_for_day(data_small, ("DA", "ID"), sample, 120, (12,),
                              3, 0.5, streams, mode="uncorr")[12]
    # first variable consumed the same stream, so members agree with corr
    np.testing.assert_array_equal(un.column("DA"), joint.column("DA"))
    # the second variable used its own plans and must differ
    assert not np.array_equal(un.column("ID"), joint.column("ID"))


def test_uncorr_needs_one_stream_per_variable(data_small):
    sample = np.arange(20, 60)
    with pytest.raises(ValueError):
        ms_ensembles_for_day(data_small, ("DA", "ID"), sample, 60, (12,), 2, 0.5,
                             [np.random.default_rng(1)], mode="uncorr")
    with pytest.raises(ValueError):
        ms_ensembles_for_day(data_small, ("DA",), sample, 60, (12,), 2, 0.5,
                             np.random.default_rng(1), mode="sideways")
    with pytest.raises(EmptyEnsembleError):
        ms_ensembles_for_day(data_small, (), sample, 60, (12,), 2, 0.5,
                             np.random.default_rng(1))


def test_corr_preserves_cross_correlation(data_small):
    """Joint splits keep the DA/ID error dependence, per variable splits lose it."""
    sample = np.arange(12, 132)  # 120 days -> 60 errors per split
    rng = np.random.default_rng(8)
    corr = ms_ensembles_for_day(data_small, ("DA", "ID"), sample, 132, (12,),
                                20, 0.5, rng)[12]
    streams = [np.random.default_rng(s) for s in (101, 202)]
    un = ms_ensembles_for_day(data_small, ("DA", "ID"), sample, 132, (12,),
                              20, 0.5, streams, mode="uncorr")[12]
    rho_corr = np.corrcoef(corr.column("DA"), corr.column("ID"))[0, 1]
    rho_un = np.corrcoef(un.column("DA"), un.column("ID"))[0, 1]
    assert rho_corr > 0.6
    assert abs(rho_un) < 0.25


def test_historical_member_count_and_windows(data_small):
    train = np.arange(20, 110)  # 90 days, inner window defaults to 45
    ens = historical_ensemble(data_small, ("DA", "ID"), train, 110, 12)
    assert ens.members.shape == (45, 2)
    assert ens.meta["inner_window"] == 45
    ens = historical_ensemble(data_small, ("W",), train, 110, 12, inner_window=25)
    assert ens.members.shape == (65, 1)
    with pytest.raises(ValueError):
        historical_ensemble(data_small, ("W",), train, 110, 12, inner_window=90)


def test_historical_point_centering(data_small):
    """Members are the last window's point forecast plus walked errors."""
    train = np.arange(30, 60)
    ens = historical_ensemble(data_small, ("W",), train, 60, 5, inner_window=15)
    spec = ModelSpec("W", 5)
    days = np.append(train, 60)
    X, _ = design_rows(spec, data_small, days)
    y = targets(spec, data_small, days)
    errors = []
    for pos in range(15, 30):
        coeffs = ols_fit(X[pos - 15:pos], y[pos - 15:pos])
        errors.append(y[pos] - X[pos] @ coeffs.beta)
    point = X[-1] @ ols_fit(X[15:30], y[15:30]).beta
    np.testing.assert_array_equal(ens.members[:, 0], point + np.array(errors))


# --------------------------------------------------------------------------
# quantile interpolation


def _oracle_quantile(values, tau):
    v = np.sort(np.asarray(values, dtype=np.float64))
    pos = (v.size - 1) * tau
    i = int(pos)
    if i >= v.size - 1:
        return float(v[-1])
    return float(v[i] + (pos - i) * (v[i + 1] - v[i]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 300), st.floats(0.0, 1.0))
def test_interpolated_quantile_matches_sort_oracle(seed, n, tau):
    values = np.random.default_rng(seed).standard_normal(n) * 10.0
    assert interpolated_quantile(values, tau) == _oracle_quantile(values, tau)


def test_interpolated_quantile_against_numpy(rng):
    for _ in range(100):
        values = rng.standard_normal(rng.integers(2, 50))
        tau = float(rng.uniform())
        np.testing.assert_allclose(interpolated_quantile(values, tau),
                                   np.quantile(values, tau), rtol=1e-12, atol=1e-12)


def test_vector_quantiles_match_scalar(rng):
    values = rng.standard_normal(37)
    taus = np.linspace(0.0, 1.0, 21)
    vec = interpolated_quantiles(values, taus)
    scal = np.array([interpolated_quantile(values, t) for t in taus])
    np.testing.assert_array_equal(vec, scal)


def test_quantile_validation():
    with pytest.raises(ValueError):
        interpolated_quantile(np.arange(5.0), 1.5)
    with pytest.raises(EmptyEnsembleError):
        interpolated_quantile(np.array([1.0]), 0.5)
    with pytest.raises(ValueError):
        interpolated_quantiles(np.arange(5.0), np.array([-0.1]))


# --------------------------------------------------------------------------
# container, transforms, summaries


def _toy_ensemble(rng, m=50):
    members = np.column_stack([
        rng.standard_normal(m) + 30.0,
        rng.standard_normal(m) + 29.0,
        np.abs(rng.standard_normal(m)) + 5.0,
    ])
    import datetime as dt

    return ForecastEnsemble(variables=("DA", "ID", "W"), members=members,
                            target_date=dt.date(2021, 6, 1), hour=13, meta={"method": "toy"})


def test_container_validation(rng):
    with pytest.raises(EmptyEnsembleError):
        ForecastEnsemble(variables=("DA",), members=np.zeros((0, 1)),
                         target_date=None, hour=1, meta={})
    with pytest.raises(EmptyEnsembleError):
        ForecastEnsemble(variables=("DA", "ID"), members=np.zeros((5, 3)),
                         target_date=None, hour=1, meta={})
    ens = _toy_ensemble(rng)
    assert ens.n_members == 50
    np.testing.assert_array_equal(ens.column(1), ens.column("ID"))
    with pytest.raises(KeyError):
        ens.column("SP")


def test_map_matches_vectorized_derivation(rng):
    ens = _toy_ensemble(rng)
    mapped = map_ensemble(ens, lambda m: m["DA"] - m["ID"], ("SP",))
    direct = derived_ensemble(ens, "SP")
    np.testing.assert_array_equal(mapped.members, direct.members)
    assert direct.variables == ("SP",)
    assert direct.meta["derived_from"] == ("DA", "ID", "W")
    with pytest.raises(KeyError):
        derived_ensemble(ens, "RL")  # needs L and RES columns
    with pytest.raises(ValueError):
        derived_ensemble(ens, "XX")


def test_ensemble_summaries(rng):
    ens = _toy_ensemble(rng)
    v = np.sort(ens.column("DA"))
    assert ensemble_quantile(ens, "DA", 0.0) == v[0]
    assert ensemble_quantile(ens, "DA", 1.0) == v[-1]
    iv = ensemble_interval(ens, "DA", 0.95)  # any alpha works on ensembles
    assert iv.lower == interpolated_quantile(v, 0.025)
    assert iv.upper == interpolated_quantile(v, 0.975)
    assert iv.lower < iv.upper
    fan = ensemble_fan(ens, "DA")
    assert fan.values.shape == (99,)
    assert np.all(np.diff(fan.values) >= 0.0)


def test_ensemble_to_csv(tmp_path, rng):
    ens = _toy_ensemble(rng)
    path = tmp_path / "members.csv"
    ensemble_to_csv(ens, path)
    lines = path.read_text().splitlines()
    meta_lines = [l for l in lines if l.startswith("#")]
    assert any("method=toy" in l for l in meta_lines)
    header = lines[len(meta_lines)]
    assert header == "DA,ID,W"
    assert len(lines) == len(meta_lines) + 1 + ens.n_members
    back = np.array([[float(x) for x in l.split(",")]
                     for l in lines[len(meta_lines) + 1:]])
    np.testing.assert_array_equal(back, ens.members)
