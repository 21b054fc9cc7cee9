"""Joint forecast ensembles built by resampling model errors.

Two constructions share the same carrier type:

* historical simulation: a moving inner window walks through the training
  sample, each step refits the models one day ahead and keeps the whole
  error vector of that day;

* split resampling: the training sample is split at random into an
  estimation and a calibration part, the models are fitted on the
  estimation days and their joint calibration errors are recentred on the
  target day point forecast.  Repeating the split N times and pooling the
  members gives the multiple split ensemble.

Splits operate on whole days so the cross variable and cross hour error
structure of a day survives inside each member.  In ``corr`` mode all
variables share the same split plans; ``uncorr`` mode draws independent
plans per variable, which deliberately destroys cross variable
correlation.
"""

import numbers
from dataclasses import dataclass

import numpy as np

from .errors import EmptyEnsembleError, UnsupportedAlphaError
from .features import KINDS, ModelSpec, design_rows, targets
from .models import ols_fit
from .quantreg import PredictionInterval, QuantileFan, TAU_GRID


@dataclass(frozen=True)
class SplitPlan:
    """One random partition of the sample days (panel day indices)."""

    estimation_days: np.ndarray
    calibration_days: np.ndarray

    def __post_init__(self):
        self.estimation_days.flags.writeable = False
        self.calibration_days.flags.writeable = False


@dataclass(frozen=True)
class ForecastEnsemble:
    """Members of a joint predictive distribution for one (day, hour).

    ``members`` has one row per member and one column per variable.
    """

    variables: tuple
    members: np.ndarray
    target_date: object
    hour: int
    meta: dict

    def __post_init__(self):
        if self.members.ndim != 2 or self.members.shape[1] != len(self.variables):
            raise EmptyEnsembleError(
                f"members shape {self.members.shape} does not match {len(self.variables)} variables")
        if self.members.shape[0] == 0:
            raise EmptyEnsembleError("ensemble has no members")
        self.members.flags.writeable = False

    @property
    def n_members(self):
        return self.members.shape[0]

    def column(self, variable):
        return self.members[:, self._index(variable)]

    def _index(self, variable):
        if isinstance(variable, numbers.Integral):
            return int(variable)
        try:
            return self.variables.index(variable)
        except ValueError:
            raise KeyError(f"variable {variable!r} not in ensemble {self.variables}") from None


def random_split(days, ratio, rng):
    """Uniform random partition of ``days`` into estimation and calibration.

    The estimation part has ``round(ratio * len(days))`` elements (banker's
    rounding); both parts come back sorted, disjoint, and exhaustive.
    """
    days = np.asarray(days, dtype=np.intp)
    n = days.size
    n_estim = round(ratio * n)
    if not 0 < n_estim < n:
        raise ValueError(f"ratio {ratio} leaves an empty side for {n} days")
    perm = rng.permutation(n)
    return SplitPlan(
        estimation_days=np.sort(days[perm[:n_estim]]),
        calibration_days=np.sort(days[perm[n_estim:]]),
    )


def _check_variables(variables):
    variables = tuple(variables)
    if not variables:
        raise EmptyEnsembleError("no variables requested")
    for v in variables:
        if v not in KINDS:
            raise ValueError(f"unknown variable {v!r}, expected one of {KINDS}")
    return variables


def _fit_errors(X, y, fit_pos, eval_pos):
    """Fit on some rows, return forecast errors y - yhat on other rows."""
    coeffs = ols_fit(X[fit_pos], y[fit_pos])
    return y[eval_pos] - X[eval_pos] @ coeffs.beta


def ms_ensembles_for_day(data, variables, sample_days, target_day, hours,
                         n_splits, ratio, rng, mode="corr"):
    """Multiple split ensembles for one target day, batched over hours.

    Split plans are drawn once per (split, variable stream) and shared by
    all hours, matching the whole day split granularity.  ``rng`` is a
    Generator in ``corr`` mode and a sequence of per variable Generators in
    ``uncorr`` mode.  Returns ``{hour: ForecastEnsemble}``.
    """
    variables = _check_variables(variables)
    sample_days = np.sort(np.asarray(sample_days, dtype=np.intp))
    if n_splits < 1:
        raise ValueError("need at least one split")
    if mode not in ("corr", "uncorr"):
        raise ValueError(f"unknown mode {mode!r}")

    if mode == "corr":
        shared = [random_split(sample_days, ratio, rng) for _ in range(n_splits)]
        plans = {v: shared for v in variables}
    else:
        if len(rng) != len(variables):
            raise ValueError("uncorr mode needs one rng stream per variable")
        plans = {v: [random_split(sample_days, ratio, stream) for _ in range(n_splits)]
                 for v, stream in zip(variables, rng)}

    all_days = np.append(sample_days, target_day)
    out = {}
    for hour in hours:
        columns = []
        for v in variables:
            spec = ModelSpec(v, hour)
            X, _ = design_rows(spec, data, all_days)
            y = targets(spec, data, all_days)
            chunks = []
            for plan in plans[v]:
                fit_pos = np.searchsorted(sample_days, plan.estimation_days)
                calib_pos = np.searchsorted(sample_days, plan.calibration_days)
                coeffs = ols_fit(X[fit_pos], y[fit_pos])
                errors = y[calib_pos] - X[calib_pos] @ coeffs.beta
                point = X[-1] @ coeffs.beta
                chunks.append(point + errors)
            columns.append(np.concatenate(chunks))
        members = np.column_stack(columns)
        meta = {
            "method": "ms",
            "mode": mode,
            "n_splits": int(n_splits),
            "ratio": float(ratio),
            "calibration_size": int(sample_days.size - round(ratio * sample_days.size)),
            "window": (data.panel.dates[int(sample_days[0])].isoformat(),
                       data.panel.dates[int(sample_days[-1])].isoformat()),
        }
        out[hour] = ForecastEnsemble(
            variables=variables, members=members,
            target_date=data.panel.dates[int(target_day)], hour=int(hour), meta=meta)
    return out


def multiple_split_ensemble(data, variables, sample_days, target_day, hour,
                            n_splits, ratio, rng, mode="corr"):
    """Multiple split ensemble for a single (day, hour) target."""
    return ms_ensembles_for_day(data, variables, sample_days, target_day, [hour],
                                n_splits, ratio, rng, mode)[hour]


def historical_ensembles_for_day(data, variables, train_days, target_day, hours,
                                 inner_window=None):
    """Historical simulation ensembles for one target day, all hours.

    A window of ``inner_window`` days (default: half the training sample,
    floored) slides over the training days; each position is fitted and the
    next day's joint forecast error becomes one member.  The target point
    forecast comes from the window ending on the last training day.
    """
    variables = _check_variables(variables)
    train_days = np.sort(np.asarray(train_days, dtype=np.intp))
    n = train_days.size
    inner = n // 2 if inner_window is None else int(inner_window)
    if not 0 < inner < n:
        raise ValueError(f"inner window {inner} must be inside the {n} training days")

    all_days = np.append(train_days, target_day)
    out = {}
    for hour in hours:
        columns = []
        for v in variables:
            spec = ModelSpec(v, hour)
            X, _ = design_rows(spec, data, all_days)
            y = targets(spec, data, all_days)
            errors = np.empty(n - inner)
            for j, pos in enumerate(range(inner, n)):
                fit_pos = np.arange(pos - inner, pos)
                coeffs = ols_fit(X[fit_pos], y[fit_pos])
                errors[j] = y[pos] - X[pos] @ coeffs.beta
            last = ols_fit(X[n - inner:n], y[n - inner:n])
            point = X[-1] @ last.beta
            columns.append(point + errors)
        members = np.column_stack(columns)
        meta = {
            "method": "hist",
            "inner_window": int(inner),
            "window": (data.panel.dates[int(train_days[0])].isoformat(),
                       data.panel.dates[int(train_days[-1])].isoformat()),
        }
        out[hour] = ForecastEnsemble(
            variables=variables, members=members,
            target_date=data.panel.dates[int(target_day)], hour=int(hour), meta=meta)
    return out


def historical_ensemble(data, variables, train_days, target_day, hour, inner_window=None):
    """Historical simulation ensemble for a single (day, hour) target."""
    return historical_ensembles_for_day(data, variables, train_days, target_day,
                                        [hour], inner_window)[hour]


# --------------------------------------------------------------------------
# transformations and summaries


def map_ensemble(ens, fn, out_variables):
    """Apply a member wise function, e.g. the spread of prices.

    ``fn`` receives a dict {variable: value} per member and returns a
    scalar or one value per output variable.
    """
    out_variables = tuple(out_variables)
    rows = np.empty((ens.n_members, len(out_variables)))
    for j in range(ens.n_members):
        member = {v: float(ens.members[j, k]) for k, v in enumerate(ens.variables)}
        result = fn(member)
        rows[j] = result if np.ndim(result) else (result,)
    meta = dict(ens.meta)
    meta["derived_from"] = ens.variables
    return ForecastEnsemble(variables=out_variables, members=rows,
                            target_date=ens.target_date, hour=ens.hour, meta=meta)


def derived_ensemble(ens, name):
    """Vectorized spread (DA - ID) or residual load (L - RES) ensemble."""
    if name == "SP":
        col = ens.column("DA") - ens.column("ID")
    elif name == "RL":
        col = ens.column("L") - ens.column("RES")
    else:
        raise ValueError(f"no derived rule for {name!r}")
    meta = dict(ens.meta)
    meta["derived_from"] = ens.variables
    return ForecastEnsemble(variables=(name,), members=col[:, None],
                            target_date=ens.target_date, hour=ens.hour, meta=meta)


def interpolated_quantile(values, tau):
    """Empirical quantile by linear interpolation of the order statistics.

    Position 1 + (n - 1) tau in 1 based indexing; tau may be 0 or 1, which
    yield the extremes.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau {tau} outside [0, 1]")
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = v.size
    if n < 2:
        raise EmptyEnsembleError("need at least two values to interpolate")
    pos = (n - 1) * tau
    i = int(pos)
    if i >= n - 1:
        return float(v[n - 1])
    frac = pos - i
    return float(v[i] + frac * (v[i + 1] - v[i]))


def interpolated_quantiles(values, taus):
    """Vector version of :func:`interpolated_quantile`, one sort for all taus."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = v.size
    if n < 2:
        raise EmptyEnsembleError("need at least two values to interpolate")
    taus = np.asarray(taus, dtype=np.float64)
    if np.any(taus < 0.0) or np.any(taus > 1.0):
        raise ValueError("taus outside [0, 1]")
    pos = (n - 1) * taus
    i = np.minimum(pos.astype(np.intp), n - 2)
    frac = pos - i
    return v[i] + frac * (v[i + 1] - v[i])


def ensemble_quantile(ens, variable, tau):
    """Interpolated quantile of one variable's member values."""
    return interpolated_quantile(ens.column(variable), tau)


def ensemble_interval(ens, variable, alpha):
    """Central interval from member quantiles; any alpha in (0, 1) works."""
    if not 0.0 < alpha < 1.0:
        raise UnsupportedAlphaError(f"nominal level {alpha} outside (0, 1)")
    lo = (1.0 - alpha) / 2.0
    values = ens.column(variable)
    return PredictionInterval(lower=interpolated_quantile(values, lo),
                              upper=interpolated_quantile(values, 1.0 - lo),
                              nominal=alpha)


def ensemble_fan(ens, variable, taus=TAU_GRID):
    """The 99 interpolated percentiles of one variable as a QuantileFan."""
    values = interpolated_quantiles(ens.column(variable), taus)
    return QuantileFan(taus=np.asarray(taus, dtype=np.float64).copy(), values=values)


def ensemble_to_csv(ens, path):
    """One row per member, one column per variable, meta as # comments."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# target={ens.target_date.isoformat()} hour={ens.hour}\n")
        for key in sorted(ens.meta):
            fh.write(f"# {key}={ens.meta[key]}\n")
        fh.write(",".join(ens.variables) + "\n")
        for row in ens.members:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
