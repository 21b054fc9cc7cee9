"""Hourly market data panel: loading, validation, DST repair, derived series.

The panel is a dense grid of consecutive calendar days times 24 delivery
hours.  Hour ``h`` in 1..24 is stored in column ``h - 1``.  Hourly series:

========  =====================================================
``DA``    day ahead auction price, EUR/MWh
``ID``    intraday price index, EUR/MWh
``L``     system load, GWh
``W``     wind generation, GWh
``S``     solar generation, GWh
``RES``   renewable generation, always ``W + S``
``FL``    TSO day ahead load forecast, GWh
``FW``    TSO day ahead wind forecast, GWh
``FS``    TSO day ahead solar forecast, GWh
``FRES``  TSO renewable forecast, always ``FW + FS``
========  =====================================================

Daily series ``C`` and ``G`` are fuel (coal, gas) closing prices.  Prices
may be negative; load and generation may not.
"""

import csv
import datetime as dt
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    GapAtBoundaryError,
    InvalidDGPError,
    MissingColumnError,
    NegativeGenerationError,
    NonHourlyResolutionError,
    PanelIntegrityError,
    UnparseableTimestampError,
)

HOURLY_SERIES = ("DA", "ID", "L", "W", "S", "RES", "FL", "FW", "FS", "FRES")
DAILY_SERIES = ("C", "G")
GENERATION_SERIES = ("L", "W", "S", "RES", "FL", "FW", "FS", "FRES")
COMPOSITE_TOL = 1e-9

# Hour of day (1..24) after which same day realizations are unavailable at
# forecasting time.  Hours 1..10 are observed, hours 11..24 are not.
FORECAST_TIME_HOUR = 10

DEFAULT_SCHEMA = {
    "date": "date",
    "hour": "hour",
    "DA": "da",
    "ID": "id",
    "L": "load",
    "W": "wind",
    "S": "solar",
    "FL": "load_fc",
    "FW": "wind_fc",
    "FS": "solar_fc",
    "C": "coal",
    "G": "gas",
}
# written by write_panel, validated against W + S when present in a file
OPTIONAL_SCHEMA = {"RES": "res", "FRES": "res_fc"}


@dataclass(frozen=True)
class MarketPanel:
    """Immutable market data grid.

    ``missing_cells`` holds ``(day_index, hour_index)`` pairs (0 based hour
    index) where at least one hourly series is NaN, e.g. a spring forward
    DST gap.  ``duplicate_cells`` maps such pairs to the second reading of a
    fall back duplicated hour.  A normalized panel has neither.
    """

    dates: tuple
    hourly: dict
    daily: dict
    missing_cells: frozenset = field(default_factory=frozenset)
    duplicate_cells: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.dates)
        for name in HOURLY_SERIES:
            arr = self.hourly[name]
            if arr.shape != (n, 24):
                raise PanelIntegrityError(f"{name}: expected shape {(n, 24)}, got {arr.shape}")
            arr.flags.writeable = False
        for name in DAILY_SERIES:
            arr = self.daily[name]
            if arr.shape != (n,):
                raise PanelIntegrityError(f"{name}: expected shape {(n,)}, got {arr.shape}")
            arr.flags.writeable = False
        for a, b in zip(self.dates, self.dates[1:]):
            if (b - a).days != 1:
                raise PanelIntegrityError(f"dates not consecutive: {a} -> {b}")

    @property
    def n_days(self):
        return len(self.dates)

    @property
    def is_normalized(self):
        return not self.missing_cells and not self.duplicate_cells

    def series(self, name):
        if name in self.hourly:
            return self.hourly[name]
        if name in self.daily:
            return self.daily[name]
        raise KeyError(name)

    def day_index(self, date):
        idx = (date - self.dates[0]).days
        if idx < 0 or idx >= self.n_days or self.dates[idx] != date:
            raise KeyError(f"{date} not in panel")
        return idx

    def weekdays(self):
        """Day of week per panel day, Monday = 0."""
        return np.array([d.weekday() for d in self.dates], dtype=np.intp)


@dataclass(frozen=True)
class DerivedSeries:
    """Series derived cell by cell from a normalized panel."""

    RL: np.ndarray  # residual load, L - RES
    SP: np.ndarray  # price spread, DA - ID

    def __post_init__(self):
        self.RL.flags.writeable = False
        self.SP.flags.writeable = False


@dataclass(frozen=True)
class InfoSet:
    """Starred series available when forecasts are produced at 11:00.

    For the day preceding delivery, hours 1..10 carry the realization and
    hours 11..24 the stand in: the TSO forecast for load, wind and
    renewables, the day ahead price for the intraday price and the spread.
    """

    L_star: np.ndarray
    W_star: np.ndarray
    RES_star: np.ndarray
    ID_star: np.ndarray
    SP_star: np.ndarray
    forecast_time_hour: int = FORECAST_TIME_HOUR

    def __post_init__(self):
        for name in ("L_star", "W_star", "RES_star", "ID_star", "SP_star"):
            getattr(self, name).flags.writeable = False


# --------------------------------------------------------------------------
# loading and writing


def _parse_date(text):
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise UnparseableTimestampError(f"bad date {text!r}") from exc


def _parse_hour(text):
    try:
        value = float(text)
    except ValueError as exc:
        raise UnparseableTimestampError(f"bad hour {text!r}") from exc
    hour = int(value)
    if hour != value or not 1 <= hour <= 24:
        raise NonHourlyResolutionError(f"hour {text!r} not an integer in 1..24")
    return hour


def _parse_value(text, where):
    text = (text or "").strip()
    if not text:
        return math.nan
    try:
        return float(text)
    except ValueError as exc:
        raise PanelIntegrityError(f"bad numeric value {text!r} for {where}") from exc


def load_panel(path, schema=None):
    """Read a CSV file with one row per (date, hour) into a raw panel.

    ``schema`` optionally remaps canonical field names (``date``, ``hour``,
    ``DA``, ``ID``, ``L``, ``W``, ``S``, ``FL``, ``FW``, ``FS``, ``C``,
    ``G``) to the column names used in the file.  Missing rows become
    flagged missing cells, a doubled (date, hour) row becomes a flagged
    duplicate; both are resolved by :func:`dst_normalize`.  Fuel gaps
    (blank ``C``/``G``) are forward filled from the last quoted day.
    """
    colmap = dict(DEFAULT_SCHEMA)
    if schema:
        unknown = set(schema) - set(DEFAULT_SCHEMA) - set(OPTIONAL_SCHEMA)
        if unknown:
            raise MissingColumnError(f"unknown schema fields: {sorted(unknown)}")
        colmap.update(schema)

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for fieldname, col in colmap.items():
            if col not in header:
                raise MissingColumnError(f"column {col!r} (field {fieldname}) not in {path}")
        has_res = OPTIONAL_SCHEMA["RES"] in header
        has_fres = OPTIONAL_SCHEMA["FRES"] in header

        cells = {}
        dup_values = {}
        fuel_by_day = {}
        res_given = {}
        for row in reader:
            date = _parse_date(row[colmap["date"]])
            hour = _parse_hour(row[colmap["hour"]])
            key = (date, hour)
            values = {
                name: _parse_value(row[colmap[name]], f"{name}@{date} h{hour}")
                for name in ("DA", "ID", "L", "W", "S", "FL", "FW", "FS")
            }
            if key not in cells:
                cells[key] = values
            elif key not in dup_values:
                dup_values[key] = values
            else:
                raise NonHourlyResolutionError(f"cell {date} h{hour} appears more than twice")
            if has_res:
                res_given.setdefault(key, _parse_value(row[OPTIONAL_SCHEMA["RES"]], f"res@{key}"))
            if has_fres:
                res_given.setdefault((key, "F"),
                                     _parse_value(row[OPTIONAL_SCHEMA["FRES"]], f"res_fc@{key}"))
            for name in DAILY_SERIES:
                value = _parse_value(row[colmap[name]], f"{name}@{date}")
                if not math.isnan(value):
                    prev = fuel_by_day.setdefault((date, name), value)
                    if abs(prev - value) > 0:
                        raise PanelIntegrityError(f"{name} not constant within {date}")

    if not cells:
        raise PanelIntegrityError(f"{path}: no data rows")

    dates = sorted({d for d, _ in cells})
    first, last = dates[0], dates[-1]
    n = (last - first).days + 1
    all_dates = tuple(first + dt.timedelta(days=i) for i in range(n))
    if len(dates) != n:
        missing_days = sorted(set(all_dates) - set(dates))
        raise PanelIntegrityError(f"whole days absent from file: {missing_days[:3]} ...")

    hourly = {name: np.full((n, 24), np.nan) for name in ("DA", "ID", "L", "W", "S", "FL", "FW", "FS")}
    missing = set()
    duplicates = {}
    for di, date in enumerate(all_dates):
        for hour in range(1, 25):
            key = (date, hour)
            if key not in cells:
                missing.add((di, hour - 1))
                continue
            values = cells[key]
            for name, value in values.items():
                hourly[name][di, hour - 1] = value
                if math.isnan(value):
                    missing.add((di, hour - 1))
            if key in dup_values:
                duplicates[(di, hour - 1)] = dict(dup_values[key])

    for name in ("L", "W", "S", "FL", "FW", "FS"):
        arr = hourly[name]
        if np.any(arr[np.isfinite(arr)] < 0.0):
            raise NegativeGenerationError(f"negative values in generation series {name}")

    hourly["RES"] = hourly["W"] + hourly["S"]
    hourly["FRES"] = hourly["FW"] + hourly["FS"]
    for (di, hi), extra in duplicates.items():
        extra["RES"] = extra["W"] + extra["S"]
        extra["FRES"] = extra["FW"] + extra["FS"]
    if has_res or has_fres:
        for di, date in enumerate(all_dates):
            for hour in range(1, 25):
                for tag, key2, name in ((None, (date, hour), "RES"),
                                        ("F", ((date, hour), "F"), "FRES")):
                    given = res_given.get(key2, math.nan)
                    computed = hourly[name][di, hour - 1]
                    if math.isfinite(given) and math.isfinite(computed) \
                            and abs(given - computed) > COMPOSITE_TOL:
                        raise PanelIntegrityError(
                            f"{name} at {date} h{hour} is not wind + solar")

    daily = {}
    for name in DAILY_SERIES:
        col = np.full(n, np.nan)
        for di, date in enumerate(all_dates):
            if (date, name) in fuel_by_day:
                col[di] = fuel_by_day[(date, name)]
        # weekend and holiday gaps carry the last quoted closing price
        for di in range(n):
            if math.isnan(col[di]):
                if di == 0:
                    raise GapAtBoundaryError(f"{name} missing on first panel day")
                col[di] = col[di - 1]
        daily[name] = col

    return MarketPanel(dates=all_dates, hourly=hourly, daily=daily,
                       missing_cells=frozenset(missing), duplicate_cells=duplicates)


def write_panel(panel, path, schema=None):
    """Write a panel to CSV so that :func:`load_panel` reproduces it exactly.

    Duplicated DST cells are written as doubled rows, missing cells as rows
    with blank values.  Floats are written with shortest round trip
    precision.
    """
    colmap = dict(DEFAULT_SCHEMA)
    if schema:
        colmap.update(schema)

    def fmt(value):
        return "" if math.isnan(value) else repr(float(value))

    fields = ["date", "hour", "DA", "ID", "L", "W", "S", "FL", "FW", "FS", "C", "G"]
    header = [colmap[f] for f in fields] + [OPTIONAL_SCHEMA["RES"], OPTIONAL_SCHEMA["FRES"]]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for di, date in enumerate(panel.dates):
            for hi in range(24):
                base = [date.isoformat(), str(hi + 1)]
                row = base + [fmt(panel.hourly[name][di, hi]) for name in
                              ("DA", "ID", "L", "W", "S", "FL", "FW", "FS")]
                row += [fmt(panel.daily["C"][di]), fmt(panel.daily["G"][di])]
                row += [fmt(panel.hourly["RES"][di, hi]), fmt(panel.hourly["FRES"][di, hi])]
                writer.writerow(row)
                if (di, hi) in panel.duplicate_cells:
                    extra = panel.duplicate_cells[(di, hi)]
                    row2 = base + [fmt(extra[name]) for name in
                                   ("DA", "ID", "L", "W", "S", "FL", "FW", "FS")]
                    row2 += [fmt(panel.daily["C"][di]), fmt(panel.daily["G"][di])]
                    row2 += [fmt(extra["RES"]), fmt(extra["FRES"])]
                    writer.writerow(row2)


# --------------------------------------------------------------------------
# DST repair and derived series


def dst_normalize(panel):
    """Resolve DST artifacts: average duplicated hours, fill missing cells.

    A duplicated cell becomes the arithmetic mean of its two readings.  A
    missing cell becomes the mean of the temporally nearest preceding and
    following observed values of the same series.  Idempotent; raises
    :class:`GapAtBoundaryError` when a gap touches the panel boundary.
    """
    if panel.is_normalized:
        return panel

    hourly = {name: panel.hourly[name].copy() for name in ("DA", "ID", "L", "W", "S", "FL", "FW", "FS")}
    for (di, hi), extra in panel.duplicate_cells.items():
        for name in hourly:
            first = hourly[name][di, hi]
            hourly[name][di, hi] = (first + extra[name]) / 2.0

    for name in hourly:
        flat = hourly[name].reshape(-1)
        gaps = np.flatnonzero(np.isnan(flat))
        for pos in gaps:
            before = pos - 1
            while before >= 0 and math.isnan(flat[before]):
                before -= 1
            after = pos + 1
            while after < flat.size and math.isnan(flat[after]):
                after += 1
            if before < 0 or after >= flat.size:
                raise GapAtBoundaryError(
                    f"{name}: gap at flat position {pos} touches the panel boundary")
            flat[pos] = (flat[before] + flat[after]) / 2.0
        hourly[name] = flat.reshape(panel.hourly[name].shape)

    hourly["RES"] = hourly["W"] + hourly["S"]
    hourly["FRES"] = hourly["FW"] + hourly["FS"]
    daily = {name: panel.daily[name].copy() for name in DAILY_SERIES}
    return MarketPanel(dates=panel.dates, hourly=hourly, daily=daily,
                       missing_cells=frozenset(), duplicate_cells={})


def derive_series(panel):
    """Residual load and price spread of a normalized panel."""
    if not panel.is_normalized:
        raise PanelIntegrityError("derive_series needs a normalized panel")
    rl = panel.hourly["L"] - panel.hourly["RES"]
    sp = panel.hourly["DA"] - panel.hourly["ID"]
    return DerivedSeries(RL=rl, SP=sp)


def build_info_set(panel, derived):
    """Starred series simulating the 11:00 information cut for every day."""
    cut = FORECAST_TIME_HOUR  # column index of the first unobserved hour

    def splice(realized, stand_in):
        out = realized.copy()
        out[:, cut:] = stand_in[:, cut:]
        return out

    return InfoSet(
        L_star=splice(panel.hourly["L"], panel.hourly["FL"]),
        W_star=splice(panel.hourly["W"], panel.hourly["FW"]),
        RES_star=splice(panel.hourly["RES"], panel.hourly["FRES"]),
        ID_star=splice(panel.hourly["ID"], panel.hourly["DA"]),
        SP_star=splice(derived.SP, panel.hourly["DA"]),
    )


def validate_panel(panel):
    """Run integrity checks; returns a list of problem descriptions."""
    problems = []
    res_err = np.max(np.abs(panel.hourly["RES"] - (panel.hourly["W"] + panel.hourly["S"])))
    if not (np.isnan(res_err) or res_err <= COMPOSITE_TOL):
        problems.append(f"RES deviates from W + S by up to {res_err:g}")
    fres_err = np.max(np.abs(panel.hourly["FRES"] - (panel.hourly["FW"] + panel.hourly["FS"])))
    if not (np.isnan(fres_err) or fres_err <= COMPOSITE_TOL):
        problems.append(f"FRES deviates from FW + FS by up to {fres_err:g}")
    for name in GENERATION_SERIES:
        arr = panel.hourly[name]
        if np.any(arr[np.isfinite(arr)] < 0.0):
            problems.append(f"negative values in {name}")
    for name in DAILY_SERIES:
        if not np.all(np.isfinite(panel.daily[name])):
            problems.append(f"non finite fuel series {name}")
    flagged = panel.missing_cells
    for name in ("DA", "ID", "L", "W", "S", "FL", "FW", "FS"):
        nan_cells = {(int(i), int(j)) for i, j in zip(*np.nonzero(np.isnan(panel.hourly[name])))}
        stray = nan_cells - set(flagged)
        if stray:
            problems.append(f"{name}: NaN at unflagged cells {sorted(stray)[:3]}")
    return problems


# --------------------------------------------------------------------------
# synthetic data generator


SYNTH_SERIES = ("DA", "ID", "L", "W", "S")

_DEFAULT_CORR = np.array([
    # DA     ID     L      W      S
    [1.00, 0.90, 0.35, -0.25, -0.10],
    [0.90, 1.00, 0.30, -0.20, -0.10],
    [0.35, 0.30, 1.00, 0.00, 0.05],
    [-0.25, -0.20, 0.00, 1.00, 0.10],
    [-0.10, -0.10, 0.05, 0.10, 1.00],
])

_PHASE = {"DA": 0.0, "ID": 0.1, "L": -1.1, "W": 1.3, "S": -2.0}


@dataclass(frozen=True)
class SyntheticConfig:
    """Linear Gaussian test bed configuration.

    Each hour of each series follows an AR(1) over days around a diurnal
    mean profile; innovations are correlated across series through
    ``noise_corr``.  Prices can additionally load on the contemporaneous
    load and renewables anomalies.  TSO forecast columns are the realized
    series plus independent Gaussian noise.
    """

    days: int = 400
    start_date: dt.date = dt.date(2020, 1, 1)
    phi: dict = field(default_factory=lambda: {"DA": 0.75, "ID": 0.75, "L": 0.85, "W": 0.70, "S": 0.60})
    level: dict = field(default_factory=lambda: {"DA": 38.0, "ID": 38.0, "L": 62.0, "W": 10.0, "S": 6.0})
    diurnal_amplitude: dict = field(default_factory=lambda: {"DA": 7.0, "ID": 7.0, "L": 9.0, "W": 1.0, "S": 1.5})
    noise_sd: dict = field(default_factory=lambda: {"DA": 8.0, "ID": 8.5, "L": 2.0, "W": 1.0, "S": 0.7})
    noise_corr: np.ndarray = field(default_factory=lambda: _DEFAULT_CORR.copy())
    price_on_load: float = 0.0
    price_on_res: float = 0.0
    forecast_noise_sd: dict = field(default_factory=lambda: {"FL": 0.8, "FW": 0.5, "FS": 0.35})
    fuel_level: tuple = (70.0, 20.0)
    fuel_phi: float = 0.98
    fuel_sd: tuple = (0.6, 0.25)


def _diurnal_mean(cfg, name):
    hours = np.arange(24)
    return cfg.level[name] + cfg.diurnal_amplitude[name] * np.sin(
        2.0 * math.pi * hours / 24.0 + _PHASE[name])


def generate_synthetic_panel(cfg, seed):
    """Generate a normalized panel from a :class:`SyntheticConfig`.

    The same seed always yields bit identical output.  Raises
    :class:`InvalidDGPError` for explosive AR coefficients or a non
    positive definite innovation correlation.
    """
    if cfg.days < 15:
        raise InvalidDGPError("need at least 15 days of synthetic data")
    for name in SYNTH_SERIES:
        if abs(cfg.phi[name]) >= 1.0:
            raise InvalidDGPError(f"|phi| >= 1 for {name}")
        if cfg.noise_sd[name] < 0.0:
            raise InvalidDGPError(f"negative noise sd for {name}")
    if abs(cfg.fuel_phi) >= 1.0:
        raise InvalidDGPError("|phi| >= 1 for fuel prices")
    corr = np.asarray(cfg.noise_corr, dtype=np.float64)
    if corr.shape != (5, 5) or not np.allclose(corr, corr.T):
        raise InvalidDGPError("noise_corr must be a symmetric 5x5 matrix")
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError as exc:
        raise InvalidDGPError("noise_corr not positive definite") from exc

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n = cfg.days
    sd = np.array([cfg.noise_sd[name] for name in SYNTH_SERIES])
    phi = np.array([cfg.phi[name] for name in SYNTH_SERIES])
    means = np.stack([_diurnal_mean(cfg, name) for name in SYNTH_SERIES])  # (5, 24)

    z = rng.standard_normal((n, 24, 5))
    eps = (z @ chol.T) * sd  # innovations, correlated across series

    anomalies = np.empty((n, 5, 24))
    start_scale = 1.0 / np.sqrt(1.0 - phi ** 2)
    anomalies[0] = eps[0].T * start_scale[:, None]
    for t in range(1, n):
        anomalies[t] = phi[:, None] * anomalies[t - 1] + eps[t].T

    values = {name: anomalies[:, i, :] + means[i][None, :] for i, name in enumerate(SYNTH_SERIES)}
    if cfg.price_on_load or cfg.price_on_res:
        load_anom = anomalies[:, 2, :]
        res_anom = anomalies[:, 3, :] + anomalies[:, 4, :]
        for name in ("DA", "ID"):
            values[name] = values[name] + cfg.price_on_load * load_anom + cfg.price_on_res * res_anom

    hourly = {name: values[name] for name in SYNTH_SERIES}
    for fc_name, src, key in (("FL", "L", "FL"), ("FW", "W", "FW"), ("FS", "S", "FS")):
        noise_sd = cfg.forecast_noise_sd[key]
        noise = rng.standard_normal((n, 24)) * noise_sd if noise_sd > 0 else np.zeros((n, 24))
        hourly[fc_name] = hourly[src] + noise
    hourly["RES"] = hourly["W"] + hourly["S"]
    hourly["FRES"] = hourly["FW"] + hourly["FS"]

    daily = {}
    for (name, level, fsd) in (("C", cfg.fuel_level[0], cfg.fuel_sd[0]),
                               ("G", cfg.fuel_level[1], cfg.fuel_sd[1])):
        shocks = rng.standard_normal(n) * fsd
        series = np.empty(n)
        series[0] = level + shocks[0] / math.sqrt(1.0 - cfg.fuel_phi ** 2)
        for t in range(1, n):
            series[t] = level + cfg.fuel_phi * (series[t - 1] - level) + shocks[t]
        daily[name] = series

    dates = tuple(cfg.start_date + dt.timedelta(days=i) for i in range(n))
    return MarketPanel(dates=dates, hourly=hourly, daily=daily)
