"""Experiment configuration: flat ``key = value`` files plus CLI overrides.

Lines are ``key = value`` pairs; ``#`` starts a comment (whole line or
trailing).  List values are comma separated.  The environment variable
``SPLITCAST_CONFIG`` names a default configuration file used when no
``--config`` flag is given.
"""

import datetime as dt
import os
from dataclasses import dataclass, field, fields, replace

from .errors import ConfigError
from .features import KINDS

ENV_CONFIG = "SPLITCAST_CONFIG"

DERIVED_KINDS = ("SP", "RL")
METHOD_NAMES = ("point", "qr", "hist", "ms")


def _tuple_of(caster):
    def convert(text):
        items = [part.strip() for part in str(text).split(",") if part.strip()]
        return tuple(caster(part) for part in items)
    return convert


def _bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _date(text):
    try:
        return dt.date.fromisoformat(str(text).strip())
    except ValueError as exc:
        raise ConfigError(f"not an ISO date: {text!r}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a backtest run needs besides the panel itself."""

    input_path: str = None
    output_dir: str = "splitcast_out"
    calibration_window_days: int = 365
    evaluation_days: int = 730
    evaluation_start: dt.date = None
    n_splits: int = 20
    split_ratio: float = 0.5
    master_seed: int = 20200101
    variables: tuple = ("DA", "ID", "L", "RES", "W")
    derived: tuple = ("SP", "RL")
    qr_variables: tuple = ("DA", "ID", "L", "RES", "SP", "RL")
    mv_variables: tuple = ("DA", "ID", "L", "RES")
    methods: tuple = METHOD_NAMES
    ms_modes: tuple = ("corr", "uncorr")
    interval_levels: tuple = (0.8, 0.9, 0.95, 0.98)
    m_bins: int = 10
    trading: bool = True
    trading_method: str = "ms"
    strategies: tuple = ("epi", "var", "sr")
    stopping_taus: tuple = (0.05, 0.3, 0.5, 0.7, 0.95, 1.0)
    var_level: float = 0.05
    c_om: float = 10.0
    inner_window: int = None
    workers: int = 1
    schema: dict = field(default_factory=dict)

    def validate(self):
        if self.calibration_window_days < 30:
            raise ConfigError("calibration_window_days must be at least 30")
        if self.evaluation_days < 1:
            raise ConfigError("evaluation_days must be positive")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError("split_ratio must be inside (0, 1)")
        if self.n_splits < 1:
            raise ConfigError("n_splits must be at least 1")
        for v in self.variables:
            if v not in KINDS:
                raise ConfigError(f"unknown variable {v!r}")
        for v in self.derived:
            if v not in DERIVED_KINDS:
                raise ConfigError(f"unknown derived variable {v!r}")
        for v in self.qr_variables:
            if v not in KINDS:
                raise ConfigError(f"unknown qr variable {v!r}")
        for v in self.mv_variables:
            if v not in self.variables:
                raise ConfigError(f"mv variable {v!r} not in the ensemble variable set")
        for m in self.methods:
            if m not in METHOD_NAMES:
                raise ConfigError(f"unknown method {m!r}")
        for m in self.ms_modes:
            if m not in ("corr", "uncorr"):
                raise ConfigError(f"unknown ms mode {m!r}")
        for level in self.interval_levels:
            if not 0.0 < level < 1.0:
                raise ConfigError(f"interval level {level} outside (0, 1)")
        for tau in self.stopping_taus:
            if not 0.0 < tau <= 1.0:
                raise ConfigError(f"stopping tau {tau} outside (0, 1]")
        if self.trading and self.trading_method not in ("ms", "hist"):
            raise ConfigError("trading_method must be ms or hist")
        if self.trading:
            for needed in ("DA", "ID", "W"):
                if needed not in self.variables:
                    raise ConfigError(f"trading needs variable {needed} in the ensemble set")
        if self.m_bins < 2:
            raise ConfigError("m_bins must be at least 2")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        return self


_CASTERS = {
    "input_path": str,
    "output_dir": str,
    "calibration_window_days": int,
    "evaluation_days": int,
    "evaluation_start": _date,
    "n_splits": int,
    "split_ratio": float,
    "master_seed": int,
    "variables": _tuple_of(str),
    "derived": _tuple_of(str),
    "qr_variables": _tuple_of(str),
    "mv_variables": _tuple_of(str),
    "methods": _tuple_of(str),
    "ms_modes": _tuple_of(str),
    "interval_levels": _tuple_of(float),
    "m_bins": int,
    "trading": _bool,
    "trading_method": str,
    "strategies": _tuple_of(str),
    "stopping_taus": _tuple_of(float),
    "var_level": float,
    "c_om": float,
    "inner_window": int,
    "workers": int,
}

# schema_da = price_col style keys remap CSV columns
_SCHEMA_FIELDS = ("date", "hour", "DA", "ID", "L", "W", "S", "FL", "FW", "FS", "C", "G")


def parse_config_text(text):
    """Parse ``key = value`` lines into a raw string dict."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = stripped.split("=", 1)
        raw[key.strip()] = value.strip()
    return raw


def config_from_raw(raw, base=None):
    """Typed ExperimentConfig from raw strings, layered over ``base``."""
    cfg = base or ExperimentConfig()
    updates = {}
    schema = dict(cfg.schema)
    for key, value in raw.items():
        if key.startswith("schema_"):
            fieldname = key[len("schema_"):]
            matched = next((f for f in _SCHEMA_FIELDS if f.lower() == fieldname.lower()), None)
            if matched is None:
                raise ConfigError(f"unknown schema field {fieldname!r}")
            schema[matched] = value
            continue
        if key not in _CASTERS:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            updates[key] = _CASTERS[key](value)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    if schema != cfg.schema:
        updates["schema"] = schema
    return replace(cfg, **updates)


def load_config(path=None, overrides=None):
    """Read a config file (or the SPLITCAST_CONFIG default) plus overrides.

    ``overrides`` is a dict of already typed values, e.g. from CLI flags;
    entries with value None are ignored.
    """
    cfg = ExperimentConfig()
    path = path or os.environ.get(ENV_CONFIG)
    if path:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        cfg = config_from_raw(parse_config_text(text), cfg)
    if overrides:
        updates = {k: v for k, v in overrides.items() if v is not None}
        if updates:
            cfg = replace(cfg, **updates)
    return cfg.validate()


def config_echo_lines(cfg):
    """Reproducible textual echo of a config, volatile paths excluded."""
    lines = []
    for f in fields(cfg):
        if f.name in ("input_path", "output_dir", "workers"):
            continue
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if f.name == "schema":
            for key in sorted(value):
                lines.append(f"schema_{key} = {value[key]}")
            continue
        if isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif isinstance(value, dt.date):
            text = value.isoformat()
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return lines
