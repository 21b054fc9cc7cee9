"""Ordinary least squares fitting of the expert models."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDesignError, ShapeMismatchError, TooFewRowsError
from .features import RegressorRow


@dataclass(frozen=True)
class CoefficientSet:
    """Fitted coefficients plus the spec and sample window they came from."""

    beta: np.ndarray
    spec: object = None
    window: tuple = None
    labels: tuple = None

    def __post_init__(self):
        self.beta.flags.writeable = False


def check_design(X, y=None):
    """Shared fit preconditions: finite values, enough rows, no dead column."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeMismatchError(f"design must be 2-D, got shape {X.shape}")
    n, p = X.shape
    if n < 2 * p:
        raise TooFewRowsError(f"{n} rows for {p} regressors, need at least {2 * p}")
    if not np.all(np.isfinite(X)):
        raise DegenerateDesignError("non finite values in design matrix")
    dead = np.flatnonzero(~X.any(axis=0))
    if dead.size:
        raise DegenerateDesignError(f"all zero design column(s) at {dead.tolist()}")
    if y is not None:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (n,):
            raise ShapeMismatchError(f"targets shape {y.shape} does not match {n} rows")
        if not np.all(np.isfinite(y)):
            raise DegenerateDesignError("non finite values in targets")
        return X, y
    return X


def ols_fit(X, y, spec=None, window=None, labels=None):
    """Least squares fit; minimum norm solution when the design is singular.

    Deterministic: refitting identical inputs is bit identical.
    """
    X, y = check_design(X, y)
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return CoefficientSet(beta=beta, spec=spec, window=window, labels=labels)


def point_forecast(coeffs, row):
    """Inner product of a coefficient set with one regressor row."""
    values = row.values if isinstance(row, RegressorRow) else np.asarray(row, dtype=np.float64)
    if values.shape != coeffs.beta.shape:
        raise ShapeMismatchError(
            f"row has {values.shape} values, coefficients have {coeffs.beta.shape}")
    return float(values @ coeffs.beta)
