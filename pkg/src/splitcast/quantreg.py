"""Linear quantile regression fitted by an interior point method.

The fit solves the standard linear program of quantile regression (split
the residual into positive and negative parts, weight them by tau and
1 - tau).  The solver is a primal dual interior point iteration on the
bounded variable dual formulation with a Mehrotra style corrector step,
which is deterministic and fast for the short, narrow designs used here.

A fan is the vector of all 99 percentile forecasts tau = 0.01 .. 0.99.
Quantile crossing is repaired by sorting the fan values.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateDesignError,
    SolverFailureError,
    UnsupportedAlphaError,
)
from .models import check_design

TAU_GRID = np.round(np.arange(1, 100) / 100.0, 2)
TAU_GRID.flags.writeable = False

MAX_ITER = 500
DUALITY_TOL = 1e-8
_STEP_DAMP = 0.9995


def pinball(y, q, tau):
    """Pinball (check) loss of quantile forecast ``q`` against outcome ``y``."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau {tau} outside (0, 1)")
    diff = np.asarray(y, dtype=np.float64) - q
    return np.where(diff < 0.0, (tau - 1.0) * diff, tau * diff)


def _max_step(v, dv):
    """Largest multiple of ``dv`` keeping ``v`` positive."""
    shrink = dv < 0.0
    if not np.any(shrink):
        return np.inf
    return np.min(-v[shrink] / dv[shrink])


def qr_fit(X, y, tau, max_iter=MAX_ITER, tol=DUALITY_TOL):
    """Coefficients minimizing the pinball loss at level ``tau``.

    Raises :class:`SolverFailureError` when the duality gap has not closed
    after ``max_iter`` iterations and :class:`DegenerateDesignError` when
    the design is rank deficient.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau {tau} outside (0, 1)")
    X, y = check_design(X, y)
    n, p = X.shape

    # dual: max y'a subject to X'a = (1 - tau) X'1, 0 <= a <= 1
    c = -y
    u = np.ones(n)
    a = (1.0 - tau) * u

    s = u - a
    theta = np.linalg.lstsq(X, c, rcond=None)[0]
    r = c - X @ theta
    pad = np.abs(r) < 1e-5
    z = np.maximum(r, 0.0) + 1e-5 * pad
    w = np.maximum(-r, 0.0) + 1e-5 * pad
    # complementarity is the duality gap here (feasibility holds by
    # construction) and, unlike the objective difference, has no floating
    # point cancellation floor
    gap = z @ a + w @ s
    scale = 1.0 + abs(c @ a)

    it = 0
    while gap > tol * scale and it < max_iter:
        it += 1
        with np.errstate(divide="ignore", over="ignore"):
            denom = z / a + w / s
            q = np.where(np.isfinite(denom), 1.0 / denom, 0.0)
        r = z - w
        gram = (X.T * q) @ X
        try:
            dtheta = np.linalg.solve(gram, X.T @ (q * r))
        except np.linalg.LinAlgError as exc:
            raise DegenerateDesignError("singular weighted design in qr_fit") from exc
        da = q * (X @ dtheta - r)
        ds = -da
        dz = -z * (1.0 + da / a)
        dw = -w * (1.0 - da / s)

        fp = min(_STEP_DAMP * min(_max_step(a, da), _max_step(s, ds)), 1.0)
        fd = min(_STEP_DAMP * min(_max_step(z, dz), _max_step(w, dw)), 1.0)

        mu = z @ a + w @ s
        if min(fp, fd) < 1.0 and mu > 0.0:
            # Mehrotra corrector: retarget the barrier from the affine step
            g = (z + fd * dz) @ (a + fp * da) + (w + fd * dw) @ (s + fp * ds)
            mu = mu * max(g / mu, 0.0) ** 3 / (2.0 * n)
            ainv = 1.0 / a
            sinv = 1.0 / s
            dadz = da * dz * ainv
            dsdw = ds * dw * sinv
            corr = mu * (ainv - sinv) - dadz + dsdw
            try:
                dtheta = np.linalg.solve(gram, X.T @ (q * (r - corr)))
            except np.linalg.LinAlgError as exc:
                raise DegenerateDesignError("singular weighted design in qr_fit") from exc
            da = q * (X @ dtheta - r + corr)
            ds = -da
            dz = mu * ainv - z - z * ainv * da - dadz
            dw = mu * sinv - w - w * sinv * ds - dsdw
            fp = min(_STEP_DAMP * min(_max_step(a, da), _max_step(s, ds)), 1.0)
            fd = min(_STEP_DAMP * min(_max_step(z, dz), _max_step(w, dw)), 1.0)

        a = a + fp * da
        s = s + fp * ds
        theta = theta + fd * dtheta
        z = z + fd * dz
        w = w + fd * dw
        gap = z @ a + w @ s
        scale = 1.0 + abs(c @ a)

    if gap > tol * scale:
        raise SolverFailureError(f"duality gap {gap:g} after {it} iterations")
    return -theta


def qr_fit_fan(X, y, taus=TAU_GRID, max_iter=MAX_ITER, tol=DUALITY_TOL):
    """Fit one coefficient vector per tau; returns shape (len(taus), p)."""
    X, y = check_design(X, y)
    return np.stack([qr_fit(X, y, float(t), max_iter, tol) for t in taus])


@dataclass(frozen=True)
class QuantileFan:
    """99 percentile forecasts, non decreasing in tau."""

    taus: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.taus.flags.writeable = False
        self.values.flags.writeable = False


@dataclass(frozen=True)
class PredictionInterval:
    lower: float
    upper: float
    nominal: float


def qr_fan(thetas, row, taus=TAU_GRID):
    """Evaluate per tau coefficients on one row, sorting away any crossing."""
    from .errors import ShapeMismatchError
    from .features import RegressorRow

    thetas = np.asarray(thetas, dtype=np.float64)
    if thetas.shape[0] != len(taus):
        raise ValueError("one coefficient vector per tau required")
    values = row.values if isinstance(row, RegressorRow) else np.asarray(row, dtype=np.float64)
    if thetas.shape[1] != values.shape[0]:
        raise ShapeMismatchError(
            f"row has {values.shape[0]} values, coefficients have {thetas.shape[1]}")
    raw = thetas @ values
    return QuantileFan(taus=np.asarray(taus, dtype=np.float64).copy(), values=np.sort(raw))


def fan_interval(fan, alpha):
    """Central interval at nominal level ``alpha`` read off a fan.

    ``alpha`` must put both tail quantiles on the 1% grid, e.g. 0.80, 0.90,
    0.98; otherwise :class:`UnsupportedAlphaError` is raised.
    """
    if not 0.0 < alpha < 1.0:
        raise UnsupportedAlphaError(f"nominal level {alpha} outside (0, 1)")
    lo_tau = (1.0 - alpha) / 2.0
    pos = lo_tau * 100.0
    if abs(pos - round(pos)) > 1e-9 or not 1 <= round(pos) <= 49:
        raise UnsupportedAlphaError(f"tails of alpha={alpha} are off the percentile grid")
    i = int(round(pos)) - 1
    return PredictionInterval(lower=float(fan.values[i]), upper=float(fan.values[98 - i]),
                              nominal=alpha)


# kept under its contract name as well
qr_interval = fan_interval
