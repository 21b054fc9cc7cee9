"""Wind farm bidding: per MWh profit, bid fraction choice, stopping rule.

A producer with point forecast ``w_hat`` for its wind in feed bids the
fraction ``q`` of it on the day ahead market and settles the imbalance
against the intraday price.  Per MWh of realized wind the profit is

    pi(q) = q (w_hat / w) DA + (1 - q w_hat / w) ID - c_om

and exactly zero when realized wind is zero.  Applying this member wise to
a joint (DA, ID, W) ensemble turns the predictive distribution into a
profit distribution per candidate q, from which the bid is chosen:

* ``epi``: maximize the pool median,
* ``var``: maximize the pool 5% quantile,
* ``sr``: maximize mean over standard deviation (ddof 1).

Ties go to the smallest q.  The stopping rule curtails the hour when the
chosen pool's tau quantile is negative; tau = 1 means never curtail.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import EmptyEnsembleError, MisalignedError, NoTradesError
from .ensembles import ForecastEnsemble, interpolated_quantile

C_OM_DEFAULT = 10.0
Q_GRID_DEFAULT = np.round(np.arange(101) / 100.0, 2)
Q_GRID_DEFAULT.flags.writeable = False

STRATEGIES = ("epi", "var", "sr")
NAIVE_MODES = ("naive", "limited")


def profit_per_mwh(q, w_hat_ratio, da, idp, c_om=C_OM_DEFAULT):
    """Per MWh profit; ``w_hat_ratio`` None or NaN marks zero wind."""
    if w_hat_ratio is None or np.isnan(w_hat_ratio):
        return 0.0
    qw = q * w_hat_ratio
    return (qw * da + (1.0 - qw) * idp) - c_om


def realized_profit(q, w_hat, w, da, idp, c_om=C_OM_DEFAULT):
    """Per MWh profit from realized wind; zero wind yields exactly zero."""
    if w <= 0.0:
        return 0.0
    return profit_per_mwh(q, w_hat / w, da, idp, c_om)


def plant_profit(q, w_hat, w, da, idp, c_om=C_OM_DEFAULT):
    """Whole plant profit: q w_hat DA + (w - q w_hat) ID - w c_om."""
    return q * w_hat * da + (w - q * w_hat) * idp - w * c_om


def profit_pools(ens, w_hat, q_grid=Q_GRID_DEFAULT, c_om=C_OM_DEFAULT):
    """Member profits for every candidate q; shape (len(q_grid), M)."""
    da = np.ascontiguousarray(ens.column("DA"))
    idp = np.ascontiguousarray(ens.column("ID"))
    w = np.ascontiguousarray(ens.column("W"))
    return _kernels.profit_pools(da, idp, w, float(w_hat),
                                 np.ascontiguousarray(q_grid, dtype=np.float64), float(c_om))


def profit_ensemble(ens, w_hat, q, c_om=C_OM_DEFAULT):
    """Profit distribution at one bid fraction as a 1-D ensemble."""
    pool = profit_pools(ens, w_hat, np.array([float(q)]), c_om)[0]
    meta = dict(ens.meta)
    meta.update(q=float(q), w_hat=float(w_hat), c_om=float(c_om))
    return ForecastEnsemble(variables=("profit",), members=pool[:, None],
                            target_date=ens.target_date, hour=ens.hour, meta=meta)


@dataclass(frozen=True)
class TradeDecision:
    strategy: str
    q: float
    curtail: bool = False
    tau: float = None
    criterion: float = None
    stop_quantile: float = None
    degenerate_sr: bool = False


def _row_quantiles(pools, tau):
    """Interpolated quantile of every row, same arithmetic as the scalar."""
    srt = np.sort(pools, axis=1)
    n = srt.shape[1]
    if n < 2:
        raise EmptyEnsembleError("need at least two members per pool")
    pos = (n - 1) * tau
    i = int(pos)
    if i >= n - 1:
        return srt[:, -1].copy()
    frac = pos - i
    return srt[:, i] + frac * (srt[:, i + 1] - srt[:, i])


def choose_q(strategy, pools, q_grid=Q_GRID_DEFAULT, var_level=0.05):
    """Pick the bid fraction maximizing the strategy criterion.

    ``pools`` is the (len(q_grid), M) profit member matrix.  An all zero
    dispersion makes ``sr`` undefined; it falls back to the ``epi`` rule
    and flags the decision.
    """
    pools = np.asarray(pools, dtype=np.float64)
    q_grid = np.asarray(q_grid, dtype=np.float64)
    if pools.ndim != 2 or pools.shape[0] != q_grid.size:
        raise EmptyEnsembleError(
            f"pool matrix {pools.shape} does not match {q_grid.size} candidate bids")
    degenerate = False
    if strategy == "epi":
        crit = _row_quantiles(pools, 0.5)
    elif strategy == "var":
        crit = _row_quantiles(pools, var_level)
    elif strategy == "sr":
        if pools.shape[1] < 2:
            raise EmptyEnsembleError("sr needs at least two members")
        stds = pools.std(axis=1, ddof=1)
        if np.all(stds == 0.0):
            degenerate = True
            crit = _row_quantiles(pools, 0.5)
        else:
            means = pools.mean(axis=1)
            crit = np.where(stds > 0.0, means / np.where(stds > 0.0, stds, 1.0), -np.inf)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    j = int(np.argmax(crit))  # first maximum: ties resolve to the smallest q
    return TradeDecision(strategy=strategy, q=float(q_grid[j]),
                         criterion=float(crit[j]), degenerate_sr=degenerate)


def stopping_rule(decision, pool_at_q, tau):
    """Curtail when the profit pool's tau quantile is negative.

    ``tau = 1`` is read as never curtail and reproduces the plain decision.
    """
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau {tau} outside (0, 1]")
    if tau >= 1.0:
        return replace(decision, tau=1.0, curtail=False, stop_quantile=None)
    q_tau = interpolated_quantile(np.asarray(pool_at_q, dtype=np.float64), tau)
    return replace(decision, tau=float(tau), curtail=bool(q_tau < 0.0), stop_quantile=q_tau)


def naive_decision(mode, realized_da=None):
    """Benchmarks: always bid everything; ``limited`` curtails at DA < 0.

    The limited variant models a bid with price floor zero: the order does
    not fill when the day ahead price settles strictly below zero.
    """
    if mode == "naive":
        return TradeDecision(strategy="naive", q=1.0)
    if mode == "limited":
        if realized_da is None:
            raise ValueError("limited mode needs the realized day ahead price")
        return TradeDecision(strategy="limited", q=1.0, curtail=bool(realized_da < 0.0))
    raise ValueError(f"unknown naive mode {mode!r}")


@dataclass(frozen=True)
class StrategyOutcome:
    profits: np.ndarray
    traded: np.ndarray
    trade_frequency: float
    avg_profit: float
    profit_per_trade: float
    var5: float
    n_trades: int


def evaluate_strategy(decisions, da, idp, w, w_hat, c_om=C_OM_DEFAULT, strict=False):
    """Realized outcome of a decision stream.

    Curtailed hours contribute zero profit to the overall average; per
    trade statistics run over traded hours only and are NaN when every
    hour was curtailed (or raise :class:`NoTradesError` when ``strict``).
    """
    da = np.asarray(da, dtype=np.float64).ravel()
    idp = np.asarray(idp, dtype=np.float64).ravel()
    w = np.asarray(w, dtype=np.float64).ravel()
    w_hat = np.asarray(w_hat, dtype=np.float64).ravel()
    n = da.size
    if not (idp.size == w.size == w_hat.size == n and len(decisions) == n):
        raise MisalignedError("decision stream and realized arrays differ in length")
    profits = np.zeros(n)
    traded = np.zeros(n, dtype=bool)
    for i, dec in enumerate(decisions):
        if dec.curtail:
            continue
        traded[i] = True
        profits[i] = realized_profit(dec.q, w_hat[i], w[i], da[i], idp[i], c_om)
    n_trades = int(traded.sum())
    if n_trades == 0 and strict:
        raise NoTradesError("every hour was curtailed")
    if n_trades == 0:
        per_trade = float("nan")
        var5 = float("nan")
    else:
        traded_profits = profits[traded]
        per_trade = float(traded_profits.mean())
        var5 = float(traded_profits[0]) if n_trades == 1 else \
            interpolated_quantile(traded_profits, 0.05)
    return StrategyOutcome(
        profits=profits, traded=traded,
        trade_frequency=float(n_trades / n),
        avg_profit=float(profits.mean()),
        profit_per_trade=per_trade,
        var5=var5,
        n_trades=n_trades,
    )


def relative_pct(value, base):
    """Percentage difference against a benchmark, NaN when degenerate."""
    if base == 0.0 or not np.isfinite(base) or not np.isfinite(value):
        return float("nan")
    return 100.0 * (value - base) / base
