"""Construction of the per-quarter explanatory factors.

All factor series live on the return calendar. Per-quarter factors
(market, size spread, momentum) are 1-D; per-asset factors (idiosyncratic
risk, covariate transforms) are (n_assets, n_quarters) matrices. Missing
values propagate as NaN; quarters before a lag or window requirement is
met are missing by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import _kernels
from .errors import (
    DataError,
    InsufficientDataError,
    NonPositiveLevelError,
    NumericError,
    UnknownSeriesError,
)
from .ols import RANK_TOL
from .panel import IndexPanel, ReturnPanel, market_return_series
from .quarters import QuarterId

DEFAULT_IDIO_WINDOW = 24
DEFAULT_MOMENTUM_K = 10

MARKET_NATIONAL_PROVIDED = "national_provided"
MARKET_NATIONAL_EQUALWEIGHT = "national_equalweight"
MARKET_EQUITY = "equity"
MARKET_CHOICES = (MARKET_NATIONAL_PROVIDED, MARKET_NATIONAL_EQUALWEIGHT, MARKET_EQUITY)


@dataclass(frozen=True)
class FactorBundle:
    """Factor series sharing one calendar, with the construction recorded."""

    assets: tuple[str, ...]
    calendar: tuple[QuarterId, ...]
    market: np.ndarray
    market_kind: str
    smb: np.ndarray | None = None
    momentum: np.ndarray | None = None
    idio: np.ndarray | None = None
    d_emp: np.ndarray | None = None
    afford_lag: np.ndarray | None = None
    d_forc: np.ndarray | None = None
    equity: np.ndarray | None = None
    smb_mode: str = "single"
    momentum_mode: str = "fixed_count"
    momentum_k: int = DEFAULT_MOMENTUM_K
    idio_window: int | None = DEFAULT_IDIO_WINDOW

    def series_for_asset(self, key: str, asset_index: int) -> np.ndarray:
        """Resolve a regressor key to the 1-D series seen by one asset."""
        shared = {"market": self.market, "equity_market": self.equity,
                  "smb": self.smb, "momentum": self.momentum}
        per_asset = {"idio": self.idio, "d_emp": self.d_emp,
                     "afford_lag": self.afford_lag, "d_forc": self.d_forc}
        if key in shared:
            arr = shared[key]
            if arr is None:
                raise UnknownSeriesError(f"factor {key!r} was not constructed")
            return arr
        if key in per_asset:
            arr = per_asset[key]
            if arr is None:
                raise UnknownSeriesError(f"factor {key!r} was not constructed")
            return arr[asset_index]
        raise UnknownSeriesError(f"unknown regressor key {key!r}")


def market_factor(returns: ReturnPanel, provided: np.ndarray | None = None) -> np.ndarray:
    """Market return series: pass-through, or the equal-weight mean.

    Without a provided national series the factor is the cross-sectional
    mean of present asset returns each quarter; a quarter with no present
    return is an error because the time axis would break downstream.
    """
    if provided is not None:
        arr = np.asarray(provided, dtype=float)
        if arr.shape != (returns.n_quarters,):
            raise DataError(
                f"provided market series has length {arr.shape[0]}, "
                f"expected {returns.n_quarters}"
            )
        return arr
    present = np.isfinite(returns.returns)
    counts = present.sum(axis=0)
    if (counts == 0).any():
        q = returns.calendar[int(np.argmax(counts == 0))]
        raise InsufficientDataError(f"no present returns in {q} and no provided market series")
    sums = np.where(present, returns.returns, 0.0).sum(axis=0)
    return sums / counts


def _rank_index(p: float, n: int) -> int:
    """0-based index of the p-th percentile rank: ceiling(p*n), 1-based."""
    return math.ceil(p * n) - 1


def smb_factor(
    returns: ReturnPanel,
    price_levels: np.ndarray,
    mode: str = "single",
) -> np.ndarray:
    """Size spread: cheap-area return minus expensive-area return.

    Assets are ranked each quarter by their prior-quarter median price
    (ascending). ``single`` takes the asset at the 25th-percentile rank
    minus the asset at the 75th; ``quartile_mean`` averages the bottom and
    top price quartiles instead. ``price_levels`` is on the source
    calendar, one quarter longer than the return calendar.
    """
    if mode not in ("single", "quartile_mean"):
        raise DataError(f"unknown smb mode {mode!r}")
    n_a, n_q = returns.returns.shape
    if price_levels.shape != (n_a, n_q + 1):
        raise DataError(
            f"price levels shape {price_levels.shape} does not match "
            f"(n_assets, n_return_quarters+1) = {(n_a, n_q + 1)}"
        )
    out = np.full(n_q, np.nan)
    for t in range(n_q):
        prior_prices = price_levels[:, t]
        rets_t = returns.returns[:, t]
        eligible = np.isfinite(prior_prices) & np.isfinite(rets_t)
        n = int(eligible.sum())
        if n < 4:
            raise InsufficientDataError(
                f"{returns.calendar[t]}: only {n} assets with present return "
                "and prior price; need at least 4"
            )
        idx = np.flatnonzero(eligible)
        order = idx[np.argsort(prior_prices[idx], kind="stable")]
        if mode == "single":
            lo = order[_rank_index(0.25, n)]
            hi = order[_rank_index(0.75, n)]
            out[t] = rets_t[lo] - rets_t[hi]
        else:
            q_size = math.ceil(0.25 * n)
            low_group = order[:q_size]
            high_group = order[n - q_size:]
            out[t] = rets_t[low_group].mean() - rets_t[high_group].mean()
    return out


def momentum_factor(
    returns: ReturnPanel,
    k_extreme: int = DEFAULT_MOMENTUM_K,
    mode: str = "fixed_count",
) -> np.ndarray:
    """Winner-minus-loser spread of one-quarter-lagged returns.

    ``fixed_count`` averages the k_extreme highest and lowest lagged
    returns; ``decile`` uses k = ceiling(n/10) of the n eligible assets.
    The first quarter has no lag and is missing.
    """
    if mode not in ("fixed_count", "decile"):
        raise DataError(f"unknown momentum mode {mode!r}")
    if k_extreme < 1:
        raise DataError(f"k_extreme must be positive, got {k_extreme}")
    n_a, n_q = returns.returns.shape
    out = np.full(n_q, np.nan)
    for t in range(1, n_q):
        lagged = returns.returns[:, t - 1]
        idx = np.flatnonzero(np.isfinite(lagged))
        n = idx.size
        if mode == "fixed_count":
            k = k_extreme
            if n < 2 * k:
                raise InsufficientDataError(
                    f"{returns.calendar[t]}: {n} lagged returns, need {2 * k}"
                )
        else:
            if n < 20:
                raise InsufficientDataError(
                    f"{returns.calendar[t]}: {n} lagged returns, need 20 for decile mode"
                )
            k = math.ceil(n / 10)
        order = idx[np.argsort(lagged[idx], kind="stable")]
        out[t] = lagged[order[-k:]].mean() - lagged[order[:k]].mean()
    return out


def idiosyncratic_risk(
    returns: ReturnPanel,
    market: np.ndarray,
    window: int = DEFAULT_IDIO_WINDOW,
) -> np.ndarray:
    """Trailing-window dispersion of squared single-factor residuals.

    For each asset and quarter t with a complete window of both asset and
    market returns ending at t, fits intercept+market over the window and
    returns the sample standard deviation (n-1) of the squared residuals.
    Incomplete windows are missing. A window where the market is constant
    cannot identify the fit and raises.
    """
    if window < 8:
        raise DataError(f"idiosyncratic-risk window must be >= 8, got {window}")
    market = np.asarray(market, dtype=float)
    if market.shape != (returns.n_quarters,):
        raise DataError("market series is not aligned with the return calendar")
    if window > returns.n_quarters:
        return np.full(returns.returns.shape, np.nan)
    out, status = _kernels.rolling_idio(returns.returns, market, window, RANK_TOL)
    if (status == 2).any():
        a, t = np.argwhere(status == 2)[0]
        raise NumericError(
            f"degenerate window: market variance is zero in the {window}-quarter "
            f"window ending {returns.calendar[t]} (asset {returns.assets[a]})"
        )
    out.setflags(write=False)
    return out


def static_idiosyncratic_risk(returns: ReturnPanel, market: np.ndarray) -> np.ndarray:
    """Full-sample variant: one value per asset, broadcast over quarters."""
    market = np.asarray(market, dtype=float)
    n_a, n_q = returns.returns.shape
    out = np.full((n_a, n_q), np.nan)
    for a in range(n_a):
        y = returns.returns[a]
        mask = np.isfinite(y) & np.isfinite(market)
        if mask.sum() < 8:
            continue
        X = np.column_stack([np.ones(int(mask.sum())), market[mask]])
        beta, resid, _, rank, _, _ = _kernels.ols_qr(X, y[mask], RANK_TOL)
        if rank < 2:
            raise NumericError(f"market variance is zero over asset {returns.assets[a]}'s sample")
        sq = resid**2
        out[a, :] = float(np.std(sq, ddof=1))
    out.setflags(write=False)
    return out


def covariate_transforms(
    panel: IndexPanel,
) -> tuple[np.ndarray | None, np.ndarray | None, np.ndarray | None]:
    """(d_emp, afford_lag, d_forc) on the return calendar.

    Employment and foreclosure changes are 100*dlog of their levels;
    lagged affordability is ln(income/price) at the prior quarter. A
    present but non-positive level under a log is an error, unlike at
    ingest where only the price index is constrained.
    """
    d_emp = _dlog100(panel, "employment") if panel.has_series("employment") else None
    d_forc = _dlog100(panel, "foreclosures") if panel.has_series("foreclosures") else None
    afford = None
    if panel.has_series("income") and panel.has_series("median_price"):
        income = panel.series("income")[:, :-1]
        price = panel.series("median_price")[:, :-1]
        _require_positive(income, "income")
        _require_positive(price, "median_price")
        with np.errstate(invalid="ignore", divide="ignore"):
            afford = np.log(income / price)
    return d_emp, afford, d_forc


def _dlog100(panel: IndexPanel, kind: str) -> np.ndarray:
    levels = panel.series(kind)
    _require_positive(levels, kind)
    with np.errstate(invalid="ignore"):
        logs = np.log(levels)
    return 100.0 * (logs[:, 1:] - logs[:, :-1])


def _require_positive(levels: np.ndarray, kind: str) -> None:
    bad = np.isfinite(levels) & (levels <= 0.0)
    if bad.any():
        raise NonPositiveLevelError(f"series {kind!r} has a non-positive level where a log is required")


def build_factor_bundle(
    panel: IndexPanel,
    returns: ReturnPanel,
    market_choice: str = MARKET_NATIONAL_PROVIDED,
    smb_mode: str = "single",
    momentum_mode: str = "fixed_count",
    momentum_k: int = DEFAULT_MOMENTUM_K,
    idio_window: int | None = DEFAULT_IDIO_WINDOW,
    market_override: np.ndarray | None = None,
) -> FactorBundle:
    """Assemble every constructible factor for a panel in one pass.

    The size spread needs median prices, the covariates their level
    series; factors whose inputs are absent come back None. The equity
    return series is kept alongside whichever market proxy is chosen so
    the equity-benchmark model stays runnable. ``market_override``
    substitutes a caller-prepared market series (e.g. one already reduced
    by the risk-free rate) while keeping the recorded choice.
    """
    if market_choice not in MARKET_CHOICES:
        raise DataError(f"unknown market choice {market_choice!r}")
    equity = (
        market_return_series(panel, "equity_index") if panel.has_series("equity_index") else None
    )
    if market_override is not None:
        market = np.asarray(market_override, dtype=float)
        if market.shape != (returns.n_quarters,):
            raise DataError("market_override is not aligned with the return calendar")
    elif market_choice == MARKET_NATIONAL_PROVIDED:
        if not panel.has_series("national_index"):
            raise UnknownSeriesError(
                "market choice 'national_provided' needs a national_index series"
            )
        market = market_return_series(panel, "national_index")
    elif market_choice == MARKET_EQUITY:
        if equity is None:
            raise UnknownSeriesError("market choice 'equity' needs an equity_index series")
        market = equity
    else:
        market = market_factor(returns, None)

    smb = (
        smb_factor(returns, panel.series("median_price"), mode=smb_mode)
        if panel.has_series("median_price")
        else None
    )
    momentum = momentum_factor(returns, k_extreme=momentum_k, mode=momentum_mode)
    if idio_window is None:
        idio = static_idiosyncratic_risk(returns, market)
    else:
        idio = idiosyncratic_risk(returns, market, window=idio_window)
    d_emp, afford_lag, d_forc = covariate_transforms(panel)

    return FactorBundle(
        assets=returns.assets,
        calendar=returns.calendar,
        market=market,
        market_kind=market_choice,
        smb=smb,
        momentum=momentum,
        idio=idio,
        d_emp=d_emp,
        afford_lag=afford_lag,
        d_forc=d_forc,
        equity=equity,
        smb_mode=smb_mode,
        momentum_mode=momentum_mode,
        momentum_k=momentum_k,
        idio_window=idio_window,
    )
