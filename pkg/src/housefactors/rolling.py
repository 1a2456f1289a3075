"""Moving-window single-factor estimation and the sorted-beta view.

Every window entry is a fresh fit on that window's rows, identical to
what a standalone call to the regression engine returns on the same
slice; no incremental updating is done.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, InsufficientDataError, ZeroVarianceError
from .ols import RegressionSpec, fit, t_critical
from .quarters import QuarterId


@dataclass(frozen=True)
class RollingEntry:
    """One window's estimates, keyed by the window-end quarter."""

    end: QuarterId
    beta: float
    se_beta: float
    r_squared: float
    n_obs: int
    lower: float
    upper: float


@dataclass(frozen=True)
class RollingFitSeries:
    asset: str
    window: int
    entries: tuple[RollingEntry, ...]
    skipped: tuple[tuple[QuarterId, str], ...]


def rolling_betas(
    asset_returns: np.ndarray,
    market: np.ndarray,
    calendar: Sequence[QuarterId],
    window: int = 24,
    asset: str = "",
) -> RollingFitSeries:
    """One single-factor fit per contiguous window, stepping one quarter.

    Windows containing any missing value (asset or market) are skipped
    and annotated rather than partially fitted, so every entry has the
    same degrees of freedom. Bands are beta +/- t(0.05, window-2) * SE.
    """
    y = np.asarray(asset_returns, dtype=float)
    x = np.asarray(market, dtype=float)
    t_len = y.shape[0]
    if window < 8:
        raise DataError(f"window must be >= 8, got {window}")
    if x.shape != (t_len,) or len(calendar) != t_len:
        raise DataError("market series and calendar must align with the asset returns")
    if window > t_len:
        raise DataError(f"window {window} exceeds the {t_len}-quarter sample")
    if int(np.isfinite(y).sum()) < window:
        raise InsufficientDataError(
            f"asset {asset!r} has fewer than {window} present quarters"
        )

    spec = RegressionSpec(dependent="return", regressors=("market",), min_obs=window)
    crit = t_critical(window - 2, 0.05)
    entries: list[RollingEntry] = []
    skipped: list[tuple[QuarterId, str]] = []
    for end in range(window - 1, t_len):
        sl = slice(end - window + 1, end + 1)
        yw, xw = y[sl], x[sl]
        if not (np.isfinite(yw).all() and np.isfinite(xw).all()):
            skipped.append((calendar[end], "window contains missing values"))
            continue
        res = fit(spec, {"return": yw, "market": xw})
        beta = res.coefficients["market"]
        se = res.std_errors["market"]
        entries.append(
            RollingEntry(
                end=calendar[end],
                beta=beta,
                se_beta=se,
                r_squared=res.r_squared,
                n_obs=res.n_obs,
                lower=beta - crit * se,
                upper=beta + crit * se,
            )
        )
    return RollingFitSeries(asset=asset, window=window, entries=tuple(entries), skipped=tuple(skipped))


def beta_r2_correlation(series: RollingFitSeries) -> float:
    """Pearson correlation between the window betas and window R^2 values."""
    if len(series.entries) < 3:
        raise InsufficientDataError(
            f"need at least 3 rolling entries, got {len(series.entries)}"
        )
    betas = np.array([e.beta for e in series.entries])
    r2s = np.array([e.r_squared for e in series.entries])
    for name, arr in (("beta", betas), ("r_squared", r2s)):
        if np.ptp(arr) == 0.0:
            raise ZeroVarianceError(f"rolling {name} sequence is constant")
    bc = betas - betas.mean()
    rc = r2s - r2s.mean()
    return float((bc @ rc) / np.sqrt((bc @ bc) * (rc @ rc)))


@dataclass(frozen=True)
class SortedBetaPoint:
    asset: str
    beta: float
    lower: float
    upper: float


def sorted_beta_view(
    records: Sequence[tuple[str, float, float, int]],
    step: int = 10,
) -> tuple[SortedBetaPoint, ...]:
    """Every step-th beta from the ascending sort, with 95% bands.

    ``records`` are (asset, beta, se_beta, dof) tuples from full-sample
    fits; bands use the per-asset full-sample degrees of freedom. Ties in
    beta order by asset name.
    """
    if step < 1:
        raise DataError(f"step must be positive, got {step}")
    if len(records) < step:
        raise InsufficientDataError(f"{len(records)} betas but step {step}")
    ordered = sorted(records, key=lambda r: (r[1], r[0]))
    picked = [ordered[i] for i in range(step - 1, len(ordered), step)]
    out = []
    for asset, beta, se, dof in picked:
        crit = t_critical(dof, 0.05)
        out.append(SortedBetaPoint(asset, beta, beta - crit * se, beta + crit * se))
    return tuple(out)
