"""Deterministic least-squares engine.

One entry point, :func:`fit`, covers every regression in the package:
per-asset factor models, rolling windows, and the cross-sectional pricing
regressions. The solver is column-pivoted Householder QR (see
``_kernels``); normal equations appear only in test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import betaincinv

from . import _kernels
from .errors import (
    InsufficientDataError,
    RankDeficiencyError,
    UsageError,
    ZeroVarianceError,
)

RANK_TOL = 1e-10
DEFAULT_EXTRA_OBS = 10  # default min_obs = n_params + this


@dataclass(frozen=True)
class RegressionSpec:
    """Names the dependent and regressor series and the fit options."""

    dependent: str
    regressors: tuple[str, ...]
    include_intercept: bool = True
    min_obs: int | None = None
    se_mode: str = "classical"

    def __post_init__(self):
        if len(set(self.regressors)) != len(self.regressors):
            raise UsageError("regressor names must be unique")
        if self.dependent in self.regressors:
            raise UsageError("dependent cannot also be a regressor")
        if self.se_mode not in ("classical", "hc0"):
            raise UsageError(f"unknown se_mode {self.se_mode!r}")
        k = self.n_params
        if self.min_obs is not None and self.min_obs < k + 1:
            raise UsageError(f"min_obs must be at least n_params+1 = {k + 1}")

    @property
    def n_params(self) -> int:
        return len(self.regressors) + (1 if self.include_intercept else 0)

    @property
    def effective_min_obs(self) -> int:
        return self.min_obs if self.min_obs is not None else self.n_params + DEFAULT_EXTRA_OBS


@dataclass(frozen=True)
class FitResult:
    """Coefficients and classical inference for one regression."""

    coefficients: dict[str, float]
    std_errors: dict[str, float]
    t_stats: dict[str, float]
    significant_5pct: dict[str, bool]
    r_squared: float
    adj_r_squared: float
    residuals: np.ndarray  # aligned to the input calendar; NaN where deleted
    n_obs: int
    dof: int
    uncentered: bool = False
    se_mode: str = "classical"
    param_names: tuple[str, ...] = field(default=())

    def coef(self, name: str) -> float:
        return self.coefficients[name]


INTERCEPT = "intercept"


def fit(spec: RegressionSpec, data: Mapping[str, np.ndarray]) -> FitResult:
    """Least-squares fit with listwise deletion of incomplete rows.

    ``data`` maps series names to equal-length 1-D float arrays; missing
    values are NaN. Classical standard errors use sigma^2 (X'X)^-1 with
    sigma^2 = RSS/(n-k); ``se_mode='hc0'`` swaps in the White sandwich.
    5% significance compares |t| to the two-sided Student-t critical value
    at n-k degrees of freedom.
    """
    y_full = np.asarray(data[spec.dependent], dtype=float)
    t_len = y_full.shape[0]
    cols = []
    for name in spec.regressors:
        arr = np.asarray(data[name], dtype=float)
        if arr.shape != (t_len,):
            raise UsageError(f"series {name!r} is not aligned with {spec.dependent!r}")
        cols.append(arr)

    mask = np.isfinite(y_full)
    for arr in cols:
        mask &= np.isfinite(arr)
    n = int(mask.sum())
    k = spec.n_params
    if n < spec.effective_min_obs:
        raise InsufficientDataError(
            f"{n} complete observations, need at least {spec.effective_min_obs}"
        )

    y = y_full[mask]
    names: list[str] = []
    blocks = []
    if spec.include_intercept:
        names.append(INTERCEPT)
        blocks.append(np.ones(n))
    for name, arr in zip(spec.regressors, cols):
        names.append(name)
        blocks.append(arr[mask])
    X = np.column_stack(blocks)

    beta, resid, xtx_inv, rank, perm, _ = _kernels.ols_qr(X, y, RANK_TOL)
    if rank < k:
        raise RankDeficiencyError(names[perm[j]] for j in range(rank, k))

    rss = float(resid @ resid)
    dof = n - k
    if spec.include_intercept:
        tss = float(np.sum((y - y.mean()) ** 2))
        uncentered = False
    else:
        tss = float(y @ y)
        uncentered = True
    if tss == 0.0:
        raise ZeroVarianceError(f"dependent {spec.dependent!r} has zero variance")
    r2 = 1.0 - rss / tss
    adj_r2 = 1.0 - (1.0 - r2) * (n - (1 if spec.include_intercept else 0)) / dof

    sigma2 = rss / dof
    if spec.se_mode == "classical":
        cov = sigma2 * xtx_inv
    else:
        meat = (X * (resid**2)[:, None]).T @ X
        cov = xtx_inv @ meat @ xtx_inv
    se = np.sqrt(np.diag(cov))

    crit = t_critical(dof, 0.05)
    coefficients: dict[str, float] = {}
    std_errors: dict[str, float] = {}
    t_stats: dict[str, float] = {}
    significant: dict[str, bool] = {}
    for j, name in enumerate(names):
        b = float(beta[j])
        s = float(se[j])
        if s > 0.0:
            t = b / s
        else:
            t = math.inf * np.sign(b) if b != 0.0 else math.nan
        coefficients[name] = b
        std_errors[name] = s
        t_stats[name] = t
        significant[name] = bool(abs(t) > crit) if not math.isnan(t) else False

    residuals = np.full(t_len, np.nan)
    residuals[mask] = resid
    return FitResult(
        coefficients=coefficients,
        std_errors=std_errors,
        t_stats=t_stats,
        significant_5pct=significant,
        r_squared=r2,
        adj_r_squared=adj_r2,
        residuals=residuals,
        n_obs=n,
        dof=dof,
        uncentered=uncentered,
        se_mode=spec.se_mode,
        param_names=tuple(names),
    )


def t_critical(dof: int, level: float = 0.05) -> float:
    """Two-sided Student-t critical value via the inverse incomplete beta.

    Uses the identity P(|T| > c) = I_x(dof/2, 1/2) with x = dof/(dof+c^2),
    so c = sqrt(dof (1-x)/x) at x = I^-1(dof/2, 1/2, level).
    """
    if dof < 1:
        raise UsageError(f"dof must be >= 1, got {dof}")
    if not 0.0 < level < 1.0:
        raise UsageError(f"level must be in (0,1), got {level}")
    x = float(betaincinv(dof / 2.0, 0.5, level))
    return math.sqrt(dof * (1.0 - x) / x)


@dataclass(frozen=True)
class MeanTStat:
    """Time-series mean with its t-statistic against zero."""

    mean: float
    sd: float
    n: int
    t: float
    infinite_t: bool = False


def mean_tstat(series: Sequence[float] | np.ndarray) -> MeanTStat:
    """t = mean / (sd / sqrt(n)) with sample sd, NaNs dropped.

    A constant series has no sampling variance; that is reported as an
    infinite-t condition rather than a numeric overflow.
    """
    arr = np.asarray(series, dtype=float)
    arr = arr[np.isfinite(arr)]
    n = arr.size
    if n < 2:
        raise InsufficientDataError(f"need at least 2 present values, got {n}")
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1))
    if sd == 0.0:
        t = math.inf * np.sign(mean) if mean != 0.0 else math.nan
        return MeanTStat(mean=mean, sd=sd, n=n, t=t, infinite_t=True)
    return MeanTStat(mean=mean, sd=sd, n=n, t=mean / (sd / math.sqrt(n)))
