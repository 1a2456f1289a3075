"""The model battery: per-asset multi-factor fits and their summaries.

A catalog entry names a regressor set; running a catalog fits every entry
for every asset and aggregates the way the summary tables do: mean
coefficient and 5% significance count per variable, plus the
cross-sectional distribution of market betas and R-squared values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, InsufficientDataError, NumericError, UsageError
from .factors import FactorBundle
from .ols import FitResult, RegressionSpec, fit
from .panel import ReturnPanel

REGRESSOR_KEYS = (
    "market",
    "equity_market",
    "smb",
    "momentum",
    "idio",
    "d_emp",
    "afford_lag",
    "d_forc",
)
_MARKET_KEYS = ("market", "equity_market")


@dataclass(frozen=True)
class ModelCatalogEntry:
    """One model: an id and the factor keys it regresses returns on."""

    model_id: str
    regressors: tuple[str, ...]

    def __post_init__(self):
        unknown = [r for r in self.regressors if r not in REGRESSOR_KEYS]
        if unknown:
            raise UsageError(f"unknown regressor keys {unknown} in model {self.model_id!r}")
        if sum(r in _MARKET_KEYS for r in self.regressors) > 1:
            raise UsageError(f"model {self.model_id!r} names more than one market proxy")

    @property
    def market_key(self) -> str | None:
        for r in self.regressors:
            if r in _MARKET_KEYS:
                return r
        return None


def base_catalog() -> tuple[ModelCatalogEntry, ...]:
    """The six benchmark models: single-factor variants and augmentations."""
    return (
        ModelCatalogEntry("1", ("market",)),
        ModelCatalogEntry("2", ("equity_market",)),
        ModelCatalogEntry("3", ("market", "smb")),
        ModelCatalogEntry("4", ("market", "momentum")),
        ModelCatalogEntry("5", ("market", "idio")),
        ModelCatalogEntry("6", ("market", "smb", "momentum", "idio")),
    )


def augmented_catalog() -> tuple[ModelCatalogEntry, ...]:
    """Four-factor model plus local-fundamentals controls, added in turn."""
    four = ("market", "smb", "momentum", "idio")
    return (
        ModelCatalogEntry("1", four + ("d_emp",)),
        ModelCatalogEntry("2", four + ("d_emp", "afford_lag")),
        ModelCatalogEntry("3", four + ("d_emp", "afford_lag", "d_forc")),
    )


@dataclass(frozen=True)
class DistributionStats:
    mean: float
    min: float
    median: float
    max: float


@dataclass(frozen=True)
class PerAssetRow:
    asset: str
    beta: float
    se_beta: float
    r_squared: float
    mean_return: float
    n_obs: int
    note: str = ""


@dataclass(frozen=True)
class SuiteSummary:
    """Cross-asset aggregate of one model's per-asset fits."""

    model_id: str
    regressors: tuple[str, ...]
    n_fitted: int
    coef_means: dict[str, float]
    sig_counts: dict[str, int]
    beta_stats: DistributionStats | None
    r2_stats: DistributionStats
    per_asset: tuple[PerAssetRow, ...]
    skipped: tuple[tuple[str, str], ...]
    fits: dict[str, FitResult]


def _dist(values: np.ndarray) -> DistributionStats:
    return DistributionStats(
        mean=float(values.mean()),
        min=float(values.min()),
        median=float(np.median(values)),
        max=float(values.max()),
    )


def run_suite(
    returns: ReturnPanel,
    factors: FactorBundle,
    catalog: tuple[ModelCatalogEntry, ...],
    min_obs: int | None = None,
) -> dict[str, SuiteSummary]:
    """Fit every catalog entry for every asset and summarize.

    Assets whose fit fails a precondition (too few complete observations,
    constant returns, collinear regressors) are reported as skipped with
    the reason, and aggregates run over the fitted assets only.
    """
    if not catalog:
        raise UsageError("empty model catalog")
    if factors.calendar != returns.calendar:
        raise DataError("factor bundle and return panel calendars differ")

    out: dict[str, SuiteSummary] = {}
    for entry in catalog:
        spec = RegressionSpec(
            dependent="return",
            regressors=entry.regressors,
            include_intercept=True,
            min_obs=min_obs,
        )
        fits: dict[str, FitResult] = {}
        skipped: list[tuple[str, str]] = []
        rows: list[PerAssetRow] = []
        for a_idx, asset in enumerate(returns.assets):
            data = {"return": returns.returns[a_idx]}
            for key in entry.regressors:
                data[key] = factors.series_for_asset(key, a_idx)
            mean_return = _present_mean(returns.returns[a_idx])
            try:
                res = fit(spec, data)
            except (InsufficientDataError, NumericError) as exc:
                skipped.append((asset, str(exc)))
                rows.append(
                    PerAssetRow(asset, np.nan, np.nan, np.nan, mean_return, 0, note=str(exc))
                )
                continue
            fits[asset] = res
            mk = entry.market_key
            beta = res.coefficients[mk] if mk else np.nan
            se = res.std_errors[mk] if mk else np.nan
            rows.append(PerAssetRow(asset, beta, se, res.r_squared, mean_return, res.n_obs))
        if not fits:
            raise DataError(f"model {entry.model_id!r}: no asset could be fitted")

        coef_means: dict[str, float] = {}
        sig_counts: dict[str, int] = {}
        for key in entry.regressors:
            vals = np.array([r.coefficients[key] for r in fits.values()])
            coef_means[key] = float(vals.mean())
            sig_counts[key] = sum(r.significant_5pct[key] for r in fits.values())
        mk = entry.market_key
        beta_stats = (
            _dist(np.array([r.coefficients[mk] for r in fits.values()])) if mk else None
        )
        r2_stats = _dist(np.array([r.r_squared for r in fits.values()]))
        out[entry.model_id] = SuiteSummary(
            model_id=entry.model_id,
            regressors=entry.regressors,
            n_fitted=len(fits),
            coef_means=coef_means,
            sig_counts=sig_counts,
            beta_stats=beta_stats,
            r2_stats=r2_stats,
            per_asset=tuple(rows),
            skipped=tuple(skipped),
            fits=fits,
        )
    return out


def _present_mean(values: np.ndarray) -> float:
    present = values[np.isfinite(values)]
    return float(present.mean()) if present.size else float("nan")


def per_asset_table(suite: SuiteSummary) -> tuple[PerAssetRow, ...]:
    """Detail rows (beta, SE, R^2, mean return) sorted by asset name."""
    return tuple(sorted(suite.per_asset, key=lambda r: r.asset))


def single_factor_fit(
    y: np.ndarray,
    market: np.ndarray,
    min_obs: int | None = None,
) -> FitResult:
    """Intercept-plus-market fit; the model-(1) building block."""
    spec = RegressionSpec(dependent="return", regressors=("market",), min_obs=min_obs)
    return fit(spec, {"return": y, "market": market})
