"""Three-stage portfolio validity test.

Stage 1 ranks assets by market betas fit on the formation quarters and
splits them into portfolios; stage 2 re-estimates each portfolio's beta
and its residual-dispersion measure on disjoint estimation quarters;
stage 3 runs one cross-sectional regression of portfolio returns on
(beta, beta^2, s^2) per testing quarter, with inference from the time
series of the cross-sectional coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    InsufficientDataError,
    NumericError,
    UsageError,
    ZeroVarianceError,
)
from .models import single_factor_fit
from .ols import MeanTStat, RegressionSpec, fit, mean_tstat
from .panel import ReturnPanel
from .quarters import QuarterId

GAMMA_BETA = "beta"
GAMMA_BETA_SQ = "beta_sq"
GAMMA_IDIO = "idio_risk"
GAMMA_INTERCEPT = "intercept"


@dataclass(frozen=True)
class FMConfig:
    """Stage ranges are 1-based inclusive positions on the return calendar."""

    formation: tuple[int, int] = (1, 30)
    estimation: tuple[int, int] = (31, 60)
    testing: tuple[int, int] = (61, 92)
    n_portfolios: int = 15
    include_intercept: bool = False
    min_formation_obs: int = 12

    def __post_init__(self):
        for name, (lo, hi) in (
            ("formation", self.formation),
            ("estimation", self.estimation),
            ("testing", self.testing),
        ):
            if lo < 1 or hi < lo:
                raise UsageError(f"bad {name} range {lo}..{hi}")
        if not (self.formation[1] < self.estimation[0] <= self.estimation[1] < self.testing[0]):
            raise UsageError("stage ranges must be disjoint and ordered formation < estimation < testing")
        if self.n_portfolios < 2:
            raise UsageError("need at least 2 portfolios")

    def stage_slice(self, name: str) -> slice:
        lo, hi = getattr(self, name)
        return slice(lo - 1, hi)


@dataclass(frozen=True)
class PortfolioSet:
    """Rank-ordered portfolios and their equal-weight return series."""

    assignments: tuple[tuple[str, ...], ...]
    returns: np.ndarray  # (n_portfolios, n_quarters), full calendar
    calendar: tuple[QuarterId, ...]
    formation_betas: dict[str, float]
    excluded: tuple[tuple[str, str], ...]

    @property
    def n_portfolios(self) -> int:
        return len(self.assignments)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.assignments)


@dataclass(frozen=True)
class FMResult:
    """Per-quarter cross-sectional coefficients and their time-series tests."""

    gamma_names: tuple[str, ...]
    testing_calendar: tuple[QuarterId, ...]
    gammas: np.ndarray  # (n_testing_quarters, n_gammas); NaN rows were skipped
    summary: dict[str, MeanTStat]
    post_betas: np.ndarray
    post_idio: np.ndarray
    assignments: tuple[tuple[str, ...], ...]
    config: FMConfig
    skipped_quarters: tuple[tuple[QuarterId, str], ...] = field(default=())


def form_portfolios(returns: ReturnPanel, market: np.ndarray, config: FMConfig) -> PortfolioSet:
    """Rank assets by formation-period market betas into contiguous blocks.

    Assets that cannot be ranked (too little formation data, degenerate
    fit) are excluded and reported. Earlier portfolios absorb the extra
    asset when the count does not divide evenly.
    """
    market = np.asarray(market, dtype=float)
    sl = config.stage_slice("formation")
    betas: dict[str, float] = {}
    excluded: list[tuple[str, str]] = []
    for a_idx, asset in enumerate(returns.assets):
        y = returns.returns[a_idx, sl]
        try:
            res = single_factor_fit(y, market[sl], min_obs=config.min_formation_obs)
        except (InsufficientDataError, NumericError) as exc:
            excluded.append((asset, str(exc)))
            continue
        betas[asset] = res.coefficients["market"]

    n_ranked = len(betas)
    if n_ranked < 2 * config.n_portfolios:
        raise InsufficientDataError(
            f"only {n_ranked} rankable assets for {config.n_portfolios} portfolios"
        )
    ranked = sorted(betas, key=lambda a: (betas[a], a))

    base, extra = divmod(n_ranked, config.n_portfolios)
    assignments: list[tuple[str, ...]] = []
    pos = 0
    for p in range(config.n_portfolios):
        size = base + (1 if p < extra else 0)
        assignments.append(tuple(ranked[pos : pos + size]))
        pos += size

    asset_pos = {a: i for i, a in enumerate(returns.assets)}
    port_returns = np.full((config.n_portfolios, returns.n_quarters), np.nan)
    for p, members in enumerate(assignments):
        block = returns.returns[[asset_pos[a] for a in members], :]
        present = np.isfinite(block)
        counts = present.sum(axis=0)
        sums = np.where(present, block, 0.0).sum(axis=0)
        with np.errstate(invalid="ignore"):
            port_returns[p] = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    port_returns.setflags(write=False)

    return PortfolioSet(
        assignments=tuple(assignments),
        returns=port_returns,
        calendar=returns.calendar,
        formation_betas=betas,
        excluded=tuple(excluded),
    )


def post_ranking_betas(
    portfolios: PortfolioSet, market: np.ndarray, config: FMConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Estimation-period portfolio betas and residual-dispersion measures.

    Each portfolio's equal-weight return is fit on the market over the
    estimation quarters; s^2 is the sample standard deviation of that
    fit's squared residuals, held static per portfolio.
    """
    market = np.asarray(market, dtype=float)
    sl = config.stage_slice("estimation")
    n_p = portfolios.n_portfolios
    betas = np.empty(n_p)
    idio = np.empty(n_p)
    for p in range(n_p):
        y = portfolios.returns[p, sl]
        res = single_factor_fit(y, market[sl], min_obs=3)
        betas[p] = res.coefficients["market"]
        resid = res.residuals[np.isfinite(res.residuals)]
        idio[p] = float(np.std(resid**2, ddof=1))
    return betas, idio


def testing_regressions(
    portfolios: PortfolioSet,
    post_betas: np.ndarray,
    post_idio: np.ndarray,
    config: FMConfig,
) -> FMResult:
    """One cross-sectional fit of portfolio returns per testing quarter."""
    sl = config.stage_slice("testing")
    testing_calendar = portfolios.calendar[sl]
    if len(testing_calendar) < 2:
        raise InsufficientDataError("testing range must cover at least 2 quarters")

    names = [GAMMA_BETA, GAMMA_BETA_SQ, GAMMA_IDIO]
    spec = RegressionSpec(
        dependent="portfolio_return",
        regressors=tuple(names),
        include_intercept=config.include_intercept,
        min_obs=len(names) + (2 if config.include_intercept else 1),
    )
    gamma_names = ([GAMMA_INTERCEPT] if config.include_intercept else []) + names

    n_t = len(testing_calendar)
    gammas = np.full((n_t, len(gamma_names)), np.nan)
    skipped: list[tuple[QuarterId, str]] = []
    base = {
        GAMMA_BETA: post_betas,
        GAMMA_BETA_SQ: post_betas**2,
        GAMMA_IDIO: post_idio,
    }
    for i, q in enumerate(testing_calendar):
        y = portfolios.returns[:, sl][:, i]
        try:
            res = fit(spec, {**base, "portfolio_return": y})
        except (InsufficientDataError, ZeroVarianceError) as exc:
            skipped.append((q, str(exc)))
            continue
        for j, name in enumerate(gamma_names):
            gammas[i, j] = res.coefficients[name]

    summary = {
        name: mean_tstat(gammas[:, j]) for j, name in enumerate(gamma_names)
    }
    return FMResult(
        gamma_names=tuple(gamma_names),
        testing_calendar=testing_calendar,
        gammas=gammas,
        summary=summary,
        post_betas=post_betas,
        post_idio=post_idio,
        assignments=portfolios.assignments,
        config=config,
        skipped_quarters=tuple(skipped),
    )


def run_fama_macbeth(
    returns: ReturnPanel, market: np.ndarray, config: FMConfig | None = None
) -> FMResult:
    """The full three-stage pipeline under one configuration."""
    config = config or FMConfig()
    hi = config.testing[1]
    if hi > returns.n_quarters:
        raise DataError(
            f"testing range ends at quarter {hi} but the panel has {returns.n_quarters}"
        )
    portfolios = form_portfolios(returns, market, config)
    betas, idio = post_ranking_betas(portfolios, market, config)
    return testing_regressions(portfolios, betas, idio, config)


def subperiod_summary(
    result: FMResult, start: QuarterId, end: QuarterId
) -> dict[str, MeanTStat]:
    """Means and t-stats over a sub-range of the testing quarters.

    Betas are not refit; only the quarters entering the averages change.
    """
    mask = np.array([start <= q <= end for q in result.testing_calendar])
    if mask.sum() < 2:
        raise InsufficientDataError(f"fewer than 2 testing quarters in {start}..{end}")
    return {
        name: mean_tstat(result.gammas[mask, j])
        for j, name in enumerate(result.gamma_names)
    }
