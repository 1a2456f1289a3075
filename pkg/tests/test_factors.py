import numpy as np
import pytest

from housefactors.errors import (
    InsufficientDataError,
    NonPositiveLevelError,
    NumericError,
)
from housefactors.factors import (
    covariate_transforms,
    idiosyncratic_risk,
    market_factor,
    momentum_factor,
    smb_factor,
    static_idiosyncratic_risk,
)
from housefactors.models import single_factor_fit
from housefactors.panel import IndexPanel, ReturnPanel
from housefactors.quarters import QuarterId, quarter_range


def _calendar(n, start=QuarterId(1990, 1)):
    return quarter_range(start, QuarterId.from_index(start.to_index() + n - 1))


def _return_panel(matrix):
    matrix = np.asarray(matrix, dtype=float)
    assets = tuple(f"a{i:02d}" for i in range(matrix.shape[0]))
    return ReturnPanel(assets=assets, calendar=_calendar(matrix.shape[1]), returns=matrix)


# --- market factor -----------------------------------------------------------


def test_market_equal_weight_mean():
    panel = _return_panel([[1.0], [3.0]])
    assert market_factor(panel)[0] == 2.0


def test_market_passthrough():
    panel = _return_panel([[1.0, 2.0]])
    provided = np.array([5.0, 6.0])
    assert (market_factor(panel, provided) == provided).all()


def test_market_mean_over_present():
    panel = _return_panel([[np.nan], [4.0]])
    assert market_factor(panel)[0] == 4.0


def test_market_empty_quarter_errors():
    panel = _return_panel([[np.nan], [np.nan]])
    with pytest.raises(InsufficientDataError):
        market_factor(panel)


# --- size spread -------------------------------------------------------------


def _smb_inputs(returns_col, prices_col):
    panel = _return_panel(np.array(returns_col)[:, None])
    prices = np.column_stack([prices_col, prices_col])  # prior quarter + current
    return panel, prices


def test_smb_rank_example():
    # 4 assets, prices 100..400: 25th pct rank 1, 75th pct rank 3 (1-based)
    panel, prices = _smb_inputs([2.0, 1.5, 1.0, 0.5], [100.0, 200.0, 300.0, 400.0])
    assert smb_factor(panel, prices)[0] == 2.0 - 1.0


def test_smb_equal_returns_zero():
    panel, prices = _smb_inputs([0.7, 0.7, 0.7, 0.7], [100.0, 200.0, 300.0, 400.0])
    assert smb_factor(panel, prices)[0] == 0.0


def test_smb_price_tie_breaks_by_name():
    # equal prices: ranking falls back to asset-name order a00..a03
    panel, prices = _smb_inputs([2.0, 1.5, 1.0, 0.5], [100.0, 100.0, 100.0, 100.0])
    assert smb_factor(panel, prices)[0] == 2.0 - 1.0


def test_smb_quartile_mean_mode():
    panel, prices = _smb_inputs([2.0, 1.5, 1.0, 0.5], [100.0, 200.0, 300.0, 400.0])
    # groups of ceil(4/4)=1: cheapest asset minus most expensive asset
    assert smb_factor(panel, prices, mode="quartile_mean")[0] == 2.0 - 0.5
    panel8, prices8 = _smb_inputs(
        [8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0],
        [10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0],
    )
    # ceil(8/4)=2 cheapest minus 2 most expensive: (8+7)/2 - (2+1)/2
    assert smb_factor(panel8, prices8, mode="quartile_mean")[0] == 7.5 - 1.5


def test_smb_needs_four_eligible():
    panel, prices = _smb_inputs([2.0, 1.5, np.nan, 0.5], [100.0, 200.0, 300.0, 400.0])
    with pytest.raises(InsufficientDataError):
        smb_factor(panel, prices)


def test_smb_uses_prior_quarter_prices():
    returns = np.array([[1.0, 4.0], [2.0, 3.0], [3.0, 2.0], [4.0, 1.0]])
    panel = _return_panel(returns)
    prices = np.array(
        [
            [100.0, 400.0, 0.1],
            [200.0, 300.0, 0.1],
            [300.0, 200.0, 0.1],
            [400.0, 100.0, 0.1],
        ]
    )
    out = smb_factor(panel, prices)
    assert out[0] == 1.0 - 3.0  # ranked by prices[:, 0]
    assert out[1] == 1.0 - 3.0  # reversed prices flip the ranks in quarter 2


# --- momentum ----------------------------------------------------------------


def test_momentum_hand_example():
    lagged = np.arange(1.0, 21.0)
    returns = np.column_stack([lagged, np.zeros(20)])
    out = momentum_factor(_return_panel(returns), k_extreme=10)
    assert np.isnan(out[0])
    assert out[1] == 10.0


def test_momentum_equal_returns_zero():
    returns = np.column_stack([np.full(20, 2.0), np.zeros(20)])
    out = momentum_factor(_return_panel(returns), k_extreme=10)
    assert out[1] == 0.0


def test_momentum_decile_mode():
    lagged = np.arange(1.0, 21.0)
    returns = np.column_stack([lagged, np.zeros(20)])
    out = momentum_factor(_return_panel(returns), mode="decile")
    # k = ceil(20/10) = 2: mean(19,20) - mean(1,2)
    assert out[1] == 19.5 - 1.5


def test_momentum_insufficient_assets():
    returns = np.column_stack([np.arange(1.0, 11.0), np.zeros(10)])
    with pytest.raises(InsufficientDataError):
        momentum_factor(_return_panel(returns), k_extreme=10)


# --- idiosyncratic risk --------------------------------------------------------


def test_idio_exact_fit_is_zero():
    rng = np.random.default_rng(0)
    market = rng.normal(1.0, 1.0, size=30)
    returns = (0.5 + 0.8 * market)[None, :]
    out = idiosyncratic_risk(_return_panel(returns), market, window=8)
    assert np.nanmax(out) < 1e-20  # exact fit up to rounding noise
    assert np.isnan(out[0, :7]).all()


def test_idio_constant_squared_residuals():
    # alternating +-1 residuals orthogonal to the design: squares constant -> sd 0
    market = np.array([1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0])
    resid = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
    returns = (0.2 + 0.5 * market + resid)[None, :]
    out = idiosyncratic_risk(_return_panel(returns), market, window=8)
    assert abs(out[0, 7]) < 1e-12


def test_idio_matches_two_step_oracle():
    rng = np.random.default_rng(1)
    market = rng.normal(1.0, 0.8, size=60)
    returns = 0.3 + rng.uniform(0.2, 1.5, size=(5, 1)) * market + rng.normal(size=(5, 60))
    panel = _return_panel(returns)
    window = 24
    out = idiosyncratic_risk(panel, market, window=window)
    for a in range(5):
        for t in range(window - 1, 60):
            res = single_factor_fit(
                returns[a, t - window + 1 : t + 1], market[t - window + 1 : t + 1], min_obs=3
            )
            oracle = np.std(res.residuals**2, ddof=1)
            assert abs(out[a, t] - oracle) < 1e-10


def test_idio_nonnegative_and_zero_iff_exact():
    rng = np.random.default_rng(2)
    market = rng.normal(size=40)
    noisy = (0.5 * market + 0.3 * rng.normal(size=40))[None, :]
    out = idiosyncratic_risk(_return_panel(noisy), market, window=10)
    vals = out[np.isfinite(out)]
    assert (vals > 0).all()


def test_idio_degenerate_market_raises():
    rng = np.random.default_rng(3)
    returns = rng.normal(size=(1, 12))
    with pytest.raises(NumericError):
        idiosyncratic_risk(_return_panel(returns), np.ones(12), window=8)


def test_idio_window_validation():
    rng = np.random.default_rng(4)
    returns = rng.normal(size=(1, 12))
    market = rng.normal(size=12)
    with pytest.raises(Exception):
        idiosyncratic_risk(_return_panel(returns), market, window=4)
    out = idiosyncratic_risk(_return_panel(returns), market, window=20)
    assert np.isnan(out).all()  # window longer than sample: everything missing


def test_static_idio_constant_over_time():
    rng = np.random.default_rng(5)
    market = rng.normal(size=40)
    returns = (0.5 * market + rng.normal(size=40))[None, :]
    out = static_idiosyncratic_risk(_return_panel(returns), market)
    assert np.ptp(out[0]) == 0.0 and out[0, 0] > 0


# --- covariate transforms -------------------------------------------------------


def _index_panel(values):
    n_q = next(len(v[0]) for v in values.values())
    assets = tuple(f"a{i}" for i in range(next(len(v) for v in values.values())))
    return IndexPanel(
        assets=assets,
        calendar=_calendar(n_q),
        values={k: np.asarray(v, dtype=float) for k, v in values.items()},
    )


def test_covariates_constant_employment():
    panel = _index_panel(
        {"employment": [[50.0, 50.0, 50.0]], "income": [[10.0, 10.0, 10.0]],
         "median_price": [[10.0, 10.0, 10.0]], "foreclosures": [[1.0, 1.0, 1.0]]}
    )
    d_emp, afford, d_forc = covariate_transforms(panel)
    assert (d_emp == 0.0).all()
    assert (afford == 0.0).all()  # income == price -> ln(1)
    assert (d_forc == 0.0).all()


def test_covariates_foreclosure_change():
    panel = _index_panel({"foreclosures": [[100.0, 110.0]]})
    _, _, d_forc = covariate_transforms(panel)
    # frozen from a 30-digit evaluation of 100*ln(1.1)
    assert abs(d_forc[0, 0] - 9.53101798043249) < 1e-10


def test_covariates_afford_is_lagged():
    panel = _index_panel(
        {"income": [[20.0, 30.0, 40.0]], "median_price": [[10.0, 10.0, 10.0]]}
    )
    _, afford, _ = covariate_transforms(panel)
    assert np.allclose(afford[0], np.log([2.0, 3.0]))


def test_covariates_nonpositive_level_errors():
    panel = _index_panel({"employment": [[100.0, -1.0]]})
    with pytest.raises(NonPositiveLevelError):
        covariate_transforms(panel)


def test_covariates_missing_propagates():
    panel = _index_panel({"employment": [[100.0, np.nan, 110.0]]})
    d_emp, _, _ = covariate_transforms(panel)
    assert np.isnan(d_emp[0]).all()


# --- invariants -----------------------------------------------------------------


def test_scale_equivariance_power_of_two_exact():
    rng = np.random.default_rng(6)
    returns = rng.normal(1.0, 2.0, size=(12, 10))
    prices = rng.uniform(100, 500, size=(12, 11))
    panel = _return_panel(returns)
    scaled = _return_panel(2.0 * returns)
    assert (market_factor(scaled) == 2.0 * market_factor(panel)).all()
    assert np.array_equal(
        smb_factor(scaled, prices), 2.0 * smb_factor(panel, prices), equal_nan=True
    )
    m1 = momentum_factor(panel, k_extreme=3)
    m2 = momentum_factor(scaled, k_extreme=3)
    assert np.array_equal(m2, 2.0 * m1, equal_nan=True)


def test_reordering_assets_leaves_factors_unchanged():
    rng = np.random.default_rng(7)
    returns = rng.normal(1.0, 2.0, size=(9, 8))
    prices = rng.uniform(100, 500, size=(9, 9))
    panel = _return_panel(returns)
    perm = rng.permutation(9)
    shuffled = ReturnPanel(
        assets=tuple(panel.assets[i] for i in perm),
        calendar=panel.calendar,
        returns=returns[perm],
    )
    assert np.allclose(market_factor(shuffled), market_factor(panel))
    assert np.array_equal(
        smb_factor(shuffled, prices[perm]), smb_factor(panel, prices), equal_nan=True
    )
    assert np.array_equal(
        momentum_factor(shuffled, k_extreme=2),
        momentum_factor(panel, k_extreme=2),
        equal_nan=True,
    )
