import numpy as np
import pytest

from housefactors.dgp import DGPConfig, generate
from housefactors.errors import UsageError
from housefactors.factors import FactorBundle, build_factor_bundle
from housefactors.models import (
    ModelCatalogEntry,
    augmented_catalog,
    base_catalog,
    per_asset_table,
    run_suite,
)
from housefactors.panel import ReturnPanel, compute_returns, market_return_series
from housefactors.quarters import QuarterId, quarter_range
from conftest import small_dgp


def _calendar(n):
    start = QuarterId(1990, 1)
    return quarter_range(start, QuarterId.from_index(start.to_index() + n - 1))


def _noiseless_inputs(n_assets=10, n_quarters=60, beta=0.8, noise=1e-9, seed=0):
    config = small_dgp(
        seed=seed,
        n_assets=n_assets,
        n_quarters=n_quarters,
        noise_sd=noise,
        beta_range=None,
        betas=tuple([beta] * n_assets),
    )
    panel, _ = generate(config)
    returns = compute_returns(panel)
    market = market_return_series(panel, "national_index")
    return returns, market


def test_catalogs_have_expected_entries():
    ids = [e.model_id for e in base_catalog()]
    assert ids == ["1", "2", "3", "4", "5", "6"]
    assert base_catalog()[0].regressors == ("market",)
    assert base_catalog()[1].regressors == ("equity_market",)
    assert len(augmented_catalog()) == 3
    assert augmented_catalog()[2].regressors[-1] == "d_forc"


def test_catalog_entry_validation():
    with pytest.raises(UsageError):
        ModelCatalogEntry("x", ("market", "equity_market"))
    with pytest.raises(UsageError):
        ModelCatalogEntry("x", ("mystery",))


def _bundle_from_series(returns, **series):
    return FactorBundle(
        assets=returns.assets,
        calendar=returns.calendar,
        market=series["market"],
        market_kind="national_provided",
        smb=series.get("smb"),
        momentum=series.get("momentum"),
        idio=series.get("idio"),
        equity=series.get("equity"),
    )


def test_noiseless_recovery():
    returns, market = _noiseless_inputs(beta=0.8)
    bundle = _bundle_from_series(returns, market=market)
    summary = run_suite(returns, bundle, (base_catalog()[0],))["1"]
    assert abs(summary.coef_means["market"] - 0.8) < 1e-6
    assert summary.sig_counts["market"] == returns.n_assets
    assert summary.r2_stats.mean > 1.0 - 1e-9
    assert summary.beta_stats.min <= summary.beta_stats.median <= summary.beta_stats.max


def test_white_noise_equity_has_test_size_significance():
    # 1,000 independent asset fits against an unrelated benchmark: the
    # 5% test should fire at about its size, with negligible fit
    config = small_dgp(seed=3, n_assets=1000, n_quarters=60, noise_sd=1.0)
    panel, _ = generate(config)
    returns = compute_returns(panel)
    rng = np.random.default_rng(99)
    equity = rng.normal(2.0, 8.0, size=returns.n_quarters)
    bundle = _bundle_from_series(returns, market=np.zeros(returns.n_quarters), equity=equity)
    summary = run_suite(returns, bundle, (base_catalog()[1],))["2"]
    rate = summary.sig_counts["equity_market"] / summary.n_fitted
    assert abs(rate - 0.05) < 0.02
    assert summary.r2_stats.mean < 0.05


def test_skipped_assets_reported_with_reason():
    returns, market = _noiseless_inputs(n_assets=4)
    flat = returns.returns.copy()
    flat[0, :] = 1.5  # constant dependent
    broken = ReturnPanel(assets=returns.assets, calendar=returns.calendar, returns=flat)
    bundle = _bundle_from_series(broken, market=market)
    summary = run_suite(broken, bundle, (base_catalog()[0],))["1"]
    assert summary.n_fitted == 3
    assert len(summary.skipped) == 1
    asset, reason = summary.skipped[0]
    assert asset == broken.assets[0] and "variance" in reason
    rows = per_asset_table(summary)
    assert rows[0].note != "" and np.isnan(rows[0].beta)
    assert rows[0].mean_return == 1.5


def test_per_asset_table_sorted_and_complete():
    returns, market = _noiseless_inputs(n_assets=6, beta=0.8)
    bundle = _bundle_from_series(returns, market=market)
    summary = run_suite(returns, bundle, (base_catalog()[0],))["1"]
    rows = per_asset_table(summary)
    assert [r.asset for r in rows] == sorted(returns.assets)
    for row in rows:
        assert abs(row.beta - 0.8) < 1e-6
        assert row.r_squared > 1.0 - 1e-9


def test_nesting_property_on_common_sample():
    # complete factor series over a shared calendar: adding regressors
    # can only help the fit
    rng = np.random.default_rng(4)
    n_q = 50
    market = rng.normal(1.0, 0.8, size=n_q)
    smb = rng.normal(0.2, 0.4, size=n_q)
    momentum = rng.normal(6.0, 3.0, size=n_q)
    returns = np.empty((8, n_q))
    for a in range(8):
        returns[a] = 0.2 + rng.uniform(0.2, 1.5) * market + rng.normal(size=n_q)
    panel = ReturnPanel(
        assets=tuple(f"a{i}" for i in range(8)), calendar=_calendar(n_q), returns=returns
    )
    idio = np.abs(rng.normal(4.0, 1.0, size=(8, n_q)))
    bundle = _bundle_from_series(panel, market=market, smb=smb, momentum=momentum, idio=idio)
    catalog = (
        ModelCatalogEntry("m1", ("market",)),
        ModelCatalogEntry("m2", ("market", "smb")),
        ModelCatalogEntry("m3", ("market", "smb", "momentum")),
        ModelCatalogEntry("m4", ("market", "smb", "momentum", "idio")),
    )
    out = run_suite(panel, bundle, catalog)
    for asset in panel.assets:
        r2s = [out[m].fits[asset].r_squared for m in ("m1", "m2", "m3", "m4")]
        assert all(b >= a - 1e-12 for a, b in zip(r2s, r2s[1:]))


def test_market_beta_stable_across_models(replica):
    bundle = build_factor_bundle(replica["panel"], replica["returns"])
    out = run_suite(replica["returns"], bundle, base_catalog())
    means = [out[m].coef_means["market"] for m in ("1", "3", "4", "5")]
    base = means[0]
    for m in means[1:]:
        assert abs(m - base) / abs(base) < 0.10


def test_suite_deterministic(replica):
    bundle = build_factor_bundle(replica["panel"], replica["returns"])
    first = run_suite(replica["returns"], bundle, (base_catalog()[0],))["1"]
    second = run_suite(replica["returns"], bundle, (base_catalog()[0],))["1"]
    assert first.coef_means == second.coef_means
    assert first.per_asset == second.per_asset


def test_empty_catalog_rejected(replica):
    bundle = build_factor_bundle(replica["panel"], replica["returns"])
    with pytest.raises(UsageError):
        run_suite(replica["returns"], bundle, ())
