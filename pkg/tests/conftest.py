import dataclasses

import numpy as np
import pytest

from housefactors.dgp import DGPConfig, generate, replica_preset
from housefactors.panel import compute_returns, market_return_series


@pytest.fixture(scope="session")
def replica():
    """Replica panel plus its derived returns and market series."""
    config = replica_preset()
    panel, truth = generate(config)
    returns = compute_returns(panel)
    market = market_return_series(panel, "national_index")
    return {
        "config": config,
        "panel": panel,
        "truth": truth,
        "returns": returns,
        "market": market,
    }


def small_dgp(seed=0, n_assets=20, n_quarters=60, noise_sd=1.0, **kwargs):
    """Compact panel config for unit tests."""
    defaults = dict(
        n_assets=n_assets,
        n_quarters=n_quarters,
        market_mean=1.0,
        market_sd=0.8,
        seed=seed,
        beta_range=(0.2, 1.8),
        noise_sd=noise_sd,
    )
    defaults.update(kwargs)
    return DGPConfig(**defaults)


def normal_equations_oracle(X, y):
    """Independent check: solve (X'X) b = X'y by Gauss-Jordan elimination."""
    A = X.T @ X
    rhs = X.T @ y
    k = A.shape[0]
    M = np.concatenate([A, rhs[:, None]], axis=1).astype(float)
    for col in range(k):
        piv = col + int(np.argmax(np.abs(M[col:, col])))
        if M[piv, col] == 0.0:
            raise np.linalg.LinAlgError("singular system in oracle")
        M[[col, piv]] = M[[piv, col]]
        M[col] = M[col] / M[col, col]
        for r in range(k):
            if r != col:
                M[r] = M[r] - M[r, col] * M[col]
    return M[:, -1]


def replace(config, **kwargs):
    return dataclasses.replace(config, **kwargs)
