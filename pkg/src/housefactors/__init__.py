"""Panel factor-model estimation toolkit for quarterly housing returns.

Builds returns from price-index panels, constructs market / size /
momentum / idiosyncratic-risk factors, fits per-asset and rolling-window
regressions, runs the three-stage portfolio validity test, and ships a
seeded synthetic generator so every estimator can be checked against a
known truth.
"""

__version__ = "0.1.0"

from .dgp import DGPConfig, generate, replica_preset
from .factors import FactorBundle, build_factor_bundle
from .fm import FMConfig, FMResult, run_fama_macbeth
from .models import ModelCatalogEntry, SuiteSummary, augmented_catalog, base_catalog, run_suite
from .ols import FitResult, RegressionSpec, fit, mean_tstat, t_critical
from .panel import IndexPanel, ReturnPanel, compute_returns, load_panel, to_excess_returns
from .quarters import QuarterId
from .rolling import RollingFitSeries, rolling_betas

__all__ = [
    "DGPConfig",
    "FMConfig",
    "FMResult",
    "FactorBundle",
    "FitResult",
    "IndexPanel",
    "ModelCatalogEntry",
    "QuarterId",
    "RegressionSpec",
    "ReturnPanel",
    "RollingFitSeries",
    "SuiteSummary",
    "augmented_catalog",
    "base_catalog",
    "build_factor_bundle",
    "compute_returns",
    "fit",
    "generate",
    "load_panel",
    "mean_tstat",
    "replica_preset",
    "rolling_betas",
    "run_fama_macbeth",
    "run_suite",
    "t_critical",
    "to_excess_returns",
]
