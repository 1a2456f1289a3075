"""Command-line driver: ingestion, factors, model suites, rolling windows,
portfolio tests, synthetic generation, and report emission.

Every subcommand writes a ``run_metadata.json`` echo into the output
directory (argv, input digests, package version) so any numeric output
can be reproduced from the echo alone. Exit codes: 0 success, 2 usage
error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dgp import DGPConfig, generate, replica_preset
from .errors import DataError, HouseFactorsError, NumericError, UsageError
from .factors import (
    DEFAULT_IDIO_WINDOW,
    DEFAULT_MOMENTUM_K,
    MARKET_CHOICES,
    MARKET_NATIONAL_PROVIDED,
    build_factor_bundle,
)
from .fm import FMConfig, run_fama_macbeth, subperiod_summary
from .models import augmented_catalog, base_catalog, per_asset_table, run_suite
from .ols import MeanTStat
from .panel import (
    IndexPanel,
    compute_returns,
    load_panel,
    market_return_series,
    to_excess_returns,
    write_panel,
)
from .quarters import QuarterId
from .report import (
    KIND_FACTOR_TABLE,
    KIND_FM_TABLE,
    KIND_PER_ASSET,
    KIND_ROLLING_PLOT,
    KIND_SCATTER,
    KIND_SORTED_BETA,
    KIND_SUITE_TABLE,
    ReportArtifact,
    correlation_matrix,
    emit,
    summary_stats,
)
from .rolling import rolling_betas, sorted_beta_view


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="housefactors",
        description="Panel factor-model estimation for quarterly housing returns",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_io(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", "-i", required=True, help="panel file (long format)")
        p.add_argument("--out", "-o", required=True, help="output directory")
        p.add_argument("--format", choices=("delimited", "json"), default="delimited")

    def add_factor_flags(p):
        p.add_argument("--market", choices=MARKET_CHOICES, default=MARKET_NATIONAL_PROVIDED)
        p.add_argument("--window", type=int, default=DEFAULT_IDIO_WINDOW,
                       help="idiosyncratic-risk window in quarters")
        p.add_argument("--idio-static", action="store_true",
                       help="full-sample idiosyncratic risk instead of a rolling window")
        p.add_argument("--smb-mode", choices=("single", "quartile_mean"), default="single")
        p.add_argument("--momentum-mode", choices=("fixed", "decile"), default="fixed")
        p.add_argument("--momentum-k", type=int, default=DEFAULT_MOMENTUM_K)
        p.add_argument("--excess", action="store_true",
                       help="subtract the risk-free rate from housing returns")

    p = sub.add_parser("ingest-check", help="validate a panel file and print its shape")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--out", "-o", help="optional directory for the metadata echo")
    p.set_defaults(handler=cmd_ingest_check)

    p = sub.add_parser("factors", help="emit the constructed factor tables")
    add_io(p)
    add_factor_flags(p)
    p.set_defaults(handler=cmd_factors)

    p = sub.add_parser("suite", help="per-asset model battery and summaries")
    add_io(p)
    add_factor_flags(p)
    p.add_argument("--catalog", choices=("base", "augmented"), default="base")
    p.add_argument("--model", help="restrict to one model id from the catalog")
    p.set_defaults(handler=cmd_suite)

    p = sub.add_parser("rolling", help="moving-window beta and R^2 series")
    add_io(p)
    add_factor_flags(p)
    p.add_argument("--asset", action="append", help="asset name (repeatable; default all)")
    p.add_argument("--roll-window", type=int, default=24, help="estimation window in quarters")
    p.set_defaults(handler=cmd_rolling)

    p = sub.add_parser("sorted-betas", help="every step-th full-sample beta with bands")
    add_io(p)
    add_factor_flags(p)
    p.add_argument("--step", type=int, default=10)
    p.set_defaults(handler=cmd_sorted_betas)

    p = sub.add_parser("scatter", help="full-sample beta vs mean return per asset")
    add_io(p)
    add_factor_flags(p)
    p.set_defaults(handler=cmd_scatter)

    p = sub.add_parser("fm", help="three-stage portfolio validity test")
    add_io(p)
    add_factor_flags(p)
    p.add_argument("--n-portfolios", type=int, default=15)
    p.add_argument("--formation", default="1:30", help="quarter positions lo:hi (1-based)")
    p.add_argument("--estimation", default="31:60")
    p.add_argument("--testing", default="61:92")
    p.add_argument("--intercept", action="store_true",
                   help="include an intercept in the cross-sectional regressions")
    p.add_argument("--subperiod", action="append", default=[],
                   help="extra summary rows, e.g. 2000Q1:2002Q2 (repeatable)")
    p.set_defaults(handler=cmd_fm)

    p = sub.add_parser("synth", help="generate a synthetic panel with known truth")
    p.add_argument("--out", "-o", required=True)
    p.add_argument("--preset", choices=("replica",))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--assets", type=int)
    p.add_argument("--quarters", type=int, help="number of return quarters")
    p.add_argument("--market-mean", type=float, default=1.15)
    p.add_argument("--market-sd", type=float, default=0.78)
    p.add_argument("--beta-low", type=float, default=0.0)
    p.add_argument("--beta-high", type=float, default=2.0)
    p.add_argument("--noise-sd", type=float, default=1.5)
    p.add_argument("--alpha-mean", type=float, default=0.0)
    p.add_argument("--alpha-sd", type=float, default=0.0)
    p.add_argument("--idio-premium", type=float, default=0.0)
    p.add_argument("--start", default="1984Q4")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("report", help="summary statistics and factor correlations")
    add_io(p)
    add_factor_flags(p)
    p.add_argument("--frequency", choices=("quarterly", "annual-mean", "both"), default="both")
    p.set_defaults(handler=cmd_report)

    return parser


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_echo(args, argv: list[str]) -> None:
    out = getattr(args, "out", None)
    if out is None:
        return
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = {
        "package": f"housefactors {__version__}",
        "subcommand": args.subcommand,
        "argv": argv,
        "inputs": {},
    }
    input_path = getattr(args, "input", None)
    if input_path:
        echo["inputs"][str(input_path)] = f"sha256:{_sha256(Path(input_path))}"
    with open(out_dir / "run_metadata.json", "w", encoding="utf-8") as fh:
        json.dump(echo, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _out_path(args, stem: str, fmt: str | None = None) -> Path:
    fmt = fmt or args.format
    ext = "csv" if fmt == "delimited" else "json"
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir / f"{stem}.{ext}"


def _cross_mean(matrix: np.ndarray) -> np.ndarray:
    """Per-quarter mean over present assets; NaN where no asset is present."""
    present = np.isfinite(matrix)
    counts = present.sum(axis=0)
    sums = np.where(present, matrix, 0.0).sum(axis=0)
    return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def _load_inputs(args):
    panel = load_panel(args.input)
    returns = compute_returns(panel)
    market_override = None
    if args.excess:
        if not panel.has_series("riskfree_rate"):
            raise DataError("--excess needs a riskfree_rate series in the panel")
        rf = panel.series("riskfree_rate")[1:]
        returns = to_excess_returns(returns, rf)
        if args.market == MARKET_NATIONAL_PROVIDED:
            market_override = market_return_series(panel, "national_index") - rf
    bundle = build_factor_bundle(
        panel,
        returns,
        market_choice=args.market,
        smb_mode=args.smb_mode,
        momentum_mode="fixed_count" if args.momentum_mode == "fixed" else "decile",
        momentum_k=args.momentum_k,
        idio_window=None if args.idio_static else args.window,
        market_override=market_override,
    )
    return panel, returns, bundle


def _meta(args, **extra) -> dict:
    meta = {"input": str(getattr(args, "input", "")), **extra}
    for key in ("market", "window", "smb_mode", "momentum_mode", "momentum_k", "excess"):
        if hasattr(args, key.replace("-", "_")):
            meta[key] = getattr(args, key.replace("-", "_"))
    return meta


def cmd_ingest_check(args) -> None:
    panel = load_panel(args.input)
    kinds = ",".join(sorted(panel.values))
    print(
        f"ok: {panel.n_assets} assets, {panel.n_quarters} quarters "
        f"({panel.calendar[0]}..{panel.calendar[-1]}), series: {kinds}"
    )


def cmd_factors(args) -> None:
    _, returns, bundle = _load_inputs(args)
    periods = [str(q) for q in bundle.calendar]

    shared_cols = ["period", "market"]
    shared_vals = [bundle.market]
    if bundle.equity is not None:
        shared_cols.append("equity_market")
        shared_vals.append(bundle.equity)
    if bundle.smb is not None:
        shared_cols.append("smb")
        shared_vals.append(bundle.smb)
    if bundle.momentum is not None:
        shared_cols.append("momentum")
        shared_vals.append(bundle.momentum)
    rows = tuple(
        (periods[t], *(float(v[t]) for v in shared_vals)) for t in range(len(periods))
    )
    emit(
        ReportArtifact(KIND_FACTOR_TABLE, tuple(shared_cols), rows,
                       _meta(args, table="per_quarter_factors")),
        args.format,
        _out_path(args, "factors_quarterly"),
    )

    per_asset = {
        "idio_risk": bundle.idio,
        "d_employment": bundle.d_emp,
        "afford_lag": bundle.afford_lag,
        "d_foreclosures": bundle.d_forc,
    }
    written = 1
    for name, matrix in per_asset.items():
        if matrix is None:
            continue
        rows = tuple(
            (asset, periods[t], float(matrix[a, t]))
            for a, asset in enumerate(bundle.assets)
            for t in range(len(periods))
            if np.isfinite(matrix[a, t])
        )
        emit(
            ReportArtifact(KIND_FACTOR_TABLE, ("asset", "period", "value"), rows,
                           _meta(args, table=name)),
            args.format,
            _out_path(args, f"factor_{name}"),
        )
        written += 1
    print(f"factors: wrote {written} tables to {args.out}")


def _suite_artifact(summaries: dict, meta: dict) -> ReportArtifact:
    model_ids = list(summaries)
    all_keys: list[str] = []
    for s in summaries.values():
        for key in s.regressors:
            if key not in all_keys:
                all_keys.append(key)
    rows = []
    for key in all_keys:
        rows.append((f"coef_mean:{key}",
                     *(summaries[m].coef_means.get(key, float("nan")) for m in model_ids)))
        rows.append((f"sig_count:{key}",
                     *(summaries[m].sig_counts.get(key, float("nan")) for m in model_ids)))
    for stat in ("mean", "min", "median", "max"):
        rows.append((f"beta_{stat}",
                     *(getattr(summaries[m].beta_stats, stat) if summaries[m].beta_stats else float("nan")
                       for m in model_ids)))
    for stat in ("mean", "min", "median", "max"):
        rows.append((f"r2_{stat}", *(getattr(summaries[m].r2_stats, stat) for m in model_ids)))
    rows.append(("n_fitted", *(summaries[m].n_fitted for m in model_ids)))
    rows.append(("n_skipped", *(len(summaries[m].skipped) for m in model_ids)))
    return ReportArtifact(KIND_SUITE_TABLE, ("row", *model_ids), tuple(rows), meta)


def cmd_suite(args) -> None:
    _, returns, bundle = _load_inputs(args)
    catalog = base_catalog() if args.catalog == "base" else augmented_catalog()
    if args.model is not None:
        catalog = tuple(e for e in catalog if e.model_id == args.model)
        if not catalog:
            raise UsageError(f"model {args.model!r} is not in the {args.catalog} catalog")
    summaries = run_suite(returns, bundle, catalog)
    emit(
        _suite_artifact(summaries, _meta(args, catalog=args.catalog)),
        args.format,
        _out_path(args, f"suite_{args.catalog}"),
    )
    for model_id, summary in summaries.items():
        rows = tuple(
            (r.asset, r.beta, r.se_beta, r.r_squared, r.mean_return, r.n_obs, r.note)
            for r in per_asset_table(summary)
        )
        emit(
            ReportArtifact(
                KIND_PER_ASSET,
                ("asset", "beta", "se_beta", "r_squared", "mean_return", "n_obs", "note"),
                rows,
                _meta(args, catalog=args.catalog, model=model_id),
            ),
            args.format,
            _out_path(args, f"per_asset_model{model_id}"),
        )
    print(f"suite: fitted {len(summaries)} models over {returns.n_assets} assets -> {args.out}")


def cmd_rolling(args) -> None:
    _, returns, bundle = _load_inputs(args)
    assets = args.asset if args.asset else list(returns.assets)
    count = 0
    for asset in assets:
        series = rolling_betas(
            returns.asset_returns(asset),
            bundle.market,
            returns.calendar,
            window=args.roll_window,
            asset=asset,
        )
        rows = tuple(
            (str(e.end), e.beta, e.lower, e.upper, e.r_squared) for e in series.entries
        )
        emit(
            ReportArtifact(
                KIND_ROLLING_PLOT,
                ("period", "beta", "lower", "upper", "r2"),
                rows,
                _meta(args, asset=asset, roll_window=args.roll_window,
                      skipped_windows=len(series.skipped)),
            ),
            args.format,
            _out_path(args, f"rolling_{asset}"),
        )
        count += 1
    print(f"rolling: wrote {count} series (window {args.roll_window}) to {args.out}")


def _model1_records(returns, bundle):
    summaries = run_suite(returns, bundle, (base_catalog()[0],))
    summary = summaries["1"]
    recs = []
    for row in summary.per_asset:
        if row.note:
            continue
        recs.append((row.asset, row.beta, row.se_beta, summary.fits[row.asset].dof,
                     row.mean_return))
    return recs


def cmd_sorted_betas(args) -> None:
    _, returns, bundle = _load_inputs(args)
    recs = _model1_records(returns, bundle)
    points = sorted_beta_view([(a, b, se, dof) for a, b, se, dof, _ in recs], step=args.step)
    rows = tuple((p.asset, p.beta, p.lower, p.upper) for p in points)
    emit(
        ReportArtifact(KIND_SORTED_BETA, ("asset", "beta", "lower", "upper"), rows,
                       _meta(args, step=args.step)),
        args.format,
        _out_path(args, "sorted_betas"),
    )
    print(f"sorted-betas: {len(rows)} of {len(recs)} betas -> {args.out}")


def cmd_scatter(args) -> None:
    _, returns, bundle = _load_inputs(args)
    recs = _model1_records(returns, bundle)
    rows = tuple((a, b, mean) for a, b, _, _, mean in sorted(recs))
    emit(
        ReportArtifact(KIND_SCATTER, ("asset", "beta", "mean_return"), rows, _meta(args)),
        args.format,
        _out_path(args, "scatter_beta_return"),
    )
    print(f"scatter: {len(rows)} assets -> {args.out}")


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise UsageError(f"cannot parse quarter range {text!r}; expected lo:hi") from None


def _fm_row(label: str, names, summary: dict[str, MeanTStat]) -> tuple:
    cells = [label]
    for name in names:
        s = summary[name]
        cells.extend([s.mean, s.t])
    return tuple(cells)


def cmd_fm(args) -> None:
    _, returns, bundle = _load_inputs(args)
    config = FMConfig(
        formation=_parse_range(args.formation),
        estimation=_parse_range(args.estimation),
        testing=_parse_range(args.testing),
        n_portfolios=args.n_portfolios,
        include_intercept=args.intercept,
    )
    result = run_fama_macbeth(returns, bundle.market, config)

    ordered = [n for n in ("beta", "beta_sq", "idio_risk") if n in result.gamma_names]
    ordered += [n for n in result.gamma_names if n not in ordered]
    columns = ["period_label"]
    for i, name in enumerate(ordered, start=1):
        suffix = str(i) if name != "intercept" else "0"
        columns.extend([f"gamma{suffix}", f"t{suffix}"])
    rows = [_fm_row("full", ordered, result.summary)]
    for sub in args.subperiod:
        try:
            lo_s, hi_s = sub.split(":")
        except ValueError:
            raise UsageError(f"cannot parse subperiod {sub!r}; expected 1999Q1:2002Q2") from None
        lo, hi = QuarterId.parse(lo_s), QuarterId.parse(hi_s)
        rows.append(_fm_row(f"{lo}..{hi}", ordered, subperiod_summary(result, lo, hi)))

    sizes = ",".join(str(s) for s in (len(m) for m in result.assignments))
    emit(
        ReportArtifact(
            KIND_FM_TABLE, tuple(columns), tuple(rows),
            _meta(args, n_portfolios=args.n_portfolios, portfolio_sizes=sizes,
                  formation=args.formation, estimation=args.estimation, testing=args.testing,
                  intercept=args.intercept),
        ),
        args.format,
        _out_path(args, "fm_table"),
    )
    gamma_rows = tuple(
        (str(q), *(float(g) for g in result.gammas[i]))
        for i, q in enumerate(result.testing_calendar)
    )
    emit(
        ReportArtifact(
            KIND_FM_TABLE, ("period", *result.gamma_names), gamma_rows,
            _meta(args, table="per_quarter_gammas"),
        ),
        "json",
        Path(args.out) / "fm_gammas.json",
    )
    print(f"fm: portfolios of sizes [{sizes}] -> {args.out}")


def cmd_synth(args) -> None:
    if args.preset and (args.assets or args.quarters):
        raise UsageError("--preset conflicts with --assets/--quarters")
    if args.preset == "replica":
        config = replica_preset()
        if args.seed is not None:
            config = dataclasses.replace(config, seed=args.seed)
    else:
        if not (args.assets and args.quarters):
            raise UsageError("custom synth needs --assets and --quarters (or use --preset)")
        config = DGPConfig(
            n_assets=args.assets,
            n_quarters=args.quarters,
            market_mean=args.market_mean,
            market_sd=args.market_sd,
            seed=args.seed if args.seed is not None else 0,
            beta_range=(args.beta_low, args.beta_high),
            alpha_mean=args.alpha_mean,
            alpha_sd=args.alpha_sd,
            noise_sd=args.noise_sd,
            idio_premium=args.idio_premium,
            start=QuarterId.parse(args.start),
        )
    panel, truth = generate(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_panel(panel, out_dir / "panel.csv")
    with open(out_dir / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(
        f"synth: {panel.n_assets} assets x {panel.n_quarters} level quarters "
        f"(seed {config.seed}) -> {out_dir / 'panel.csv'}"
    )


def cmd_report(args) -> None:
    _, returns, bundle = _load_inputs(args)
    series: dict[str, np.ndarray] = {"asset_return_mean": returns.returns, "market": bundle.market}
    if bundle.equity is not None:
        series["equity_market"] = bundle.equity
    if bundle.smb is not None:
        series["smb"] = bundle.smb
    if bundle.momentum is not None:
        series["momentum"] = bundle.momentum
    if bundle.idio is not None:
        series["idio_risk"] = bundle.idio
    if bundle.d_emp is not None:
        series["d_employment"] = bundle.d_emp
    if bundle.afford_lag is not None:
        series["afford_lag"] = bundle.afford_lag
    if bundle.d_forc is not None:
        series["d_foreclosures"] = bundle.d_forc

    frequencies = ("quarterly", "annual-mean") if args.frequency == "both" else (args.frequency,)
    written = 0
    for freq in frequencies:
        art = summary_stats(series, returns.calendar, frequency=freq)
        art = dataclasses.replace(art, metadata={**art.metadata, **_meta(args)})
        emit(art, args.format, _out_path(args, f"summary_stats_{freq.replace('-', '_')}"))
        written += 1

    flat = {
        name: (_cross_mean(arr) if arr.ndim == 2 else arr)
        for name, arr in series.items()
    }
    corr = correlation_matrix(flat)
    corr = dataclasses.replace(corr, metadata={**corr.metadata, **_meta(args)})
    emit(corr, args.format, _out_path(args, "correlation_matrix"))
    written += 1
    print(f"report: wrote {written} tables to {args.out}")


def main(argv: list[str] | None = None) -> int:
    raw_argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(raw_argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        args.handler(args)
        _write_echo(args, raw_argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    except HouseFactorsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
