"""Tabular report artifacts and deterministic emission.

Artifacts are plain (columns, rows) tables with a metadata echo; the
emitters write byte-stable delimited text or JSON, so identical inputs
always produce identical files. Figures are emitted as plot-ready data
files rather than images.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DataError, InsufficientDataError, ZeroVarianceError
from .quarters import QuarterId

KIND_SUMMARY_STATS = "summary_stats"
KIND_CORRELATION = "correlation_matrix"
KIND_SUITE_TABLE = "suite_table"
KIND_PER_ASSET = "per_asset_table"
KIND_ROLLING_PLOT = "rolling_plot"
KIND_SORTED_BETA = "sorted_beta_plot"
KIND_SCATTER = "scatter_plot"
KIND_FM_TABLE = "fm_table"
KIND_FACTOR_TABLE = "factor_table"


@dataclass(frozen=True)
class ReportArtifact:
    kind: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    metadata: Mapping[str, object]


def summary_stats(
    series: Mapping[str, np.ndarray],
    calendar: Sequence[QuarterId],
    frequency: str = "quarterly",
) -> ReportArtifact:
    """Mean, sample sd, min, median, max per series.

    2-D inputs (asset x quarter) are reduced to their per-quarter
    cross-sectional mean first. ``annual-mean`` averages the quarters of
    each calendar year before computing the statistics, which is how the
    published summary table aggregates.
    """
    if frequency not in ("quarterly", "annual-mean"):
        raise DataError(f"unknown frequency {frequency!r}")
    if not series:
        raise DataError("no series supplied")
    rows = []
    for name, arr in series.items():
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 2:
            present = np.isfinite(arr)
            counts = present.sum(axis=0)
            with np.errstate(invalid="ignore"):
                arr = np.where(counts > 0, np.where(present, arr, 0.0).sum(axis=0) / np.maximum(counts, 1), np.nan)
        if arr.shape != (len(calendar),):
            raise DataError(f"series {name!r} is not aligned with the calendar")
        if frequency == "annual-mean":
            arr = _annual_means(arr, calendar)
        vals = arr[np.isfinite(arr)]
        if vals.size == 0:
            raise DataError(f"series {name!r} has no present values")
        sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        rows.append(
            (name, float(vals.mean()), sd, float(vals.min()), float(np.median(vals)), float(vals.max()), int(vals.size))
        )
    return ReportArtifact(
        kind=KIND_SUMMARY_STATS,
        columns=("series", "mean", "sd", "min", "median", "max", "n"),
        rows=tuple(rows),
        metadata={"frequency": frequency},
    )


def _annual_means(arr: np.ndarray, calendar: Sequence[QuarterId]) -> np.ndarray:
    years = sorted({q.year for q in calendar})
    out = np.full(len(years), np.nan)
    year_idx = np.array([q.year for q in calendar])
    for i, year in enumerate(years):
        vals = arr[year_idx == year]
        vals = vals[np.isfinite(vals)]
        if vals.size:
            out[i] = vals.mean()
    return out


def correlation_matrix(series: Mapping[str, np.ndarray]) -> ReportArtifact:
    """Pairwise-complete Pearson correlations, symmetric with unit diagonal.

    Pairwise rather than listwise completion because the factor series
    have different missing prefixes; per-pair observation counts ride in
    the metadata.
    """
    names = list(series)
    if len(names) < 2:
        raise DataError("need at least 2 series")
    arrays = []
    for name in names:
        arr = np.asarray(series[name], dtype=float)
        if arr.ndim != 1:
            raise DataError(f"series {name!r} must be 1-D")
        arrays.append(arr)
    n = len(names)
    corr = np.eye(n)
    counts = np.zeros((n, n), dtype=int)
    for i in range(n):
        counts[i, i] = int(np.isfinite(arrays[i]).sum())
        for j in range(i + 1, n):
            mask = np.isfinite(arrays[i]) & np.isfinite(arrays[j])
            m = int(mask.sum())
            if m < 3:
                raise InsufficientDataError(
                    f"series {names[i]!r} and {names[j]!r} share only {m} present quarters"
                )
            xi = arrays[i][mask]
            xj = arrays[j][mask]
            xi_c = xi - xi.mean()
            xj_c = xj - xj.mean()
            vi = float(xi_c @ xi_c)
            vj = float(xj_c @ xj_c)
            if vi == 0.0:
                raise ZeroVarianceError(f"series {names[i]!r} is constant on the overlap")
            if vj == 0.0:
                raise ZeroVarianceError(f"series {names[j]!r} is constant on the overlap")
            c = float(xi_c @ xj_c) / math.sqrt(vi * vj)
            corr[i, j] = corr[j, i] = c
            counts[i, j] = counts[j, i] = m
    rows = tuple((names[i], *corr[i]) for i in range(n))
    return ReportArtifact(
        kind=KIND_CORRELATION,
        columns=("series", *names),
        rows=rows,
        metadata={"pair_counts": {f"{names[i]}|{names[j]}": int(counts[i, j]) for i in range(n) for j in range(n) if i < j}},
    )


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return f"{v:.6g}"
    return str(value)


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, QuarterId):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value)}")


def emit(artifact: ReportArtifact, fmt: str, destination) -> None:
    """Write one artifact; output bytes depend only on the artifact.

    Delimited output is comma-separated with ``#``-prefixed metadata
    lines and 6-significant-digit numerics; JSON keeps full precision.
    """
    if fmt == "delimited":
        lines = [f"# kind={artifact.kind}"]
        for key in sorted(artifact.metadata):
            lines.append(f"# {key}={json.dumps(artifact.metadata[key], sort_keys=True, default=_json_default)}")
        lines.append(",".join(artifact.columns))
        for row in artifact.rows:
            lines.append(",".join(_format_cell(v) for v in row))
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = {
            "kind": artifact.kind,
            "metadata": dict(artifact.metadata),
            "columns": list(artifact.columns),
            "rows": [list(r) for r in artifact.rows],
        }
        text = json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n"
    else:
        raise DataError(f"unknown emission format {fmt!r}")
    try:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {destination}: {exc}") from exc
