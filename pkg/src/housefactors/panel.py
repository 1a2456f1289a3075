"""Quarterly panel ingestion, validation, and return construction.

The input format is long-form delimited text with header
``asset,year,quarter,series,value``. Asset-invariant series (the national
index, an equity index, the risk-free rate) ride under the reserved asset
name ``__MARKET__``. Missing cells are absent rows. All matrices use NaN
for missing observations and are immutable after load.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    AlignmentError,
    CalendarGapError,
    DataError,
    DuplicateCellError,
    MalformedRowError,
    NonPositiveLevelError,
    UnknownSeriesError,
)
from .quarters import QuarterId, quarter_range

MARKET_ASSET = "__MARKET__"

PER_ASSET_SERIES = (
    "price_index",
    "median_price",
    "income",
    "employment",
    "foreclosures",
)
MARKET_SERIES = ("national_index", "equity_index", "riskfree_rate")
ALL_SERIES = PER_ASSET_SERIES + MARKET_SERIES

HEADER = ("asset", "year", "quarter", "series", "value")


@dataclass(frozen=True)
class IndexPanel:
    """Aligned quarterly levels per asset plus optional market-wide series.

    ``values[kind]`` is (n_assets, n_quarters) for per-asset kinds and
    (n_quarters,) for market kinds; NaN marks a missing cell.
    """

    assets: tuple[str, ...]
    calendar: tuple[QuarterId, ...]
    values: Mapping[str, np.ndarray]

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def n_quarters(self) -> int:
        return len(self.calendar)

    def series(self, kind: str) -> np.ndarray:
        if kind not in self.values:
            raise UnknownSeriesError(f"panel has no series {kind!r}")
        return self.values[kind]

    def has_series(self, kind: str) -> bool:
        return kind in self.values


@dataclass(frozen=True)
class ReturnPanel:
    """Percent log returns; the calendar drops the first source quarter."""

    assets: tuple[str, ...]
    calendar: tuple[QuarterId, ...]
    returns: np.ndarray  # (n_assets, n_quarters)

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def n_quarters(self) -> int:
        return len(self.calendar)

    def asset_returns(self, asset: str) -> np.ndarray:
        try:
            idx = self.assets.index(asset)
        except ValueError:
            raise DataError(f"unknown asset {asset!r}") from None
        return self.returns[idx]


def load_panel(path, schema: Mapping[str, str] | None = None) -> IndexPanel:
    """Parse a long-format panel file into a validated IndexPanel.

    ``schema`` maps the file's series labels to canonical kinds; by
    default labels must already be canonical. Assets sort
    lexicographically; the calendar is inferred from the data and must be
    gap-free. Errors carry the offending line number or quarter.
    """
    label_map = dict(schema) if schema is not None else {k: k for k in ALL_SERIES}
    for label, kind in label_map.items():
        if kind not in ALL_SERIES:
            raise UnknownSeriesError(f"schema maps {label!r} to unknown kind {kind!r}")

    cells: dict[tuple[str, int, str], float] = {}
    quarters: set[int] = set()
    assets: set[str] = set()
    kinds: set[str] = set()

    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRowError(1, "empty file; expected header row") from None
        if tuple(h.strip() for h in header) != HEADER:
            raise MalformedRowError(1, f"expected header {','.join(HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise MalformedRowError(line_no, f"expected 5 fields, got {len(row)}")
            asset, year_s, quarter_s, label, value_s = (f.strip() for f in row)
            try:
                year = int(year_s)
                quarter = int(quarter_s)
            except ValueError:
                raise MalformedRowError(line_no, f"bad year/quarter {year_s!r},{quarter_s!r}") from None
            if quarter not in (1, 2, 3, 4):
                raise MalformedRowError(line_no, f"quarter must be 1..4, got {quarter}")
            try:
                value = float(value_s)
            except ValueError:
                raise MalformedRowError(line_no, f"bad value {value_s!r}") from None
            if not np.isfinite(value):
                raise MalformedRowError(line_no, f"non-finite value {value_s!r}")
            if label not in label_map:
                raise MalformedRowError(line_no, f"unknown series {label!r}")
            kind = label_map[label]
            is_market_kind = kind in MARKET_SERIES
            if is_market_kind != (asset == MARKET_ASSET):
                raise MalformedRowError(
                    line_no,
                    f"series {kind!r} must use asset "
                    f"{MARKET_ASSET if is_market_kind else 'a real asset name'}",
                )
            if kind == "price_index" and value <= 0.0:
                raise NonPositiveLevelError(
                    f"line {line_no}: price_index must be positive, got {value}"
                )
            qid = QuarterId(year, quarter)
            key = (asset, qid.to_index(), kind)
            if key in cells:
                raise DuplicateCellError(
                    f"line {line_no}: duplicate cell ({asset}, {qid}, {kind})"
                )
            cells[key] = value
            quarters.add(qid.to_index())
            kinds.add(kind)
            if asset != MARKET_ASSET:
                assets.add(asset)

    if not cells:
        raise DataError(f"{path}: no data rows")

    lo, hi = min(quarters), max(quarters)
    for idx in range(lo, hi + 1):
        if idx not in quarters:
            raise CalendarGapError(f"calendar gap: no data for {QuarterId.from_index(idx)}")
    calendar = quarter_range(QuarterId.from_index(lo), QuarterId.from_index(hi))

    asset_list = tuple(sorted(assets))
    asset_pos = {a: i for i, a in enumerate(asset_list)}
    n_a, n_q = len(asset_list), len(calendar)

    values: dict[str, np.ndarray] = {}
    for kind in sorted(kinds):
        if kind in MARKET_SERIES:
            values[kind] = np.full(n_q, np.nan)
        else:
            values[kind] = np.full((n_a, n_q), np.nan)
    for (asset, q_idx, kind), value in cells.items():
        col = q_idx - lo
        if kind in MARKET_SERIES:
            values[kind][col] = value
        else:
            values[kind][asset_pos[asset]][col] = value
    for arr in values.values():
        arr.setflags(write=False)

    return IndexPanel(assets=asset_list, calendar=calendar, values=values)


def compute_returns(panel: IndexPanel, series: str = "price_index") -> ReturnPanel:
    """Percent log differences: 100 * (ln level_t - ln level_{t-1}).

    A return slot is present only where both levels are present and
    positive. Market-wide series yield a single-row panel under the
    reserved asset name.
    """
    levels = panel.series(series)
    if levels.ndim == 1:
        levels = levels[None, :]
        assets: tuple[str, ...] = (MARKET_ASSET,)
    else:
        assets = panel.assets
    with np.errstate(invalid="ignore", divide="ignore"):
        logs = np.where(levels > 0.0, np.log(np.where(levels > 0.0, levels, 1.0)), np.nan)
    rets = 100.0 * (logs[:, 1:] - logs[:, :-1])
    rets.setflags(write=False)
    return ReturnPanel(assets=assets, calendar=panel.calendar[1:], returns=rets)


def market_return_series(panel: IndexPanel, series: str) -> np.ndarray:
    """Return series (length |calendar|-1) of a market-wide level series."""
    if series not in MARKET_SERIES:
        raise UnknownSeriesError(f"{series!r} is not a market-wide series")
    return compute_returns(panel, series).returns[0]


def to_excess_returns(returns: ReturnPanel, riskfree: np.ndarray) -> ReturnPanel:
    """Subtract the contemporaneous risk-free rate from every return.

    ``riskfree`` must already be aligned to the return calendar and in
    percent-per-quarter units; missing returns stay missing.
    """
    rf = np.asarray(riskfree, dtype=float)
    if rf.shape != (returns.n_quarters,):
        raise AlignmentError(
            f"riskfree length {rf.shape} does not match return calendar ({returns.n_quarters},)"
        )
    adj = returns.returns - rf[None, :]
    adj.setflags(write=False)
    return ReturnPanel(assets=returns.assets, calendar=returns.calendar, returns=adj)


def write_panel(panel: IndexPanel, path) -> None:
    """Write a panel back out in the load_panel file format.

    Row order is deterministic: market rows first, then rows sorted by
    (asset, series, year, quarter); NaN cells are omitted.
    """
    rows = []
    for kind in sorted(panel.values):
        arr = panel.values[kind]
        if arr.ndim == 1:
            for qi, q in enumerate(panel.calendar):
                if np.isfinite(arr[qi]):
                    rows.append((MARKET_ASSET, q.year, q.quarter, kind, arr[qi]))
        else:
            for ai, asset in enumerate(panel.assets):
                for qi, q in enumerate(panel.calendar):
                    if np.isfinite(arr[ai, qi]):
                        rows.append((asset, q.year, q.quarter, kind, arr[ai, qi]))
    rows.sort(key=lambda r: (r[0] != MARKET_ASSET, r[0], r[3], r[1], r[2]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for asset, year, quarter, kind, value in rows:
            writer.writerow((asset, year, quarter, kind, repr(float(value))))
