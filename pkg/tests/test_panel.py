import numpy as np
import pytest

from housefactors.errors import (
    AlignmentError,
    CalendarGapError,
    DuplicateCellError,
    MalformedRowError,
    NonPositiveLevelError,
    UnknownSeriesError,
)
from housefactors.panel import (
    MARKET_ASSET,
    compute_returns,
    load_panel,
    market_return_series,
    to_excess_returns,
    write_panel,
)
from housefactors.quarters import QuarterId


def _write(tmp_path, rows, name="panel.csv"):
    path = tmp_path / name
    lines = ["asset,year,quarter,series,value"] + rows
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _grid(assets, quarters, series="price_index", values=None):
    rows = []
    for a_i, asset in enumerate(assets):
        for q_i, (year, quarter) in enumerate(quarters):
            v = values[a_i][q_i] if values is not None else 100.0 + q_i
            if v is None:
                continue
            rows.append(f"{asset},{year},{quarter},{series},{v}")
    return rows


QUARTERS_4 = [(1990, 1), (1990, 2), (1990, 3), (1990, 4)]


def test_load_two_assets_four_quarters(tmp_path):
    path = _write(tmp_path, _grid(["b", "a"], QUARTERS_4))
    panel = load_panel(path)
    assert panel.assets == ("a", "b")  # lexicographic
    assert panel.n_quarters == 4
    assert panel.calendar[0] == QuarterId(1990, 1)
    assert panel.series("price_index").shape == (2, 4)


def test_calendar_gap_names_quarter(tmp_path):
    rows = _grid(["a"], [(1987, 1), (1987, 2), (1987, 4)])
    with pytest.raises(CalendarGapError, match="1987Q3"):
        load_panel(_write(tmp_path, rows))


def test_non_positive_price_index(tmp_path):
    rows = _grid(["a"], QUARTERS_4) + ["a,1991,1,price_index,-5"]
    with pytest.raises(NonPositiveLevelError):
        load_panel(_write(tmp_path, rows))


def test_duplicate_cell(tmp_path):
    rows = _grid(["a"], QUARTERS_4) + ["a,1990,2,price_index,123"]
    with pytest.raises(DuplicateCellError):
        load_panel(_write(tmp_path, rows))


def test_malformed_rows_report_line_numbers(tmp_path):
    rows = _grid(["a"], QUARTERS_4) + ["a,1990,notanumber,price_index,1"]
    with pytest.raises(MalformedRowError) as err:
        load_panel(_write(tmp_path, rows))
    assert err.value.line_no == len(rows) + 1  # header is line 1

    with pytest.raises(MalformedRowError):
        load_panel(_write(tmp_path, ["a,1990,1,price_index"]))
    with pytest.raises(MalformedRowError):
        load_panel(_write(tmp_path, ["a,1990,5,price_index,1"]))
    with pytest.raises(MalformedRowError):
        load_panel(_write(tmp_path, ["a,1990,1,mystery_series,1"]))


def test_header_required(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("wrong,header,row,here,now\n", encoding="utf-8")
    with pytest.raises(MalformedRowError):
        load_panel(path)


def test_market_series_requires_reserved_asset(tmp_path):
    rows = _grid(["a"], QUARTERS_4) + ["a,1990,1,national_index,100"]
    with pytest.raises(MalformedRowError):
        load_panel(_write(tmp_path, rows))
    rows = _grid(["a"], QUARTERS_4) + [f"{MARKET_ASSET},1990,1,price_index,100"]
    with pytest.raises(MalformedRowError):
        load_panel(_write(tmp_path, rows))


def test_schema_maps_labels(tmp_path):
    rows = [f"a,1990,{q},hpi,{100 + q}" for q in (1, 2, 3, 4)]
    panel = load_panel(_write(tmp_path, rows), schema={"hpi": "price_index"})
    assert panel.has_series("price_index")


def test_missing_cells_are_nan(tmp_path):
    # second asset keeps the calendar gap-free while the first has a hole
    values = [[100.0, None, 110.0, 115.0], [50.0, 51.0, 52.0, 53.0]]
    panel = load_panel(_write(tmp_path, _grid(["a", "b"], QUARTERS_4, values=values)))
    levels = panel.series("price_index")[0]
    assert np.isnan(levels[1]) and levels[0] == 100.0


# --- return construction ---------------------------------------------------


def _panel_from_levels(tmp_path, levels):
    quarters = [(1990 + i // 4, i % 4 + 1) for i in range(len(levels[0]))]
    assets = [f"a{i}" for i in range(len(levels))]
    return load_panel(_write(tmp_path, _grid(assets, quarters, values=levels)))


def test_constant_level_gives_zero_return(tmp_path):
    panel = _panel_from_levels(tmp_path, [[100.0, 100.0]])
    rets = compute_returns(panel)
    assert rets.returns[0, 0] == 0.0
    assert rets.n_quarters == 1
    assert rets.calendar == panel.calendar[1:]


def test_two_percent_level_change(tmp_path):
    panel = _panel_from_levels(tmp_path, [[100.0, 102.0]])
    rets = compute_returns(panel)
    # frozen from a 30-digit evaluation of 100*ln(1.02)
    assert abs(rets.returns[0, 0] - 1.9802627296179713) < 1e-12


def test_missing_level_blanks_adjacent_returns(tmp_path):
    panel = _panel_from_levels(tmp_path, [[100.0, None, 110.0], [50.0, 51.0, 52.0]])
    rets = compute_returns(panel)
    assert np.isnan(rets.returns[0]).all()
    assert np.isfinite(rets.returns[1]).all()


def test_return_slot_count(tmp_path):
    levels = [list(100.0 + np.arange(9.0))]
    panel = _panel_from_levels(tmp_path, levels)
    assert compute_returns(panel).returns.shape == (1, 8)


def test_returns_roundtrip_through_levels(tmp_path):
    rng = np.random.default_rng(8)
    rets_true = rng.normal(1.0, 2.0, size=(3, 40))
    levels = 100.0 * np.exp(np.cumsum(rets_true / 100.0, axis=1))
    levels = np.concatenate([np.full((3, 1), 100.0), levels], axis=1)
    panel = _panel_from_levels(tmp_path, levels.tolist())
    rets = compute_returns(panel)
    assert np.allclose(rets.returns, rets_true, atol=1e-10)


def test_unknown_series_kind(tmp_path):
    panel = _panel_from_levels(tmp_path, [[100.0, 101.0]])
    with pytest.raises(UnknownSeriesError):
        compute_returns(panel, "employment")
    with pytest.raises(UnknownSeriesError):
        market_return_series(panel, "price_index")


# --- excess returns ---------------------------------------------------------


def _simple_returns(tmp_path):
    panel = _panel_from_levels(tmp_path, [[100.0, 102.0, 101.0, 103.0]])
    return compute_returns(panel)


def test_excess_subtracts_rate(tmp_path):
    rets = _simple_returns(tmp_path)
    rf = np.full(rets.n_quarters, 0.5)
    adj = to_excess_returns(rets, rf)
    assert np.allclose(adj.returns, rets.returns - 0.5)


def test_excess_zero_rate_is_identity(tmp_path):
    rets = _simple_returns(tmp_path)
    adj = to_excess_returns(rets, np.zeros(rets.n_quarters))
    assert (adj.returns == rets.returns).all()


def test_excess_preserves_missing(tmp_path):
    panel = _panel_from_levels(
        tmp_path, [[100.0, None, 101.0, 103.0], [50.0, 51.0, 52.0, 53.0]]
    )
    rets = compute_returns(panel)
    adj = to_excess_returns(rets, np.full(rets.n_quarters, 0.5))
    assert np.isnan(adj.returns[0, 0]) and np.isnan(adj.returns[0, 1])
    assert np.isfinite(adj.returns[0, 2])


def test_excess_misalignment(tmp_path):
    rets = _simple_returns(tmp_path)
    with pytest.raises(AlignmentError):
        to_excess_returns(rets, np.zeros(rets.n_quarters + 1))


# --- write/load roundtrip ---------------------------------------------------


def test_write_panel_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    levels = 100.0 * np.exp(np.cumsum(rng.normal(0.01, 0.02, size=(2, 6)), axis=1))
    panel = _panel_from_levels(tmp_path, levels.tolist())
    out = tmp_path / "copy.csv"
    write_panel(panel, out)
    reloaded = load_panel(out)
    assert reloaded.assets == panel.assets
    assert reloaded.calendar == panel.calendar
    assert np.array_equal(
        reloaded.series("price_index"), panel.series("price_index"), equal_nan=True
    )
    # deterministic bytes
    out2 = tmp_path / "copy2.csv"
    write_panel(panel, out2)
    assert out.read_bytes() == out2.read_bytes()
