import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfscope.ingest import (DayPrices, FormatConfig, PriceGrid, ReturnSeries, SessionConfig,
                            TickParseError, grid_size, log_returns, parse_ticks, read_returns,
                            resample, write_returns)

TWO_DAYS = """\
2024-03-04T09:00:00,100.0
2024-03-04T09:00:20,101.0
2024-03-04T12:00:00,102.5
2024-03-04T17:29:45,99.0
2024-03-05T09:00:05,103.0
2024-03-05T10:00:00,104.0
"""


def _count_grid(session):
    # independent count by stepping a datetime
    t = dt.datetime.combine(dt.date(2024, 1, 1), session.open)
    end = dt.datetime.combine(dt.date(2024, 1, 1), session.close) - dt.timedelta(
        seconds=session.close_cutoff)
    n = 0
    while t <= end:
        n += 1
        t += dt.timedelta(seconds=session.interval)
    return n


def test_parse_single_record():
    ts = parse_ticks("2024-03-04T10:15:00,42.5")
    assert len(ts) == 1
    tick = next(iter(ts))
    assert tick.timestamp == dt.datetime(2024, 3, 4, 10, 15)
    assert tick.price == 42.5


def test_zero_price_is_error():
    with pytest.raises(TickParseError) as info:
        parse_ticks("2024-03-04T10:00:00,1.0\n2024-03-04T10:00:01,0")
    assert info.value.line == 2


def test_late_tick_dropped():
    ts = parse_ticks(TWO_DAYS)
    assert len(ts) == 5 and ts.n_dropped == 1


def test_malformed_strict_and_lenient():
    text = "2024-03-04T10:00:00,1.0\nnot a record\n2024-03-04T10:00:02,1.5\n"
    with pytest.raises(TickParseError) as info:
        parse_ticks(text)
    assert info.value.line == 2
    with pytest.warns(UserWarning, match="line 2"):
        ts = parse_ticks(text, FormatConfig(strict=False))
    assert len(ts) == 2


def test_backstep_rejected_unless_tolerated():
    text = "2024-03-04T10:00:05,1.0\n2024-03-04T10:00:03,1.1\n"
    with pytest.raises(TickParseError, match="precedes"):
        parse_ticks(text)
    ts = parse_ticks(text, FormatConfig(max_backstep=5))
    assert ts.prices.tolist() == [1.1, 1.0]


def test_timezone_conversion_and_custom_format():
    ts = parse_ticks("2024-03-04T08:30:00+00:00,5.0")
    assert next(iter(ts)).timestamp == dt.datetime(2024, 3, 4, 9, 30)
    fmt = FormatConfig(delimiter=";", timestamp_format="%d/%m/%Y %H:%M:%S", header=True)
    ts = parse_ticks(["time;price", "04/03/2024 09:01:00;7"], fmt)
    assert ts.prices.tolist() == [7.0]


def test_grid_sizes():
    assert grid_size(SessionConfig(close_cutoff=0)) == 2041
    assert grid_size(SessionConfig()) == 2039
    for s in (SessionConfig(close_cutoff=0), SessionConfig(),
              SessionConfig(close=dt.time(17, 28), close_cutoff=15),
              SessionConfig(interval=60, close_cutoff=120)):
        assert grid_size(s) == _count_grid(s)
    assert grid_size(SessionConfig(close=dt.time(17, 28), close_cutoff=15)) == 2032


def test_session_validation():
    with pytest.raises(ValueError):
        SessionConfig(interval=7)
    with pytest.raises(ValueError):
        SessionConfig(open=dt.time(18), close=dt.time(9))


def test_resample_example():
    session = SessionConfig(close=dt.time(9, 0, 30), close_cutoff=10)
    ticks = parse_ticks("2024-03-04T09:00:00,100\n2024-03-04T09:00:07,101\n"
                        "2024-03-04T09:00:20,99\n", session=session)
    grid = resample(ticks, 15, session)
    assert grid.days[0].prices.tolist() == [100.0, 101.0]
    assert grid.days[0].offsets.tolist() == [0.0, 15.0]


def test_resample_drops_leading_points_and_is_idempotent():
    grid = resample(parse_ticks(TWO_DAYS))
    d2 = grid.days[1]
    assert d2.offsets[0] == 15.0
    assert d2.prices[:3].tolist() == [103.0, 103.0, 103.0]
    assert grid.days[0].offsets.size == 2039
    again = resample(grid.to_ticks())
    for a, b in zip(grid.days, again.days):
        np.testing.assert_array_equal(a.prices, b.prices)
        np.testing.assert_array_equal(a.offsets, b.offsets)


def test_missing_date_warns():
    with pytest.warns(UserWarning, match="no ticks"):
        grid = resample(parse_ticks(TWO_DAYS), dates=[dt.date(2024, 3, 6)])
    assert len(grid.days) == 2


def test_log_returns_basic():
    grid = PriceGrid([DayPrices(dt.date(2024, 1, 2), np.arange(4) * 15.0, np.full(4, 3.0)),
                      DayPrices(dt.date(2024, 1, 3), np.arange(2) * 15.0, np.array([1, np.e]))],
                     15)
    ret = log_returns(grid)
    np.testing.assert_array_equal(ret.blocks[0], np.zeros(3))
    assert ret.blocks[1][0] == pytest.approx(1.0)
    assert ret.flagged == [] or ret.flagged == [dt.date(2024, 1, 3)]


def test_full_dataset_count():
    rng = np.random.default_rng(0)
    start = dt.date(2000, 1, 3)
    days = [DayPrices(start + dt.timedelta(days=i), np.arange(2032) * 15.0,
                      np.exp(np.cumsum(rng.normal(0, 1e-4, 2032)) + 4))
            for i in range(510)]
    ret = log_returns(PriceGrid(days, 15))
    assert len(ret) == 1_035_810 == 510 * (2032 - 1)
    assert ret.n_days == 510 and ret.is_uniform


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.floats(1e-3, 1e3), min_size=2, max_size=30), min_size=1, max_size=6))
def test_returns_count_and_telescoping(day_prices):
    start = dt.date(2020, 1, 1)
    days = [DayPrices(start + dt.timedelta(days=i), np.arange(len(p)) * 15.0, np.array(p))
            for i, p in enumerate(day_prices)]
    ret = log_returns(PriceGrid(days, 15))
    assert len(ret) == sum(len(p) - 1 for p in day_prices)
    for block, p in zip(ret.blocks, day_prices):
        # no return straddles two days, and each day telescopes to its own endpoints
        assert block.size == len(p) - 1
        assert abs(block.sum() - (np.log(p[-1]) - np.log(p[0]))) < 1e-12


def test_short_day_flagged_and_single_price_day_dropped():
    d = dt.date(2024, 1, 2)
    grid = PriceGrid([DayPrices(d, np.arange(5) * 15.0, np.arange(1, 6.0)),
                      DayPrices(d + dt.timedelta(1), np.arange(5) * 15.0, np.arange(1, 6.0)),
                      DayPrices(d + dt.timedelta(2), np.arange(3) * 15.0, np.arange(1, 4.0)),
                      DayPrices(d + dt.timedelta(3), np.zeros(1), np.ones(1))], 15)
    with pytest.warns(UserWarning, match="fewer than 2"):
        ret = log_returns(grid)
    assert ret.n_days == 3
    assert ret.flagged == [d + dt.timedelta(2)]


@pytest.mark.parametrize("suffix", [".txt", ".csv"])
def test_roundtrip_bit_exact(tmp_path, suffix):
    rng = np.random.default_rng(3)
    ser = ReturnSeries.from_array(rng.standard_normal(250) * 1e-3 + 1e-17, 100)
    path = tmp_path / f"r{suffix}"
    write_returns(ser, path, {"source": "unit"})
    back = read_returns(path)
    assert back.dates == ser.dates
    for a, b in zip(ser.blocks, back.blocks):
        assert a.tobytes() == b.tobytes()


def test_read_rejects_garbage(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("# mfscope returns v1\n0.1\n")
    with pytest.raises(ValueError, match="DATE"):
        read_returns(p)
