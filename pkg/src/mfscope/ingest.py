"""Tick data to intraday log-returns.

Ticks are read from delimiter-separated ``timestamp,price`` records,
restricted to the trading session (minus a closing cutoff), sampled on a
fixed clock grid anchored at the session open with last-observation-
carried-forward, and differenced in logs within each day. Returns never
span the overnight gap.
"""

from __future__ import annotations

import datetime as dt
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional
from zoneinfo import ZoneInfo

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "FormatConfig",
    "SessionConfig",
    "Tick",
    "TickSeries",
    "DayPrices",
    "PriceGrid",
    "ReturnSeries",
    "TickParseError",
    "parse_ticks",
    "resample",
    "log_returns",
    "grid_size",
    "read_returns",
    "write_returns",
]

FILE_MAGIC = "# mfscope returns v1"


class TickParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class FormatConfig:
    """How a tick file is laid out.

    ``timestamp_format`` is a ``strptime`` pattern; ``None`` means ISO 8601.
    Timestamps carrying a UTC offset are converted to ``timezone``; naive
    ones are taken to be exchange-local already.
    """

    delimiter: str = ","
    timestamp_format: Optional[str] = None
    timezone: str = "Europe/Madrid"
    header: bool = False
    strict: bool = True
    max_backstep: float = 0.0


@dataclass(frozen=True)
class SessionConfig:
    open: dt.time = dt.time(9, 0)
    close: dt.time = dt.time(17, 30)
    interval: int = 15
    close_cutoff: int = 30

    def __post_init__(self):
        length = self.session_seconds
        if length <= 0:
            raise ValueError(f"session close {self.close} is not after open {self.open}")
        if self.interval <= 0 or length % self.interval:
            raise ValueError(f"interval {self.interval}s does not divide the "
                             f"{length}s session")
        if not 0 <= self.close_cutoff < length:
            raise ValueError(f"close cutoff {self.close_cutoff}s is outside the session")

    @property
    def open_seconds(self) -> int:
        return _seconds(self.open)

    @property
    def session_seconds(self) -> int:
        return _seconds(self.close) - _seconds(self.open)

    @property
    def last_valid_seconds(self) -> int:
        return _seconds(self.close) - self.close_cutoff


def _seconds(t: dt.time) -> int:
    return t.hour * 3600 + t.minute * 60 + t.second


def grid_size(session: SessionConfig) -> int:
    """Number of grid points from the open up to ``close - cutoff`` inclusive."""
    span = session.last_valid_seconds - session.open_seconds
    return span // session.interval + 1


@dataclass(frozen=True)
class Tick:
    timestamp: dt.datetime
    price: float


@dataclass
class TickSeries:
    """Validated ticks, ordered in time, inside the session window."""

    timestamps: np.ndarray  # datetime64[us]
    prices: np.ndarray
    session_open: dt.time = dt.time(9, 0)
    session_close: dt.time = dt.time(17, 30)
    n_dropped: int = 0

    def __len__(self):
        return self.prices.size

    def __iter__(self) -> Iterator[Tick]:
        for ts, p in zip(self.timestamps, self.prices):
            yield Tick(ts.astype(dt.datetime), float(p))

    @classmethod
    def from_ticks(cls, ticks: Iterable[Tick], session: SessionConfig = SessionConfig()):
        ticks = list(ticks)
        ts = np.array([np.datetime64(t.timestamp, "us") for t in ticks], dtype="datetime64[us]")
        prices = np.array([t.price for t in ticks], dtype=np.float64)
        return cls(ts, prices, session.open, session.close)

    def days(self) -> Iterator[tuple]:
        """(date, seconds since midnight, prices) for each day present."""
        if len(self) == 0:
            return
        day = self.timestamps.astype("datetime64[D]")
        secs = (self.timestamps - day).astype("timedelta64[us]").astype(np.int64) / 1e6
        bounds = np.flatnonzero(np.diff(day.astype(np.int64))) + 1
        for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, day.size]):
            yield day[lo].astype(dt.date), secs[lo:hi], self.prices[lo:hi]


def _parse_timestamp(text: str, fmt: FormatConfig, tz: ZoneInfo) -> dt.datetime:
    stamp = (dt.datetime.fromisoformat(text) if fmt.timestamp_format is None
             else dt.datetime.strptime(text, fmt.timestamp_format))
    if stamp.tzinfo is not None:
        stamp = stamp.astimezone(tz).replace(tzinfo=None)
    return stamp


def parse_ticks(source, fmt: FormatConfig = FormatConfig(),
                session: SessionConfig = SessionConfig()) -> TickSeries:
    """Parse ``timestamp<delim>price`` records into a :class:`TickSeries`.

    ``source`` is a string, bytes, a path or an iterable of lines. Blank
    lines and ``#`` comments are skipped. Ticks before the open or after
    ``close - close_cutoff`` are dropped. A malformed record raises
    :class:`TickParseError` in strict mode and is skipped with a warning
    otherwise; a non-positive price or a timestamp that steps back more
    than ``max_backstep`` seconds is always an error.
    """
    lines = _iter_lines(source)
    tz = ZoneInfo(fmt.timezone)
    lo, hi = session.open_seconds, session.last_valid_seconds
    stamps: list[dt.datetime] = []
    prices: list[float] = []
    dropped = 0
    last = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#") or (fmt.header and lineno == 1):
            continue
        parts = line.split(fmt.delimiter)
        try:
            if len(parts) != 2:
                raise ValueError(f"expected 2 fields, got {len(parts)}")
            stamp = _parse_timestamp(parts[0].strip(), fmt, tz)
            price = float(parts[1])
            if not math.isfinite(price):
                raise ValueError(f"non-finite price {parts[1]!r}")
        except ValueError as exc:
            if fmt.strict:
                raise TickParseError(f"malformed record {line!r}: {exc}", lineno) from None
            warnings.warn(f"line {lineno}: skipping malformed record {line!r}", stacklevel=2)
            continue
        if price <= 0:
            raise TickParseError(f"non-positive price {price}", lineno)
        if last is not None and (last - stamp).total_seconds() > fmt.max_backstep:
            raise TickParseError(f"timestamp {stamp} precedes {last}", lineno)
        last = stamp if last is None else max(last, stamp)
        sec = stamp.hour * 3600 + stamp.minute * 60 + stamp.second + stamp.microsecond / 1e6
        if sec < lo or sec > hi:
            dropped += 1
            continue
        stamps.append(stamp)
        prices.append(price)
    ts = np.array(stamps, dtype="datetime64[us]")
    px = np.array(prices, dtype=np.float64)
    order = np.argsort(ts, kind="stable")
    return TickSeries(ts[order], px[order], session.open, session.close, dropped)


def _iter_lines(source) -> Iterable[str]:
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8")).readlines()
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8").splitlines()
    if isinstance(source, str):
        return source.splitlines()
    return source


@dataclass
class DayPrices:
    date: dt.date
    offsets: np.ndarray  # seconds after the open
    prices: np.ndarray


@dataclass
class PriceGrid:
    days: list
    interval: int
    session: SessionConfig = field(default_factory=SessionConfig)

    def to_ticks(self) -> TickSeries:
        """Grid prices as ticks stamped at their grid times."""
        stamps, prices = [], []
        for day in self.days:
            base = np.datetime64(day.date, "us") + np.timedelta64(self.session.open_seconds, "s")
            stamps.append(base + (day.offsets * 1e6).astype("timedelta64[us]"))
            prices.append(day.prices)
        ts = np.concatenate(stamps) if stamps else np.array([], dtype="datetime64[us]")
        px = np.concatenate(prices) if prices else np.array([])
        return TickSeries(ts, px, self.session.open, self.session.close)


def resample(ticks: TickSeries, interval: Optional[int] = None,
             session: SessionConfig = SessionConfig(), dates=None) -> PriceGrid:
    """Sample each day's ticks on a clock grid with last-observation-carried-forward.

    The grid runs from the open to ``close - close_cutoff``. Grid points
    before a day's first tick are dropped rather than invented. When
    ``dates`` lists the expected trading days, those without ticks are
    reported and omitted.
    """
    interval = session.interval if interval is None else int(interval)
    if interval <= 0 or session.session_seconds % interval:
        raise ValueError(f"interval {interval}s does not divide the session")
    n_grid = (session.last_valid_seconds - session.open_seconds) // interval + 1
    grid = session.open_seconds + interval * np.arange(n_grid, dtype=np.float64)
    out = []
    seen = set()
    for date, secs, prices in ticks.days():
        seen.add(date)
        idx = np.searchsorted(secs, grid, side="right") - 1
        covered = idx >= 0
        if not covered.any():
            warnings.warn(f"{date}: no tick at or before any grid point; day omitted",
                          stacklevel=2)
            continue
        out.append(DayPrices(date, grid[covered] - session.open_seconds, prices[idx[covered]]))
    for date in dates or ():
        if date not in seen:
            warnings.warn(f"{date}: no ticks; day omitted", stacklevel=2)
    return PriceGrid(out, interval, session)


@dataclass
class ReturnSeries:
    """Intraday log-returns, one block per market day."""

    dates: list
    blocks: list
    sampling_interval: int = 15
    flagged: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.dates) != len(self.blocks):
            raise ValueError("dates and blocks differ in length")
        self.blocks = [np.asarray(b, dtype=np.float64) for b in self.blocks]
        for d, b in zip(self.dates, self.blocks):
            if b.ndim != 1 or not np.all(np.isfinite(b)):
                raise ValueError(f"{d}: returns must be a finite 1-D array")

    def __len__(self):
        return sum(b.size for b in self.blocks)

    @property
    def n_days(self) -> int:
        return len(self.blocks)

    @property
    def day_lengths(self) -> np.ndarray:
        return np.array([b.size for b in self.blocks], dtype=np.int64)

    @property
    def is_uniform(self) -> bool:
        return self.n_days > 0 and bool(np.all(self.day_lengths == self.day_lengths[0]))

    def flatten(self) -> np.ndarray:
        if not self.blocks:
            return np.array([], dtype=np.float64)
        return np.concatenate(self.blocks)

    def day_index(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_days), self.day_lengths)

    def with_blocks(self, blocks, dates=None) -> "ReturnSeries":
        return ReturnSeries(list(self.dates if dates is None else dates), list(blocks),
                            self.sampling_interval, list(self.flagged))

    @classmethod
    def from_array(cls, x, day_length: Optional[int] = None,
                   start: dt.date = dt.date(2000, 1, 3), sampling_interval: int = 15):
        """Cut a flat series into consecutive synthetic days."""
        x = np.asarray(x, dtype=np.float64).ravel()
        day_length = x.size if not day_length else int(day_length)
        if day_length <= 0:
            raise ValueError("day_length must be positive")
        blocks = [x[i:i + day_length] for i in range(0, x.size, day_length)]
        dates = [start + dt.timedelta(days=i) for i in range(len(blocks))]
        return cls(dates, blocks, sampling_interval)


def log_returns(grid: PriceGrid) -> ReturnSeries:
    """Per-day ``ln p[k+1] - ln p[k]``; days with fewer than two prices are dropped.

    Days shorter than the most common length are kept and listed in
    ``flagged``.
    """
    dates, blocks = [], []
    for day in grid.days:
        if day.prices.size < 2:
            warnings.warn(f"{day.date}: fewer than 2 grid prices; day omitted", stacklevel=2)
            continue
        if np.any(day.prices <= 0):
            raise ValueError(f"{day.date}: non-positive price on the grid")
        dates.append(day.date)
        blocks.append(np.diff(np.log(day.prices)))
    series = ReturnSeries(dates, blocks, grid.interval)
    if blocks:
        lengths = series.day_lengths
        values, counts = np.unique(lengths, return_counts=True)
        modal = values[np.argmax(counts)]
        series.flagged = [d for d, n in zip(dates, lengths) if n < modal]
        if series.flagged:
            logger.info("%d short sessions kept: %s", len(series.flagged), series.flagged)
    return series


def write_returns(series: ReturnSeries, path, header: Optional[dict] = None) -> None:
    """Write returns as text (``# DATE`` blocks) or, for ``.csv``, as day-indexed rows.

    Values are written with ``repr`` so reading them back is bit-exact.
    """
    path = Path(path)
    meta = {"sampling_interval": series.sampling_interval}
    meta.update(header or {})
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        if path.suffix.lower() == ".csv":
            for key, value in meta.items():
                fh.write(f"# {key}: {value}\n")
            fh.write("day_index,date,return\n")
            for i, (d, b) in enumerate(zip(series.dates, series.blocks)):
                iso = d.isoformat()
                fh.writelines(f"{i},{iso},{float(v)!r}\n" for v in b)
            return
        fh.write(FILE_MAGIC + "\n")
        for key, value in meta.items():
            fh.write(f"# {key}: {value}\n")
        for d, b in zip(series.dates, series.blocks):
            fh.write(f"# DATE {d.isoformat()}\n")
            fh.writelines(f"{float(v)!r}\n" for v in b)


def read_returns(path) -> ReturnSeries:
    path = Path(path)
    text = path.read_text(encoding="utf-8").splitlines()
    meta = {}
    dates, blocks = [], []
    if path.suffix.lower() == ".csv":
        current = None
        for lineno, line in enumerate(text, start=1):
            if line.startswith("#"):
                _read_meta(line, meta)
                continue
            if not line.strip() or line.startswith("day_index"):
                continue
            try:
                idx, date, value = line.split(",")
                value = float(value)
                idx = int(idx)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed row {line!r}") from None
            if idx != current:
                current = idx
                dates.append(dt.date.fromisoformat(date))
                blocks.append([])
            blocks[-1].append(value)
    else:
        for lineno, line in enumerate(text, start=1):
            if line.startswith("# DATE "):
                dates.append(dt.date.fromisoformat(line[7:].strip()))
                blocks.append([])
            elif line.startswith("#"):
                _read_meta(line, meta)
            elif line.strip():
                if not blocks:
                    raise ValueError(f"{path}:{lineno}: value before the first '# DATE' line")
                try:
                    blocks[-1].append(float(line))
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from None
    interval = int(float(meta.get("sampling_interval", 15)))
    return ReturnSeries(dates, blocks, interval)


def _read_meta(line: str, meta: dict) -> None:
    body = line.lstrip("#").strip()
    if ":" in body:
        key, value = body.split(":", 1)
        meta[key.strip()] = value.strip()
