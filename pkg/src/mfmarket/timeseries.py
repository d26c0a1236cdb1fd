"""Tick ingestion, fixed-period resampling and log-return construction."""

from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import IO, Iterator, Sequence

import numpy as np

from .errors import ConfigError, DataQualityError, IngestError

logger = logging.getLogger(__name__)

FILL_POLICIES = ("carry-forward",)
MAX_REJECT_FRACTION = 0.01
TICK_HEADER = ("timestamp", "price", "amount")


@dataclass(frozen=True)
class TickRecord:
    timestamp: int
    price: float
    amount: float


@dataclass(frozen=True)
class Ticks:
    """Column store of trades sorted by timestamp.

    Iterating yields :class:`TickRecord` objects; the arrays are what the
    rest of the pipeline works on.
    """

    timestamps: np.ndarray
    prices: np.ndarray
    amounts: np.ndarray
    n_rejected: int = 0
    rejected_lines: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.timestamps)

    def __iter__(self) -> Iterator[TickRecord]:
        for t, p, a in zip(self.timestamps, self.prices, self.amounts):
            yield TickRecord(int(t), float(p), float(a))

    def __getitem__(self, i: int) -> TickRecord:
        return TickRecord(int(self.timestamps[i]), float(self.prices[i]), float(self.amounts[i]))

    @classmethod
    def from_records(cls, records: Sequence[TickRecord]) -> "Ticks":
        ts = np.array([r.timestamp for r in records], dtype=np.int64)
        ps = np.array([r.price for r in records], dtype=float)
        am = np.array([r.amount for r in records], dtype=float)
        if np.any(ps <= 0) or np.any(am < 0):
            raise DataQualityError("tick records need price > 0 and amount >= 0")
        order = np.argsort(ts, kind="stable")
        return cls(ts[order], ps[order], am[order])

    def shifted(self, offset: int) -> "Ticks":
        return Ticks(self.timestamps + offset, self.prices, self.amounts,
                     self.n_rejected, self.rejected_lines)


@dataclass(frozen=True)
class PriceSeries:
    start: int
    dt: int
    prices: np.ndarray
    n_filled: int = 0
    filled: np.ndarray | None = None  # per-sample gap-fill flag

    def __len__(self) -> int:
        return len(self.prices)

    @property
    def timestamps(self) -> np.ndarray:
        return self.start + self.dt * np.arange(len(self.prices), dtype=np.int64)


@dataclass(frozen=True)
class ReturnSeries:
    """Log-returns on a uniform grid.

    ``returns[n]`` is labelled with the time of the later of its two prices,
    so ``start`` is one sampling period after the first price.
    """

    start: int
    dt: int
    returns: np.ndarray
    source_meta: str = ""
    filled: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.returns)

    @property
    def timestamps(self) -> np.ndarray:
        return self.start + self.dt * np.arange(len(self.returns), dtype=np.int64)


@dataclass(frozen=True)
class DailyAggregate:
    day: date
    close: float
    volume: float
    daily_return: float
    has_return: bool = field(default=True)


def _open_text(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"))
    if isinstance(source, str):
        try:
            return open(source, "r", encoding="utf-8", newline="")
        except OSError as exc:
            raise IngestError(f"cannot read {source}: {exc}") from exc
    if hasattr(source, "read"):
        sample = source.read()
        if isinstance(sample, bytes):
            sample = sample.decode("utf-8")
        return io.StringIO(sample)
    raise IngestError(f"unsupported tick source {type(source).__name__}")


def _parse_timestamp(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise
        return int(value)


def ingest_ticks(source, max_reject_fraction: float = MAX_REJECT_FRACTION) -> Ticks:
    """Parse a headerless ``unix_timestamp,price,amount`` trade dump.

    ``source`` may be a path, raw bytes or a file object. A leading
    ``timestamp,price,amount`` header (as written by :func:`write_ticks`) is
    tolerated. Bad rows are skipped and their 1-based line numbers kept on the
    result; more than ``max_reject_fraction`` of them is fatal.
    """
    try:
        handle = _open_text(source)
        with handle:
            lines = handle.read().splitlines()
    except UnicodeDecodeError as exc:
        raise IngestError(f"tick source is not UTF-8: {exc}") from exc
    except OSError as exc:
        raise IngestError(str(exc)) from exc

    ts: list[int] = []
    ps: list[float] = []
    am: list[float] = []
    rejected: list[int] = []
    n_rows = 0
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if lineno == 1 and tuple(p.strip().lower() for p in parts) == TICK_HEADER:
            continue
        n_rows += 1
        try:
            if len(parts) != 3:
                raise ValueError("expected 3 columns")
            t = _parse_timestamp(parts[0])
            p = float(parts[1])
            a = float(parts[2])
            if not (math.isfinite(p) and math.isfinite(a)) or p <= 0 or a < 0:
                raise ValueError("price must be > 0 and amount >= 0")
        except ValueError as exc:
            logger.debug("rejected line %d: %s", lineno, exc)
            rejected.append(lineno)
            continue
        ts.append(t)
        ps.append(p)
        am.append(a)

    if n_rows == 0:
        logger.warning("tick source is empty")
    if rejected:
        logger.warning("rejected %d of %d tick rows (first at line %d)",
                       len(rejected), n_rows, rejected[0])
        if len(rejected) > max_reject_fraction * n_rows:
            raise DataQualityError(
                f"{len(rejected)} of {n_rows} rows rejected, above the "
                f"{max_reject_fraction:.0%} limit (first bad line {rejected[0]})")

    t_arr = np.array(ts, dtype=np.int64)
    order = np.argsort(t_arr, kind="stable")
    return Ticks(t_arr[order], np.array(ps, dtype=float)[order],
                 np.array(am, dtype=float)[order], len(rejected), tuple(rejected))


def resample(ticks: Ticks, dt: int, fill: str = "carry-forward",
             origin: int | None = None) -> PriceSeries:
    """Last-trade price per bin ``[start + n*dt, start + (n+1)*dt)``.

    ``start`` is the first tick's timestamp, or the largest multiple of
    ``origin``-aligned ``dt`` not after it when ``origin`` is given (e.g.
    ``origin=0`` aligns daily bins to UTC midnight).
    """
    if fill not in FILL_POLICIES:
        raise ConfigError(f"unsupported fill policy {fill!r}; expected one of {FILL_POLICIES}")
    dt = int(dt)
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if len(ticks) == 0:
        raise DataQualityError("no ticks to resample: all bins empty")
    t = np.asarray(ticks.timestamps, dtype=np.int64)
    if np.any(np.diff(t) < 0):
        raise DataQualityError("ticks must be sorted by timestamp")

    start = int(t[0])
    if origin is not None:
        start = int(origin) + ((start - int(origin)) // dt) * dt
    bins = (t - start) // dt
    n_bins = int(bins[-1]) + 1

    # last tick of each occupied bin
    last = np.flatnonzero(np.r_[bins[1:] != bins[:-1], True])
    occupied = np.zeros(n_bins, dtype=bool)
    occupied[bins[last]] = True
    prices = np.empty(n_bins)
    prices[bins[last]] = ticks.prices[last]
    # carry forward: index of the most recent occupied bin
    src = np.where(occupied, np.arange(n_bins), 0)
    np.maximum.accumulate(src, out=src)
    prices = prices[src]
    filled = ~occupied
    return PriceSeries(start, dt, prices, int(filled.sum()), filled)


def log_returns(prices: PriceSeries, source_meta: str = "") -> ReturnSeries:
    p = np.asarray(prices.prices, dtype=float)
    if len(p) < 2:
        raise DataQualityError("need at least two prices for a return")
    if np.any(~(p > 0)):
        raise DataQualityError("prices must be positive")
    lp = np.log(p)
    r = lp[1:] - lp[:-1]
    filled = None if prices.filled is None else np.asarray(prices.filled)[1:].copy()
    return ReturnSeries(prices.start + prices.dt, prices.dt, r, source_meta, filled)


def _utc_day(ts: int) -> date:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).date()


def daily_aggregates(ticks: Ticks) -> list[DailyAggregate]:
    """One aggregate per UTC calendar day that has trades.

    The first day carries ``daily_return = 0`` and ``has_return = False``;
    returns of later days bridge any tradeless days in between.
    """
    if len(ticks) == 0:
        raise DataQualityError("no ticks to aggregate")
    t = np.asarray(ticks.timestamps, dtype=np.int64)
    day_idx = t // 86400
    bounds = np.flatnonzero(np.r_[True, day_idx[1:] != day_idx[:-1], True])
    out: list[DailyAggregate] = []
    prev_close = None
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        close = float(ticks.prices[hi - 1])
        volume = math.fsum(ticks.amounts[lo:hi].tolist())
        if prev_close is None:
            ret, has_ret = 0.0, False
        else:
            ret, has_ret = math.log(close) - math.log(prev_close), True
        out.append(DailyAggregate(_utc_day(t[lo]), close, volume, ret, has_ret))
        prev_close = close
    return out
