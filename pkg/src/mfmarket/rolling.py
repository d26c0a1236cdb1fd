"""Sliding-window evaluation of h(2), the multifractal degree and ILLIQ."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataQualityError, MfmarketError
from .liquidity import rolling_illiq
from .mfdfa import MfdfaConfig
from .spectrum import hurst_spectrum
from .timeseries import DailyAggregate, ReturnSeries

logger = logging.getLogger(__name__)

DAY = 86400


@dataclass(frozen=True)
class RollingConfig:
    window: int = 365 * DAY  # seconds
    step: int = DAY
    min_coverage: float = 0.9

    def __post_init__(self):
        if self.window <= 0 or self.step <= 0:
            raise ConfigError("window and step must be positive durations")
        if self.step > self.window:
            raise ConfigError("step must not exceed window")
        if not 0.0 < self.min_coverage <= 1.0:
            raise ConfigError("min_coverage must lie in (0, 1]")

    def in_samples(self, dt: int) -> tuple[int, int]:
        if self.window % dt or self.step % dt:
            raise ConfigError(f"window {self.window}s and step {self.step}s must be "
                              f"multiples of the sampling period {dt}s")
        return self.window // dt, self.step // dt


@dataclass(frozen=True)
class RollingTrace:
    """Per-window estimates labelled by window end.

    Windows that could not be evaluated keep their timestamp, hold NaN and
    are listed in ``skipped``.
    """

    timestamps: np.ndarray
    h2: np.ndarray
    delta_h: np.ndarray
    illiq: np.ndarray | None = None
    skipped: tuple[tuple[int, str], ...] = ()
    step: int = DAY
    label: str = ""

    def __len__(self) -> int:
        return len(self.timestamps)


def _window_estimate(r: np.ndarray, mf: MfdfaConfig):
    sp = hurst_spectrum(r, mf)
    return sp.h2, sp.delta_h


def rolling_spectrum(returns: ReturnSeries, cfg: RollingConfig | None = None,
                     mf: MfdfaConfig | None = None,
                     days: Sequence[DailyAggregate] | None = None,
                     threads: int = 1) -> RollingTrace:
    """Evaluate MF-DFA on every window ``(end - window, end]`` of the return series.

    The first window holds the first ``window / dt`` returns; later windows
    advance by ``step``. When ``days`` is given, ILLIQ is computed over the
    same trailing calendar window at each end date.
    """
    cfg = cfg or RollingConfig()
    mf = mf or MfdfaConfig()
    if not np.any(mf.resolved_q() == 2.0):
        raise ConfigError("the q grid must contain q = 2 for a rolling h(2) trace")
    r = np.asarray(returns.returns, dtype=float)
    w, step_n = cfg.in_samples(returns.dt)
    if len(r) < w:
        raise DataQualityError(f"series of {len(r)} returns is shorter than one window ({w})")
    ends = np.arange(w - 1, len(r), step_n)
    stamps = returns.timestamps[ends]
    filled = None if returns.filled is None else np.asarray(returns.filled, dtype=bool)

    def work(e: int):
        lo = e - w + 1
        if filled is not None:
            coverage = 1.0 - filled[lo:e + 1].mean()
            if coverage < cfg.min_coverage:
                return None, f"coverage {coverage:.3f} below {cfg.min_coverage}"
        try:
            return _window_estimate(r[lo:e + 1], mf), None
        except MfmarketError as exc:
            return None, str(exc)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            results = list(pool.map(work, ends))
    else:
        results = [work(e) for e in ends]

    h2 = np.full(len(ends), np.nan)
    dh = np.full(len(ends), np.nan)
    skipped = []
    for i, (est, reason) in enumerate(results):
        if est is None:
            skipped.append((int(stamps[i]), reason))
        else:
            h2[i], dh[i] = est
    if skipped:
        logger.warning("%d of %d windows skipped", len(skipped), len(ends))

    illiq = None
    if days is not None:
        if cfg.window % DAY:
            raise ConfigError("ILLIQ needs a window that is a whole number of days")
        window_days = cfg.window // DAY
        end_dates = [datetime.fromtimestamp(int(ts), tz=timezone.utc).date() for ts in stamps]
        points, missing = rolling_illiq(days, window_days, sorted(set(end_dates)))
        by_date = {p.window_end: p.illiq for p in points}
        for _, reason in missing:
            logger.warning("%s", reason)
        illiq = np.array([by_date.get(d, np.nan) for d in end_dates])
    return RollingTrace(stamps, h2, dh, illiq, tuple(skipped), cfg.step)


@dataclass(frozen=True)
class AlignedTable:
    timestamps: np.ndarray
    columns: dict = field(default_factory=dict)
    n_dropped: int = 0


def align_traces(traces: Sequence[RollingTrace]) -> AlignedTable:
    """Inner join on window-end timestamps.

    Columns are named ``<label>.<field>`` (label defaults to the trace's
    position). Rows where any joined column is NaN are dropped and counted.
    """
    if not traces:
        raise ConfigError("nothing to align")
    steps = {t.step for t in traces}
    if len(steps) > 1:
        raise ConfigError(f"traces have different steps: {sorted(steps)}")
    common = np.asarray(traces[0].timestamps)
    for t in traces[1:]:
        common = np.intersect1d(common, t.timestamps)
    union = np.asarray(traces[0].timestamps)
    for t in traces[1:]:
        union = np.union1d(union, t.timestamps)

    columns: dict[str, np.ndarray] = {}
    for i, t in enumerate(traces):
        label = t.label or str(i)
        if f"{label}.h2" in columns:
            label = f"{label}#{i}"
        idx = np.searchsorted(t.timestamps, common)
        columns[f"{label}.h2"] = np.asarray(t.h2)[idx]
        columns[f"{label}.delta_h"] = np.asarray(t.delta_h)[idx]
        if t.illiq is not None:
            columns[f"{label}.illiq"] = np.asarray(t.illiq)[idx]
    keep = np.ones(len(common), dtype=bool)
    for col in columns.values():
        keep &= ~np.isnan(col)
    n_dropped = len(union) - int(keep.sum())
    if not keep.any():
        logger.warning("aligned table is empty")
    return AlignedTable(common[keep], {k: v[keep] for k, v in columns.items()}, n_dropped)
