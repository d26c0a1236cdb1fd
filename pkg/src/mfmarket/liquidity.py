"""Amihud illiquidity over trailing day windows."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from typing import Sequence

from .errors import ConfigError, DataQualityError
from .timeseries import DailyAggregate


class NoUsableDays(DataQualityError):
    pass


@dataclass(frozen=True)
class IlliqPoint:
    window_end: date
    illiq: float
    days_used: int
    days_skipped: int


def amihud_illiq(days: Sequence[DailyAggregate], window_end: date,
                 window_days: int) -> IlliqPoint:
    """Mean of ``|R_t| / (p_t V_t)`` over usable days in ``(end - window, end]``.

    A day is usable when it has a return (not the first day of the series)
    and positive close and volume. Calendar days that are absent, have zero
    volume or no return all count towards ``days_skipped``.
    """
    window_days = int(window_days)
    if window_days < 1:
        raise ConfigError("window_days must be >= 1")
    first = window_end - timedelta(days=window_days - 1)
    terms = []
    for d in days:
        if not first <= d.day <= window_end:
            continue
        if not d.has_return or d.volume <= 0 or d.close <= 0:
            continue
        terms.append(abs(d.daily_return) / (d.close * d.volume))
    if not terms:
        raise NoUsableDays(f"no usable days in the window ending {window_end}")
    used = len(terms)
    return IlliqPoint(window_end, sum(terms) / used, used, window_days - used)


def rolling_illiq(days: Sequence[DailyAggregate], window_days: int = 365,
                  ends: Sequence[date] | None = None):
    """ILLIQ at each window end; defaults to every day once a full window exists.

    Returns ``(points, skipped)`` where ``skipped`` lists ``(end, reason)``
    for windows without usable days.
    """
    if not days:
        raise DataQualityError("no daily aggregates")
    if ends is None:
        d0 = days[0].day + timedelta(days=int(window_days) - 1)
        ends = [d0 + timedelta(days=i) for i in range((days[-1].day - d0).days + 1)]
    days = sorted(days, key=lambda d: d.day)
    ends = sorted(ends)
    points, skipped = [], []
    lo = hi = 0
    for end in ends:
        start = end - timedelta(days=int(window_days) - 1)
        while lo < len(days) and days[lo].day < start:
            lo += 1
        hi = max(hi, lo)
        while hi < len(days) and days[hi].day <= end:
            hi += 1
        try:
            points.append(amihud_illiq(days[lo:hi], end, window_days))
        except NoUsableDays as exc:
            skipped.append((end, str(exc)))
    return points, skipped
