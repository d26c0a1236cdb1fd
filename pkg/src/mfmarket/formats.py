"""CSV/JSON wire formats shared by the library and the CLI.

Floats are written with 17 significant digits so every value round-trips
exactly; timestamps are RFC-3339 UTC.
"""

from __future__ import annotations

import csv
import json
import math
from datetime import date, datetime, timezone
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import DataQualityError
from .liquidity import IlliqPoint
from .mfdfa import FluctuationSurface
from .rolling import AlignedTable, RollingTrace
from .spectrum import HurstSpectrum
from .timeseries import PriceSeries, ReturnSeries, Ticks

SERIES_HEADER = ["timestamp", "value"]
SURFACE_HEADER = ["q", "s", "F"]
SPECTRUM_HEADER = ["q", "h", "stderr", "r2"]
TRACE_HEADER = ["timestamp", "h2", "delta_h", "illiq"]
ILLIQ_HEADER = ["timestamp", "illiq", "days_used", "days_skipped"]
TICKS_HEADER = ["timestamp", "price", "amount"]


def fmt_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return ""
    return f"{x:.17g}"


def _parse_float(text: str) -> float:
    return float("nan") if text.strip() == "" else float(text)


def to_rfc3339(ts: int) -> str:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def from_rfc3339(text: str) -> int:
    text = text.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def date_to_rfc3339(d: date) -> str:
    return f"{d.isoformat()}T00:00:00Z"


def _writer(handle: IO[str]):
    return csv.writer(handle, lineterminator="\n")


def write_series(series: PriceSeries | ReturnSeries, handle: IO[str]) -> None:
    values = series.prices if isinstance(series, PriceSeries) else series.returns
    w = _writer(handle)
    w.writerow(SERIES_HEADER)
    for ts, v in zip(series.timestamps, values):
        w.writerow([to_rfc3339(ts), fmt_float(v)])


def _read_rows(handle: IO[str], header: Sequence[str]) -> list[list[str]]:
    rows = [r for r in csv.reader(handle) if r]
    if not rows or [c.strip() for c in rows[0]] != list(header):
        found = rows[0] if rows else "nothing"
        raise DataQualityError(f"expected CSV header {','.join(header)}, found {found}")
    return rows[1:]


def read_series(handle: IO[str]) -> tuple[int, int, np.ndarray]:
    """Parse a ``timestamp,value`` CSV into ``(start, dt, values)``.

    The grid must be uniform. A single-row file has ``dt = 0``.
    """
    rows = _read_rows(handle, SERIES_HEADER)
    if not rows:
        raise DataQualityError("series CSV has no rows")
    try:
        ts = np.array([from_rfc3339(r[0]) for r in rows], dtype=np.int64)
        vals = np.array([float(r[1]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise DataQualityError(f"malformed series row: {exc}") from exc
    if len(ts) == 1:
        return int(ts[0]), 0, vals
    steps = np.diff(ts)
    if np.any(steps != steps[0]) or steps[0] <= 0:
        raise DataQualityError("series timestamps are not on a uniform increasing grid")
    return int(ts[0]), int(steps[0]), vals


def read_returns(handle: IO[str], source_meta: str = "") -> ReturnSeries:
    start, dt, vals = read_series(handle)
    return ReturnSeries(start, dt, vals, source_meta)


def read_prices(handle: IO[str]) -> PriceSeries:
    start, dt, vals = read_series(handle)
    return PriceSeries(start, dt, vals)


def write_ticks(ticks: Ticks, handle: IO[str]) -> None:
    w = _writer(handle)
    w.writerow(TICKS_HEADER)
    for t, p, a in zip(ticks.timestamps, ticks.prices, ticks.amounts):
        w.writerow([int(t), fmt_float(p), fmt_float(a)])


def write_surface(surface: FluctuationSurface, handle: IO[str]) -> None:
    w = _writer(handle)
    w.writerow(SURFACE_HEADER)
    for i, q in enumerate(surface.q_grid):
        for j, s in enumerate(surface.scales):
            w.writerow([fmt_float(q), int(s), fmt_float(surface.values[i, j])])


def read_surface(handle: IO[str]) -> FluctuationSurface:
    rows = _read_rows(handle, SURFACE_HEADER)
    q = np.array([float(r[0]) for r in rows])
    s = np.array([int(r[1]) for r in rows])
    f = np.array([float(r[2]) for r in rows])
    qs, ss = np.unique(q), np.unique(s)
    values = np.full((len(qs), len(ss)), np.nan)
    values[np.searchsorted(qs, q), np.searchsorted(ss, s)] = f
    return FluctuationSurface(ss, qs, values)


def write_spectrum(spectrum: HurstSpectrum, handle: IO[str]) -> None:
    w = _writer(handle)
    w.writerow(SPECTRUM_HEADER)
    for row in zip(spectrum.q_grid, spectrum.h, spectrum.stderr, spectrum.r2):
        w.writerow([fmt_float(x) for x in row])


def read_spectrum_table(handle: IO[str]) -> dict[str, np.ndarray]:
    rows = _read_rows(handle, SPECTRUM_HEADER)
    cols = np.array([[float(x) for x in r] for r in rows]).reshape(-1, 4)
    return dict(zip(SPECTRUM_HEADER, cols.T))


def write_trace(trace: RollingTrace, handle: IO[str]) -> None:
    w = _writer(handle)
    w.writerow(TRACE_HEADER)
    illiq = trace.illiq if trace.illiq is not None else np.full(len(trace), np.nan)
    for ts, h2, dh, il in zip(trace.timestamps, trace.h2, trace.delta_h, illiq):
        w.writerow([to_rfc3339(ts), fmt_float(h2), fmt_float(dh), fmt_float(il)])


def read_trace(handle: IO[str], label: str = "") -> RollingTrace:
    rows = _read_rows(handle, TRACE_HEADER)
    ts = np.array([from_rfc3339(r[0]) for r in rows], dtype=np.int64)
    h2 = np.array([_parse_float(r[1]) for r in rows])
    dh = np.array([_parse_float(r[2]) for r in rows])
    il = np.array([_parse_float(r[3]) for r in rows])
    steps = np.unique(np.diff(ts))
    if len(steps) > 1 or (len(steps) and steps[0] <= 0):
        raise DataQualityError("trace timestamps are not evenly spaced")
    step = int(steps[0]) if len(steps) else 0
    illiq = None if np.all(np.isnan(il)) else il
    return RollingTrace(ts, h2, dh, illiq, (), step, label)


def write_illiq(points: Iterable[IlliqPoint], handle: IO[str]) -> None:
    w = _writer(handle)
    w.writerow(ILLIQ_HEADER)
    for p in points:
        w.writerow([date_to_rfc3339(p.window_end), fmt_float(p.illiq), p.days_used,
                     p.days_skipped])


def read_illiq(handle: IO[str]) -> list[IlliqPoint]:
    rows = _read_rows(handle, ILLIQ_HEADER)
    out = []
    for r in rows:
        d = datetime.fromtimestamp(from_rfc3339(r[0]), tz=timezone.utc).date()
        out.append(IlliqPoint(d, float(r[1]), int(r[2]), int(r[3])))
    return out


def write_aligned(table: AlignedTable, handle: IO[str]) -> None:
    w = _writer(handle)
    names = list(table.columns)
    w.writerow(["timestamp", *names])
    for i, ts in enumerate(table.timestamps):
        w.writerow([to_rfc3339(ts), *(fmt_float(table.columns[n][i]) for n in names)])


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False)
