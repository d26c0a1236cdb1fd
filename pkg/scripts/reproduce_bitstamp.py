"""Rolling h(2) over a Bitstamp BTC/USD history.

Accepts either the raw trade dump (``unix_timestamp,price,amount``) or a daily
``timestamp,value`` price CSV. Prints the yearly mean of h(2) over 365-day
windows stepped daily, and checks two expectations: windows ending before
2013 are anti-persistent on average, and windows ending in 2015-2016 average
close to 0.5.

    python3 scripts/reproduce_bitstamp.py bitstampUSD.csv
"""

from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone

import numpy as np

from mfmarket.formats import read_prices
from mfmarket.rolling import RollingConfig, rolling_spectrum
from mfmarket.timeseries import ingest_ticks, log_returns, resample

DAY = 86400
EARLY_END = int(datetime(2013, 1, 1, tzinfo=timezone.utc).timestamp())
LATE_START = int(datetime(2015, 1, 1, tzinfo=timezone.utc).timestamp())
LATE_END = int(datetime(2017, 1, 1, tzinfo=timezone.utc).timestamp())


def daily_trace(path: str):
    with open(path, "rb") as fh:
        first = fh.readline().decode("utf-8", "replace").strip().lower()
    if first.startswith("timestamp,value"):
        with open(path, encoding="utf-8") as fh:
            prices = read_prices(fh)
        if prices.dt != DAY:
            raise SystemExit(f"price CSV must be daily, got dt={prices.dt}s")
    else:
        prices = resample(ingest_ticks(path), DAY, origin=0)
    returns = log_returns(prices, f"bitstamp {path}")
    return rolling_spectrum(returns, RollingConfig(365 * DAY, DAY))


def qualitative_check(path: str, trace=None) -> tuple[bool, str]:
    trace = daily_trace(path) if trace is None else trace
    ts, h2 = trace.timestamps, trace.h2
    early = h2[(ts < EARLY_END) & ~np.isnan(h2)]
    late = h2[(ts >= LATE_START) & (ts < LATE_END) & ~np.isnan(h2)]
    if len(early) == 0 or len(late) == 0:
        return False, f"history does not cover both periods ({len(early)} early, {len(late)} late windows)"
    ok = early.mean() < 0.5 and 0.45 <= late.mean() <= 0.55
    return bool(ok), (f"mean h2 before 2013 = {early.mean():.3f} ({len(early)} windows), "
                      f"2015-2016 = {late.mean():.3f} ({len(late)} windows)")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("path")
    args = ap.parse_args(argv)
    trace = daily_trace(args.path)
    years = np.array([datetime.fromtimestamp(int(t), tz=timezone.utc).year
                      for t in trace.timestamps])
    for y in np.unique(years):
        h = trace.h2[(years == y) & ~np.isnan(trace.h2)]
        if len(h):
            print(f"{y}: mean h2 {h.mean():.3f} over {len(h)} windows")
    ok, detail = qualitative_check(args.path, trace)
    print(("PASS " if ok else "FAIL ") + detail)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
