import logging
from datetime import date, timedelta

import numpy as np
import pytest

from mfmarket.errors import ConfigError, DataQualityError
from mfmarket.mfdfa import MfdfaConfig
from mfmarket.rolling import RollingConfig, RollingTrace, align_traces, rolling_spectrum
from mfmarket.spectrum import hurst_spectrum
from mfmarket.synth import gen_fgn, gen_gaussian
from mfmarket.timeseries import DailyAggregate, ReturnSeries

DAY = 86400
SMALL = RollingConfig(window=400 * DAY, step=20 * DAY)
Q = MfdfaConfig(q_grid=(-4.0, -2.0, 0.0, 2.0, 4.0))


def series(n, seed=0, dt=DAY, filled=None):
    r = gen_gaussian(n, seed, dt=dt)
    return ReturnSeries(r.start, dt, r.returns, "", filled)


class TestRollingSpectrum:
    def test_single_window(self):
        tr = rolling_spectrum(series(365), RollingConfig(), Q)
        assert len(tr) == 1
        assert tr.timestamps[0] == 364 * DAY

    def test_too_short(self):
        with pytest.raises(DataQualityError):
            rolling_spectrum(series(364), RollingConfig(), Q)

    def test_requires_q2(self):
        with pytest.raises(ConfigError):
            rolling_spectrum(series(400), SMALL, MfdfaConfig(q_grid=(-1.0, 1.0)))

    def test_window_not_multiple_of_dt(self):
        with pytest.raises(ConfigError):
            rolling_spectrum(series(2000, dt=7 * 3600), RollingConfig(), Q)

    @pytest.mark.parametrize("kw", [dict(step=2 * DAY, window=DAY), dict(min_coverage=0.0),
                                    dict(window=0)])
    def test_bad_config(self, kw):
        with pytest.raises(ConfigError):
            RollingConfig(**kw)

    def test_spacing_and_shape(self):
        tr = rolling_spectrum(series(1000), SMALL, Q)
        assert len(tr.h2) == len(tr.delta_h) == len(tr) == 31
        assert np.all(np.diff(tr.timestamps) == SMALL.step)
        assert tr.illiq is None

    def test_window_independence(self):
        s = series(1000, 3)
        tr = rolling_spectrum(s, SMALL, Q)
        k = 7
        lo = k * 20
        alone = hurst_spectrum(s.returns[lo:lo + 400], Q)
        assert tr.h2[k] == alone.h2 and tr.delta_h[k] == alone.delta_h

    def test_threads_and_refinement(self):
        s = series(1500, 4)
        one = rolling_spectrum(s, SMALL, Q, threads=1)
        for n in (4, 8):
            other = rolling_spectrum(s, SMALL, Q, threads=n)
            assert np.array_equal(one.h2, other.h2) and np.array_equal(one.delta_h, other.delta_h)
        half = rolling_spectrum(s, RollingConfig(window=400 * DAY, step=10 * DAY), Q)
        idx = np.searchsorted(half.timestamps, one.timestamps)
        assert np.array_equal(half.timestamps[idx], one.timestamps)
        assert np.array_equal(half.h2[idx], one.h2)
        assert np.array_equal(half.delta_h[idx], one.delta_h)

    def test_coverage_skip(self, caplog):
        filled = np.zeros(800, dtype=bool)
        filled[100:200] = True
        with caplog.at_level(logging.WARNING):
            tr = rolling_spectrum(series(800, filled=filled), SMALL, Q)
        bad = np.isnan(tr.h2)
        assert bad.any() and not bad.all()
        assert len(tr.skipped) == bad.sum()
        assert all("coverage" in reason for _, reason in tr.skipped)
        assert set(t for t, _ in tr.skipped) == set(tr.timestamps[bad])

    def test_illiq_column(self):
        s = series(500)
        days = [DailyAggregate(date(1970, 1, 1) + timedelta(days=i), 100.0, 2.0, 0.01, i > 0)
                for i in range(500)]
        tr = rolling_spectrum(s, SMALL, Q, days=days)
        assert np.allclose(tr.illiq, 0.01 / 200, rtol=1e-14)

    def test_white_noise_stays_efficient(self):
        # hourly sampling: one-year windows of 8760 returns, advanced daily
        for seed in range(2):
            s = series(3 * 365 * 24, seed, dt=3600)
            tr = rolling_spectrum(s, RollingConfig(step=DAY), Q)
            assert len(tr) == 731
            assert np.all((tr.h2 >= 0.40) & (tr.h2 <= 0.60))
            drift = np.polyfit(np.arange(len(tr)), tr.h2, 1)[0] * len(tr)
            assert abs(drift) < 0.1

    def test_regime_switch(self):
        n = 365 * 4
        for seed in range(3):
            parts = [gen_fgn(n, H, 10 * seed + i).returns for i, H in enumerate((0.3, 0.7, 0.3))]
            s = ReturnSeries(0, 6 * 3600, np.concatenate(parts))
            tr = rolling_spectrum(s, RollingConfig(step=7 * DAY), Q)
            assert abs(tr.h2[0] - 0.3) <= 0.08 and abs(tr.h2[-1] - 0.3) <= 0.08
            peak = int(np.argmax(tr.h2))
            assert len(tr) // 3 <= peak <= 2 * len(tr) // 3
            assert tr.h2[peak] > 0.6


def trace(ts, h2, label="", step=DAY, illiq=None):
    ts = np.asarray(ts, dtype=np.int64)
    h2 = np.asarray(h2, dtype=float)
    return RollingTrace(ts, h2, h2 / 2, illiq, (), step, label)


class TestAlign:
    def test_identity(self):
        ts = np.arange(10) * DAY
        t = align_traces([trace(ts, np.linspace(0.4, 0.6, 10), "a"),
                          trace(ts, np.linspace(0.3, 0.5, 10), "b")])
        assert len(t.timestamps) == 10 and t.n_dropped == 0
        assert set(t.columns) == {"a.h2", "a.delta_h", "b.h2", "b.delta_h"}

    def test_disjoint(self, caplog):
        with caplog.at_level(logging.WARNING):
            t = align_traces([trace(np.arange(5) * DAY, np.ones(5)),
                              trace((np.arange(5) + 10) * DAY, np.ones(5))])
        assert len(t.timestamps) == 0 and t.n_dropped == 10
        assert "empty" in caplog.text

    def test_interior_gaps(self):
        ts = np.arange(20) * DAY
        h = np.full(20, 0.5)
        h[[5, 9, 13]] = np.nan
        t = align_traces([trace(ts, np.full(20, 0.5), "a"), trace(ts, h, "b")])
        assert len(t.timestamps) == 17 and t.n_dropped == 3

    def test_duplicate_labels(self):
        ts = np.arange(3) * DAY
        t = align_traces([trace(ts, np.ones(3), "x"), trace(ts, np.ones(3), "x")])
        assert len(t.columns) == 4

    def test_step_mismatch(self):
        with pytest.raises(ConfigError):
            align_traces([trace([0, DAY], [1, 1]), trace([0, 2 * DAY], [1, 1], step=2 * DAY)])
