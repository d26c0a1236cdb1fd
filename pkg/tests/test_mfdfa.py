import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import reference_fq, reference_segment_variances
from mfmarket.errors import ConfigError, DataQualityError
from mfmarket.synth import gen_binomial_cascade
from mfmarket.mfdfa import (MfdfaConfig, Profile, SegmentVariances, build_profile,
                            default_q_grid, eval_local_polynomial, fit_local_polynomial,
                            fluctuation, fluctuation_surface, log_spaced_scales,
                            segment_variances)


class TestProfile:
    def test_pair(self):
        p = build_profile([1.0, -1.0])
        assert p.source_mean == 0.0
        assert p.values.tolist() == [1.0, 0.0]

    @pytest.mark.parametrize("c", [0.0, 3.5, -1e-3])
    def test_constant(self, c):
        assert np.allclose(build_profile([c, c, c]).values, 0.0, atol=1e-15)

    def test_ramp(self):
        p = build_profile([1.0, 2.0, 3.0])
        assert p.source_mean == 2.0
        assert p.values.tolist() == [-1.0, -1.0, 0.0]

    def test_too_short(self):
        with pytest.raises(DataQualityError):
            build_profile([1.0])

    def test_endpoint_vanishes(self, rng):
        r = rng.standard_normal(5000) * 7 + 2
        y = build_profile(r).values
        assert abs(y[-1]) <= 1e-9 * len(r) * np.max(np.abs(r))


class TestLocalFit:
    def test_constant(self):
        coef = fit_local_polynomial([5.0] * 5, 3)
        assert np.allclose(eval_local_polynomial(coef, 5), 5.0, atol=1e-12)

    def test_line(self):
        y = 2 + 3 * np.arange(1, 21, dtype=float)
        resid = y - eval_local_polynomial(fit_local_polynomial(y, 1), len(y))
        assert np.max(np.abs(resid)) < 1e-10

    def test_too_short(self):
        with pytest.raises(DataQualityError):
            fit_local_polynomial([1.0, 2.0, 3.0], 3)

    def test_optimal_against_perturbations(self, rng):
        y = rng.standard_normal(40).cumsum()
        coef = fit_local_polynomial(y, 3)
        best = np.sum((y - eval_local_polynomial(coef, len(y))) ** 2)
        for _ in range(2000):
            trial = coef + rng.normal(scale=10.0 ** rng.uniform(-6, 0), size=4)
            assert np.sum((y - eval_local_polynomial(trial, len(y))) ** 2) >= best

    def test_residuals_orthogonal(self, rng):
        y = rng.standard_normal(300).cumsum() * 100
        resid = y - eval_local_polynomial(fit_local_polynomial(y, 3), len(y))
        u = np.linspace(-1, 1, len(y))
        for k in range(4):
            basis = u ** k
            assert abs(resid @ basis) <= 1e-8 * np.linalg.norm(resid) * np.linalg.norm(basis)


class TestSegmentVariances:
    def test_segment_count_and_coverage(self):
        y = np.arange(1, 11, dtype=float) ** 2 + np.sin(np.arange(10))
        sv = segment_variances(Profile(y, 0.0), 3, 1)
        assert len(sv.values) == 6 and sv.n_segments == 3
        assert np.allclose(sv.values, reference_segment_variances(y, 3, 1), rtol=1e-10)
        # forward segments cover indices 1-9: the last entry never enters them
        y2 = y.copy()
        y2[9] += 100.0
        sv2 = segment_variances(Profile(y2, 0.0), 3, 1)
        assert np.array_equal(sv.values[:3], sv2.values[:3])
        # backward segments cover 2-10: the first entry never enters them
        y3 = y.copy()
        y3[0] -= 100.0
        sv3 = segment_variances(Profile(y3, 0.0), 3, 1)
        assert np.array_equal(sv.values[3:], sv3.values[3:])

    def test_mean_removal(self):
        sv = segment_variances(Profile(np.array([1.0, 2.0, 3.0, 4.0]), 0.0), 2, 0)
        # brute force: each half has residuals +-0.5
        expected = sum((v - 1.5) ** 2 for v in (1.0, 2.0)) / 2
        assert expected == 0.25
        assert sv.values[0] == pytest.approx(expected, rel=1e-14)

    def test_exact_cubic_floors(self):
        i = np.arange(1, 65, dtype=float)
        y = 0.3 - 2 * i + 0.01 * i ** 2 - 1e-4 * i ** 3
        sv = segment_variances(Profile(y, 0.0), 16, 3, 1e-30)
        assert np.all(sv.values == 1e-30)
        assert sv.n_floored == 8

    def test_scale_rejected(self):
        with pytest.raises(DataQualityError):
            segment_variances(Profile(np.zeros(30), 0.0), 16, 3)

    @pytest.mark.parametrize("n,s,m", [(200, 16, 3), (257, 20, 2), (1000, 37, 1), (999, 50, 3)])
    def test_matches_reference(self, rng, n, s, m):
        y = rng.standard_normal(n).cumsum()
        sv = segment_variances(Profile(y, 0.0), s, m)
        assert len(sv.values) == 2 * (n // s)
        assert np.allclose(sv.values, reference_segment_variances(y, s, m), rtol=1e-8)


class TestFluctuation:
    def test_constant_variances(self):
        q = np.array([-25, -2, 0, 0.5, 2, 25.0])
        surf = fluctuation([SegmentVariances(16, np.full(8, 9.0))], q)
        assert np.allclose(surf.values[:, 0], 3.0, rtol=1e-14)

    def test_q2_is_rms(self, rng):
        f2 = rng.exponential(2.0, 30)
        surf = fluctuation([SegmentVariances(16, f2)], [2.0])
        assert surf.values[0, 0] == pytest.approx(math.sqrt(np.mean(f2)), rel=1e-13)

    def test_negative_q_example(self):
        surf = fluctuation([SegmentVariances(4, np.array([1.0, 4.0]))], [-2.0])
        # (0.5 * (1 + 1/4)) ** (-1/2), evaluated by hand
        assert math.sqrt(8 / 5) == pytest.approx(1.2649110640673518, rel=1e-15)
        assert surf.values[0, 0] == pytest.approx(1.2649110640673518, rel=1e-13)

    def test_matches_direct_formula(self, rng):
        f2 = rng.exponential(1.0, 40) + 0.1
        q = np.array([-5.0, -1.0, 0.0, 1.0, 3.0, 5.0])
        surf = fluctuation([SegmentVariances(10, f2)], q)
        expected = [reference_fq(f2.tolist(), float(x)) for x in q]
        assert np.allclose(surf.values[:, 0], expected, rtol=1e-12)

    def test_extreme_q_no_overflow(self):
        f2 = np.array([1e-20, 1e20, 5.0])
        surf = fluctuation([SegmentVariances(10, f2)], [-25.0, 25.0])
        assert np.all(np.isfinite(surf.values))
        assert surf.values[0, 0] == pytest.approx(1e-10 * 3 ** (1 / 25), rel=1e-10)
        assert surf.values[1, 0] == pytest.approx(1e10 * 3 ** (-1 / 25), rel=1e-10)

    def test_zero_variance_fatal(self):
        with pytest.raises(DataQualityError):
            fluctuation([SegmentVariances(10, np.array([0.0, 1.0]))], [2.0])

    def test_q_zero_continuity(self, rng):
        f2 = np.asarray(segment_variances(build_profile(rng.standard_normal(4096)), 64, 3).values)
        surf = fluctuation([SegmentVariances(64, f2)], [-1e-4, 0.0, 1e-4])
        lo, mid, hi = surf.values[:, 0]
        assert lo <= mid <= hi
        assert (hi - lo) / mid < 1e-3


class TestConfig:
    def test_default_grid(self):
        q = default_q_grid()
        assert len(q) == 101 and q[0] == -25 and q[-1] == 25 and 0.0 in q and 2.0 in q

    def test_default_scales(self):
        scales = MfdfaConfig().resolved_scales(16384)
        assert scales[0] == 16 and scales[-1] == 4096
        assert np.all(np.diff(scales) > 0) and len(scales) == 20

    def test_few_distinct_scales(self):
        s = log_spaced_scales(16, 20, 20)
        assert s.tolist() == [16, 17, 18, 19, 20]

    @pytest.mark.parametrize("kw", [dict(poly_order=0), dict(scales=(4, 8)),
                                    dict(scales=(16, 16, 32)), dict(variance_floor=0.0),
                                    dict(q_grid=(1.0, float("inf"))), dict(s_min=3)])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            MfdfaConfig(**kw)

    def test_scale_above_quarter(self):
        with pytest.raises(ConfigError):
            MfdfaConfig(scales=(16, 32, 300)).resolved_scales(1000)


def _surface(r, q=(-5.0, -2.0, 0.0, 2.0, 5.0)):
    return fluctuation_surface(r, MfdfaConfig(q_grid=q, s_max=256, n_scales=8))


class TestInvariants:
    @settings(max_examples=40, deadline=None)
    @given(arrays(float, st.integers(256, 1024), elements=st.floats(-1e3, 1e3)))
    def test_monotone_in_q(self, r):
        if np.ptp(r) == 0:
            return
        surf = fluctuation_surface(r, MfdfaConfig(q_grid=tuple(np.arange(-10, 10.5, 0.5)),
                                                  s_max=64, n_scales=5))
        d = np.diff(surf.values, axis=0)
        assert np.all(d >= -1e-12 * surf.values[1:])

    @pytest.mark.parametrize("c", [1e-4, 0.3, 7.0, 1e5])
    def test_scaling_covariance(self, rng, c):
        r = rng.standard_normal(2048)
        a, b = _surface(r), _surface(c * r)
        assert np.allclose(b.values, c * a.values, rtol=1e-10)

    @pytest.mark.parametrize("b", [-3.0, 0.01, 250.0])
    def test_mean_invariance(self, rng, b):
        r = rng.standard_normal(2048)
        assert np.allclose(_surface(r + b).values, _surface(r).values, rtol=1e-10)

    def test_polynomial_annihilation(self, rng):
        r = rng.standard_normal(3000)
        prof = build_profile(r)
        i = np.arange(1, len(r) + 1) / len(r)
        trend = np.polyval(rng.normal(scale=50, size=4), i)
        for s in (16, 50, 128, 750):
            a = segment_variances(prof, s, 3).values
            b = segment_variances(Profile(prof.values + trend, 0.0), s, 3).values
            assert np.max(np.abs(b - a) / a) < 1e-8

    def test_annihilation_conditioning(self, rng):
        # the change is bounded by rounding relative to the segment's own size
        eps = np.finfo(float).eps
        for seed in range(5):
            y = build_profile(gen_binomial_cascade(12, 0.75, seed).returns).values
            x = np.arange(1, len(y) + 1) / len(y)
            z = y + np.polyval(rng.normal(scale=100 * np.std(y), size=4), x)
            for s in (16, 64, 256, 1024):
                a = segment_variances(Profile(y, 0.0), s, 3).values
                b = segment_variances(Profile(z, 0.0), s, 3).values
                n = len(y) // s
                segs = np.concatenate([z[:n * s].reshape(n, s), z[len(z) - n * s:].reshape(n, s)])
                bound = 1e3 * eps * np.max(np.abs(segs), axis=1) / np.sqrt(a)
                assert np.all(np.abs(b - a) / a <= bound)

    def test_segment_count(self):
        for n in (100, 101, 255, 1000):
            for s in (5, 7, 16, 25):
                if n >= 2 * s:
                    sv = segment_variances(build_profile(np.sin(np.arange(n) * 1.3)), s, 3)
                    assert len(sv.values) == 2 * (n // s)
