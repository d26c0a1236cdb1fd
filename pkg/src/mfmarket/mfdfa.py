"""Fluctuation functions of multifractal detrended fluctuation analysis.

Profile, forward and backward segmentation, local polynomial detrending
and the q-th order fluctuation function F_q(s).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataQualityError
from .timeseries import ReturnSeries

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
# residuals this close to the segment's round-off level count as exact zeros
_ROUNDOFF_FACTOR = 64.0


def default_q_grid(q_min: float = -25.0, q_max: float = 25.0, step: float = 0.5) -> np.ndarray:
    if step <= 0 or q_max < q_min:
        raise ConfigError("q grid needs step > 0 and q_max >= q_min")
    n = int(round((q_max - q_min) / step))
    q = q_min + step * np.arange(n + 1)
    q[np.isclose(q, 0.0, atol=1e-12)] = 0.0
    return q


def log_spaced_scales(s_min: int, s_max: int, n_scales: int = 20) -> np.ndarray:
    """Up to ``n_scales`` distinct integers spaced evenly in log between the bounds."""
    if s_max < s_min:
        raise ConfigError(f"largest scale {s_max} is below the smallest scale {s_min}")
    return np.unique(np.round(np.geomspace(s_min, s_max, n_scales)).astype(np.int64))


@dataclass(frozen=True)
class MfdfaConfig:
    poly_order: int = 3
    scales: tuple[int, ...] | None = None
    q_grid: tuple[float, ...] | None = None
    variance_floor: float = 1e-30
    s_min: int = 16
    s_max: int | None = None
    n_scales: int = 20

    def __post_init__(self):
        if int(self.poly_order) < 1:
            raise ConfigError("poly_order must be >= 1")
        if not self.variance_floor > 0:
            raise ConfigError("variance_floor must be positive")
        if self.scales is not None:
            s = np.asarray(self.scales)
            if s.ndim != 1 or len(s) == 0 or np.any(np.diff(s) <= 0):
                raise ConfigError("scales must be a strictly increasing sequence")
            if s[0] < self.poly_order + 2:
                raise ConfigError(
                    f"min(scales)={s[0]} must be >= poly_order + 2 = {self.poly_order + 2}")
        elif self.s_min < self.poly_order + 2:
            raise ConfigError(f"s_min={self.s_min} must be >= poly_order + 2")
        if self.q_grid is not None and not np.all(np.isfinite(self.q_grid)):
            raise ConfigError("q_grid values must be finite")

    def resolved_q(self) -> np.ndarray:
        if self.q_grid is None:
            return default_q_grid()
        return np.asarray(self.q_grid, dtype=float)

    def resolved_scales(self, n: int) -> np.ndarray:
        limit = n // 4
        if self.scales is not None:
            scales = np.asarray(self.scales, dtype=np.int64)
            if scales[-1] > limit:
                raise ConfigError(f"max(scales)={scales[-1]} exceeds N/4={limit} for N={n}")
            return scales
        s_max = limit if self.s_max is None else min(int(self.s_max), limit)
        return log_spaced_scales(int(self.s_min), s_max, int(self.n_scales))


@dataclass(frozen=True)
class Profile:
    values: np.ndarray
    source_mean: float

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SegmentVariances:
    scale: int
    values: np.ndarray
    n_floored: int = 0

    @property
    def n_segments(self) -> int:
        return len(self.values) // 2


@dataclass(frozen=True)
class FluctuationSurface:
    scales: np.ndarray
    q_grid: np.ndarray
    values: np.ndarray  # shape (len(q_grid), len(scales))
    n_floored: tuple[int, ...] = ()
    rejected_scales: tuple[tuple[int, str], ...] = field(default=())


def _as_array(returns) -> np.ndarray:
    if isinstance(returns, ReturnSeries):
        return np.asarray(returns.returns, dtype=float)
    return np.asarray(returns, dtype=float)


def build_profile(returns) -> Profile:
    r = _as_array(returns)
    if r.ndim != 1 or len(r) < 2:
        raise DataQualityError("profile needs at least two returns")
    if not np.all(np.isfinite(r)):
        raise DataQualityError("returns contain non-finite values")
    mean = float(np.mean(r))
    return Profile(np.cumsum(r - mean), mean)


def _scaled_index(n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    return np.linspace(-1.0, 1.0, n)


def fit_local_polynomial(segment: Sequence[float], m: int) -> np.ndarray:
    """Least-squares polynomial coefficients, lowest order first.

    The polynomial is expressed in the segment's local index mapped onto
    ``[-1, 1]``; solved by SVD-based least squares.
    """
    y = np.asarray(segment, dtype=float)
    if len(y) <= m:
        raise DataQualityError(f"segment of length {len(y)} cannot determine an order-{m} fit")
    u = _scaled_index(len(y))
    vander = np.vander(u, m + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(vander, y, rcond=None)
    return coef


def eval_local_polynomial(coef: np.ndarray, n: int) -> np.ndarray:
    return np.polynomial.polynomial.polyval(_scaled_index(n), coef)


@lru_cache(maxsize=512)
def _detrend_basis(s: int, m: int) -> np.ndarray:
    """Orthonormal basis of order-m polynomials on ``s`` points."""
    vander = np.vander(_scaled_index(s), m + 1, increasing=True)
    q, _ = np.linalg.qr(vander)
    q.setflags(write=False)
    return q


def _segments(y: np.ndarray, s: int) -> np.ndarray:
    n = len(y)
    ns = n // s
    forward = y[: ns * s].reshape(ns, s)
    # backward segments, numbered from the end of the profile
    backward = y[n - ns * s:].reshape(ns, s)[::-1]
    return np.concatenate([forward, backward])


def segment_variances(profile: Profile, s: int, m: int = 3,
                      variance_floor: float = 1e-30) -> SegmentVariances:
    y = np.asarray(profile.values if isinstance(profile, Profile) else profile, dtype=float)
    s, m = int(s), int(m)
    n = len(y)
    if s < m + 2:
        raise ConfigError(f"scale {s} is too short for an order-{m} fit")
    if n < 2 * s:
        raise DataQualityError(f"scale {s} rejected: series length {n} < 2s")
    segs = _segments(y, s)
    basis = _detrend_basis(s, m)
    resid = segs - (segs @ basis) @ basis.T
    f2 = np.mean(resid * resid, axis=1)
    noise = (_ROUNDOFF_FACTOR * _EPS) ** 2 * np.mean(segs * segs, axis=1)
    low = (f2 < variance_floor) | (f2 <= noise)
    f2[low] = variance_floor
    return SegmentVariances(s, f2, int(low.sum()))


def _generalized_log_mean(log_f2: np.ndarray, q_grid: np.ndarray) -> np.ndarray:
    """ln F_q for each q, from ln F^2 of all segments at one scale."""
    out = np.empty(len(q_grid))
    n = len(log_f2)
    zero = q_grid == 0
    out[zero] = 0.5 * np.mean(log_f2)
    q = q_grid[~zero]
    if len(q):
        x = np.outer(q / 2.0, log_f2)
        xmax = x.max(axis=1)
        lse = xmax + np.log(np.sum(np.exp(x - xmax[:, None]), axis=1))
        out[~zero] = (lse - np.log(n)) / q
    return out


def fluctuation(seg_vars: Sequence[SegmentVariances], q_grid) -> FluctuationSurface:
    q = np.asarray(q_grid, dtype=float)
    if not np.all(np.isfinite(q)):
        raise ConfigError("q_grid values must be finite")
    values = np.empty((len(q), len(seg_vars)))
    for j, sv in enumerate(seg_vars):
        f2 = np.asarray(sv.values, dtype=float)
        if np.any(~(f2 > 0)):
            raise DataQualityError(f"zero segment variance at scale {sv.scale}; floor it first")
        values[:, j] = np.exp(_generalized_log_mean(np.log(f2), q))
    return FluctuationSurface(
        scales=np.array([sv.scale for sv in seg_vars], dtype=np.int64),
        q_grid=q,
        values=values,
        n_floored=tuple(sv.n_floored for sv in seg_vars),
    )


def fluctuation_surface(returns, cfg: MfdfaConfig | None = None) -> FluctuationSurface:
    """Run profile, segmentation, detrending and averaging for every scale."""
    cfg = cfg or MfdfaConfig()
    profile = build_profile(returns)
    scales = cfg.resolved_scales(len(profile))
    seg_vars = []
    rejected = []
    for s in scales:
        try:
            seg_vars.append(segment_variances(profile, int(s), cfg.poly_order, cfg.variance_floor))
        except DataQualityError as exc:
            logger.warning("%s", exc)
            rejected.append((int(s), str(exc)))
    surface = fluctuation(seg_vars, cfg.resolved_q())
    if any(surface.n_floored):
        logger.warning("%d segment variances clamped to %g", sum(surface.n_floored),
                       cfg.variance_floor)
    return FluctuationSurface(surface.scales, surface.q_grid, surface.values,
                              surface.n_floored, tuple(rejected))
