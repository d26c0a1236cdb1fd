"""Generalized Hurst exponents from log-log fits of F_q(s)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataQualityError
from .mfdfa import FluctuationSurface, MfdfaConfig, fluctuation_surface

MIN_SCALES = 5
EFFICIENCY_BAND = 0.05

ANTI_PERSISTENT = "anti-persistent"
EFFICIENT = "consistent-with-efficient"
PERSISTENT = "persistent"


@dataclass(frozen=True)
class HurstSpectrum:
    q_grid: np.ndarray
    h: np.ndarray
    stderr: np.ndarray
    r2: np.ndarray
    delta_h: float
    scale_range_used: tuple[int, int]

    def at(self, q: float) -> float:
        idx = np.flatnonzero(np.isclose(self.q_grid, q, rtol=0, atol=1e-12))
        if len(idx) == 0:
            raise KeyError(f"q={q} is not on the spectrum's grid")
        return float(self.h[idx[0]])

    @property
    def h2(self) -> float:
        return self.at(2.0)


def _ols_slopes(x: np.ndarray, ys: np.ndarray):
    """Row-wise OLS of ``ys[k]`` on ``x``: slope, slope stderr, r2."""
    n = len(x)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    yc = ys - ys.mean(axis=1, keepdims=True)
    slope = (yc @ xc) / sxx
    resid = yc - np.outer(slope, xc)
    ssr = np.sum(resid * resid, axis=1)
    sst = np.sum(yc * yc, axis=1)
    stderr = np.sqrt(ssr / (n - 2) / sxx)
    with np.errstate(invalid="ignore", divide="ignore"):
        r2 = np.where(sst > 0, 1.0 - ssr / sst, 1.0)
    return slope, stderr, np.clip(r2, 0.0, 1.0)


def fit_spectrum(surface: FluctuationSurface) -> HurstSpectrum:
    scales = np.asarray(surface.scales)
    if len(scales) < MIN_SCALES:
        raise DataQualityError(
            f"only {len(scales)} usable scales; at least {MIN_SCALES} are needed for a slope")
    values = np.asarray(surface.values, dtype=float)
    if np.any(~(values > 0)) or not np.all(np.isfinite(values)):
        raise DataQualityError("fluctuation values must be finite and positive")
    q = np.asarray(surface.q_grid, dtype=float)
    h, stderr, r2 = _ols_slopes(np.log(scales.astype(float)), np.log(values))
    delta = float(h[np.argmin(q)] - h[np.argmax(q)])
    return HurstSpectrum(q, h, stderr, r2, delta, (int(scales[0]), int(scales[-1])))


def multifractal_degree(spectrum: HurstSpectrum, q_min: float | None = None,
                        q_max: float | None = None) -> float:
    """h at the smallest q minus h at the largest q.

    ``q_min``/``q_max`` restrict the range to values on the stored grid.
    """
    if q_min is None and q_max is None:
        q = spectrum.q_grid
        return float(spectrum.h[np.argmin(q)] - spectrum.h[np.argmax(q)])
    lo = spectrum.at(float(np.min(spectrum.q_grid)) if q_min is None else q_min)
    hi = spectrum.at(float(np.max(spectrum.q_grid)) if q_max is None else q_max)
    return lo - hi


def classify_persistence(h2: float, band: float = EFFICIENCY_BAND) -> str:
    if band < 0:
        raise ConfigError("band must be non-negative")
    if h2 < 0.5 - band:
        return ANTI_PERSISTENT
    if h2 > 0.5 + band:
        return PERSISTENT
    return EFFICIENT


def hurst_spectrum(returns, cfg: MfdfaConfig | None = None) -> HurstSpectrum:
    """Full MF-DFA: fluctuation surface followed by the scaling fit."""
    return fit_spectrum(fluctuation_surface(returns, cfg))


def summary(spectrum: HurstSpectrum, band: float = EFFICIENCY_BAND) -> dict:
    h2 = spectrum.h2 if np.any(np.isclose(spectrum.q_grid, 2.0, atol=1e-12)) else None
    return {
        "h2": h2,
        "delta_h": spectrum.delta_h,
        "classification": None if h2 is None else classify_persistence(h2, band),
        "scale_range_used": list(spectrum.scale_range_used),
    }
