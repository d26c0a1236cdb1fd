"""Synthetic series with known fractal properties, used as estimator oracles."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .timeseries import ReturnSeries

logger = logging.getLogger(__name__)

KINDS = ("gaussian-noise", "fgn", "binomial-cascade")
DEFAULT_DT = 86400


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    length: int
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "binomial-cascade":
            n = int(self.length)
            if n < 1 or n & (n - 1):
                raise ConfigError("cascade length must be a power of two")

    def generate(self, dt: int = DEFAULT_DT, start: int = 0) -> ReturnSeries:
        if self.kind == "gaussian-noise":
            return gen_gaussian(self.length, self.seed, dt=dt, start=start)
        if self.kind == "fgn":
            return gen_fgn(self.length, self.params["H"], self.seed, dt=dt, start=start)
        k = int(self.length).bit_length() - 1
        return gen_binomial_cascade(k, self.params["a"], self.seed, dt=dt, start=start)


def gen_gaussian(n: int, seed: int, dt: int = DEFAULT_DT, start: int = 0) -> ReturnSeries:
    if n < 64:
        raise ConfigError("gaussian noise needs n >= 64")
    r = _rng(seed).standard_normal(int(n))
    return ReturnSeries(start, dt, r, f"gaussian-noise n={n} seed={seed}")


def fgn_autocovariance(k, H: float) -> np.ndarray:
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * H
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k ** h2 + np.abs(k - 1) ** h2)


def _circulant_eigenvalues(n: int, H: float) -> np.ndarray:
    gamma = fgn_autocovariance(np.arange(n + 1), H)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    return np.fft.fft(row).real


def gen_fgn(n: int, H: float, seed: int, dt: int = DEFAULT_DT, start: int = 0) -> ReturnSeries:
    """Unit-variance fractional Gaussian noise by circulant embedding (Davies-Harte).

    Exact in distribution whenever the embedding's eigenvalues are
    nonnegative. Otherwise the negative ones are clipped to zero, which makes
    the sample approximate; that case is logged and noted in ``source_meta``.
    """
    if not 0.0 < H < 1.0:
        raise ConfigError(f"Hurst parameter must lie in (0, 1), got {H}")
    if n < 256:
        raise ConfigError("fgn needs n >= 256")
    n = int(n)
    lam = _circulant_eigenvalues(n, H)
    meta = f"fgn n={n} H={H} seed={seed}"
    tol = 1e-10 * lam.max()
    if np.any(lam < -tol):
        logger.warning("circulant embedding not nonnegative for n=%d H=%g; "
                       "clipping eigenvalues (approximate sample)", n, H)
        meta += " approximate=clipped-embedding"
    lam = np.clip(lam, 0.0, None)
    m = len(lam)
    rng = _rng(seed)
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    x = np.fft.fft(np.sqrt(lam / m) * z).real[:n]
    return ReturnSeries(start, dt, x, meta)


def cascade_hurst(q, a: float) -> np.ndarray:
    """Generalized Hurst exponents of the binomial cascade.

    ``h(q) = 1/q - ln(a^q + (1-a)^q) / (q ln 2)``, with the q -> 0 limit
    ``-(ln a + ln(1-a)) / (2 ln 2)``.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    out = np.empty_like(q)
    zero = q == 0
    b = 1.0 - a
    out[zero] = -(math.log(a) + math.log(b)) / (2 * math.log(2))
    qq = q[~zero]
    # logaddexp keeps a^q + b^q finite for large |q|
    log_sum = np.logaddexp(qq * math.log(a), qq * math.log(b))
    out[~zero] = 1.0 / qq - log_sum / (qq * math.log(2))
    return out


@dataclass(frozen=True)
class CascadeSeries(ReturnSeries):
    a: float = 0.75
    k: int = 0

    def analytic_hurst(self, q) -> np.ndarray:
        return cascade_hurst(q, self.a)


def gen_binomial_cascade(k: int, a: float, seed: int, total: float = 1.0,
                         dt: int = DEFAULT_DT, start: int = 0) -> CascadeSeries:
    """Binomial multiplicative cascade of length ``2**k``.

    Value ``i`` is ``total`` times a product of k weights, one per level, each
    ``a`` or ``1 - a``. At every level each node hands ``a`` to one child and
    ``1 - a`` to the other; a seeded random bit per node decides which child
    gets ``a``. The multiset of values, and so the analytic h(q), is the same
    for every seed.
    """
    if not 0.5 < a < 1.0:
        raise ConfigError(f"cascade weight must lie in (0.5, 1), got {a}")
    if not 6 <= k <= 24:
        raise ConfigError(f"cascade depth must lie in [6, 24], got {k}")
    rng = _rng(seed)
    values = np.full(1, float(total))
    for _ in range(k):
        flip = rng.integers(0, 2, size=len(values)).astype(bool)
        left = np.where(flip, 1.0 - a, a)
        values = np.column_stack([values * left, values * (1.0 - left)]).ravel()
    return CascadeSeries(start, dt, values, f"binomial-cascade k={k} a={a} seed={seed}",
                         None, a, k)
