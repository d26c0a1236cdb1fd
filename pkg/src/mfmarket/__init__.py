"""Multifractal detrended fluctuation analysis and liquidity measures for
exchange price series."""

__version__ = "0.1.0"

from .errors import ConfigError, DataQualityError, IngestError, MfmarketError
from .liquidity import IlliqPoint, amihud_illiq, rolling_illiq
from .mfdfa import (FluctuationSurface, MfdfaConfig, Profile, SegmentVariances,
                    build_profile, fit_local_polynomial, fluctuation, fluctuation_surface,
                    segment_variances)
from .rolling import RollingConfig, RollingTrace, align_traces, rolling_spectrum
from .spectrum import (HurstSpectrum, classify_persistence, fit_spectrum, hurst_spectrum,
                       multifractal_degree)
from .synth import gen_binomial_cascade, gen_fgn, gen_gaussian
from .timeseries import (DailyAggregate, PriceSeries, ReturnSeries, TickRecord, Ticks,
                         daily_aggregates, ingest_ticks, log_returns, resample)
