from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ..series import TimeSeries

SeriesLike = Union[TimeSeries, Sequence[float], np.ndarray]


class InsufficientDataError(ValueError):
    def __init__(self, message: str, minimum: int | None = None):
        super().__init__(message)
        self.minimum = minimum


class DegenerateSeriesError(ValueError):
    pass


def as_array(series: SeriesLike) -> np.ndarray:
    values = series.values if isinstance(series, TimeSeries) else series
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError("expected a one-dimensional series")
    return arr


def _check_positive_int(name: str, value: int) -> int:
    if int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value}")
    return int(value)


@dataclass(frozen=True, eq=False)
class DelayVectors:
    """Row ``n`` is ``[s(n), s(n+T), ..., s(n+(d-1)T)]``."""

    d: int
    T: int
    vectors: np.ndarray

    def __len__(self) -> int:
        return len(self.vectors)


def embed(series: SeriesLike, d: int, T: int) -> DelayVectors:
    s = as_array(series)
    d = _check_positive_int("d", d)
    T = _check_positive_int("T", T)
    need = T * (d - 1) + 1
    if len(s) < need:
        raise InsufficientDataError(
            f"embedding with d={d}, T={T} needs a series of length >= {need}, got {len(s)}", need
        )
    count = len(s) - T * (d - 1)
    idx = np.arange(count)[:, None] + T * np.arange(d)[None, :]
    return DelayVectors(d, T, s[idx])


def project(vectors: DelayVectors | np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Select 2 or 3 delay coordinates of every vector, preserving order."""
    pts = vectors.vectors if isinstance(vectors, DelayVectors) else np.asarray(vectors, dtype=float)
    if pts.ndim != 2:
        raise ValueError("expected a 2-d array of vectors")
    axes = tuple(int(a) for a in axes)
    if len(axes) not in (2, 3):
        raise ValueError(f"projection needs 2 or 3 axes, got {len(axes)}")
    for a in axes:
        if not 0 <= a < pts.shape[1]:
            raise IndexError(f"axis {a} out of range for {pts.shape[1]}-dimensional vectors")
    return pts[:, axes].copy()


def autocorrelation(series: SeriesLike, max_lag: int | None = None) -> np.ndarray:
    """Normalised (biased) autocorrelation for lags ``0..max_lag``."""
    x = as_array(series)
    x = x - x.mean()
    n = len(x)
    denom = float(np.dot(x, x))
    if denom == 0.0:
        raise DegenerateSeriesError("zero-variance series has no autocorrelation")
    max_lag = n - 1 if max_lag is None else min(int(max_lag), n - 1)
    size = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(x, size)
    ac = np.fft.irfft(spec * np.conj(spec), size)[: max_lag + 1]
    return ac / denom


def autocorrelation_delay(series: SeriesLike, max_lag: int | None = None) -> int:
    """Lag of the first local minimum of the autocorrelation function.

    Falls back to the first non-positive lag, then to 1, for series whose
    autocorrelation never turns upward.
    """
    x = as_array(series)
    max_lag = len(x) // 2 if max_lag is None else max_lag
    ac = autocorrelation(x, max_lag + 1)
    for k in range(1, len(ac) - 1):
        if ac[k] < ac[k - 1] and ac[k] <= ac[k + 1]:
            return k
    nonpos = np.flatnonzero(ac[1:] <= 0)
    return int(nonpos[0]) + 1 if nonpos.size else 1
