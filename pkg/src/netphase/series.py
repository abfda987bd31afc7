"""Uniform sampling of parameter samples and boxcar time averaging."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace
from typing import Iterable, Sequence, TextIO, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .params import ParamId, ParamSample

AGGREGATIONS = ("last", "mean", "mode", "count")
GAP_POLICIES = ("hold_last", "zero")


class EmptyInputError(ValueError):
    pass


class WindowTooLargeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """``values[n]`` is the signal at wall time ``start_time + n * tau``."""

    start_time: float
    tau: float
    values: np.ndarray
    aggregation: str = "last"
    gap_policy: str = "hold_last"
    leading_gap: bool = False
    param: ParamId | None = None
    boxcar: int = 1

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.start_time + self.tau * np.arange(len(self.values))


def _bin_index(times: np.ndarray, start: float, tau: float) -> np.ndarray:
    return np.floor((times - start) / tau).astype(np.int64)


def _aggregate(idx: np.ndarray, vals: np.ndarray, n: int, how: str) -> tuple[np.ndarray, np.ndarray]:
    counts = np.bincount(idx, minlength=n)
    if how == "count":
        return counts.astype(float), counts
    out = np.zeros(n)
    if how == "mean":
        sums = np.bincount(idx, weights=vals, minlength=n)
        np.divide(sums, counts, out=out, where=counts > 0)
    elif how == "last":
        last = np.flatnonzero(np.r_[idx[1:] != idx[:-1], True])
        out[idx[last]] = vals[last]
    elif how == "mode":
        # most frequent value per bin, ties resolved toward the smallest value
        order = np.lexsort((vals, idx))
        bi, bv = idx[order], vals[order]
        starts = np.flatnonzero(np.r_[True, (bi[1:] != bi[:-1]) | (bv[1:] != bv[:-1])])
        run_len = np.diff(np.r_[starts, len(bi)])
        rb, rv = bi[starts], bv[starts]
        pick = np.lexsort((rv, -run_len, rb))
        first = pick[np.r_[True, rb[pick][1:] != rb[pick][:-1]]]
        out[rb[first]] = rv[first]
    else:
        raise ValueError(f"unknown aggregation {how!r}; expected one of {AGGREGATIONS}")
    return out, counts


def bin_values(
    times: Sequence[float] | np.ndarray,
    values: Sequence[float] | np.ndarray,
    tau: float = 5.0,
    aggregation: str = "last",
    gap_policy: str = "hold_last",
    start_time: float | None = None,
    n_bins: int | None = None,
) -> TimeSeries:
    """Array form of :func:`bin_series`.

    Bin ``n`` is the half-open interval ``[start + n*tau, start + (n+1)*tau)``.
    By default ``start`` is the earliest time and the series ends with the bin
    holding the latest time, giving ``floor((t_max - t_min) / tau) + 1`` bins.
    In ``count`` mode an empty bin is a genuine zero and the gap policy does
    not apply.
    """
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"unknown aggregation {aggregation!r}; expected one of {AGGREGATIONS}")
    if gap_policy not in GAP_POLICIES:
        raise ValueError(f"unknown gap policy {gap_policy!r}; expected one of {GAP_POLICIES}")
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("times and values must be 1-d arrays of equal length")
    if t.size == 0:
        raise EmptyInputError("no samples to bin")
    order = np.argsort(t, kind="stable")
    t, v = t[order], v[order]
    start = float(t[0]) if start_time is None else float(start_time)
    idx = _bin_index(t, start, tau)
    if idx[0] < 0:
        raise ValueError(f"sample at t={t[0]} precedes start_time={start}")
    n = int(idx[-1]) + 1 if n_bins is None else int(n_bins)
    if idx[-1] >= n:
        raise ValueError(f"sample at t={t[-1]} falls beyond bin {n - 1}")

    out, counts = _aggregate(idx, v, n, aggregation)
    leading_gap = bool(counts[0] == 0)
    if aggregation != "count":
        empty = counts == 0
        if gap_policy == "hold_last" and empty.any():
            src = np.where(~empty, np.arange(n), -1)
            np.maximum.accumulate(src, out=src)
            out = np.where(src >= 0, out[np.maximum(src, 0)], 0.0)
        elif gap_policy == "zero":
            out[empty] = 0.0
    return TimeSeries(start, float(tau), out, aggregation, gap_policy, leading_gap)


def bin_series(
    samples: Iterable[ParamSample],
    tau: float = 5.0,
    aggregation: str = "last",
    gap_policy: str = "hold_last",
    start_time: float | None = None,
    n_bins: int | None = None,
) -> TimeSeries:
    """Resample the samples of a single parameter onto a uniform grid of step ``tau``."""
    samples = list(samples)
    if not samples:
        raise EmptyInputError("no samples to bin")
    params = {s.param for s in samples}
    if len(params) > 1:
        raise ValueError(f"samples mix parameters {sorted(int(p) for p in params)}")
    ts = bin_values(
        [s.time for s in samples],
        [s.value for s in samples],
        tau,
        aggregation,
        gap_policy,
        start_time,
        n_bins,
    )
    return replace(ts, param=ParamId(params.pop()))


def boxcar_average(series: TimeSeries, w: int) -> TimeSeries:
    """Moving average over ``w`` consecutive samples, valid region only.

    The output has ``N - w + 1`` values; its start time moves to the centre of
    the first window so series averaged at different widths stay aligned.
    """
    if int(w) != w or w < 1:
        raise ValueError(f"window must be a positive integer, got {w}")
    w = int(w)
    n = len(series)
    if w > n:
        raise WindowTooLargeError(f"window {w} exceeds series length {n}")
    if w == 1:
        vals = series.values.copy()
    else:
        vals = sliding_window_view(series.values, w).mean(axis=1)
    return replace(
        series,
        values=vals,
        start_time=series.start_time + (w - 1) * series.tau / 2.0,
        boxcar=series.boxcar * w,
    )


def downsample(series: TimeSeries, factor: int, offset: int = 0) -> TimeSeries:
    """Keep every ``factor``-th sample starting at ``offset``."""
    if factor < 1 or int(factor) != factor:
        raise ValueError(f"factor must be a positive integer, got {factor}")
    if not 0 <= offset < max(len(series), 1):
        raise ValueError(f"offset {offset} out of range")
    factor = int(factor)
    return replace(
        series,
        values=series.values[offset::factor].copy(),
        start_time=series.start_time + offset * series.tau,
        tau=series.tau * factor,
    )


def write_series_csv(target: Union[str, "os.PathLike[str]", TextIO], series: TimeSeries) -> None:
    owned = isinstance(target, (str, os.PathLike))
    f = open(target, "w", newline="") if owned else target
    try:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["index", "time", "value"])
        for i, (t, v) in enumerate(zip(series.times, series.values)):
            w.writerow([i, repr(float(t)), repr(float(v))])
    finally:
        if owned:
            f.close()


def read_series_csv(source: Union[str, "os.PathLike[str]", TextIO], tau: float | None = None) -> TimeSeries:
    """Load an ``index,time,value`` CSV; ``tau`` is inferred from the time column when omitted."""
    owned = isinstance(source, (str, os.PathLike))
    f = open(source, newline="") if owned else source
    try:
        rows = list(csv.DictReader(f))
    finally:
        if owned:
            f.close()
    if not rows:
        raise EmptyInputError("series CSV has no rows")
    times = np.array([float(r["time"]) for r in rows])
    values = np.array([float(r["value"]) for r in rows])
    if tau is None:
        if len(times) < 2:
            raise ValueError("cannot infer tau from a single row; pass tau explicitly")
        tau = float(np.median(np.diff(times)))
        if not math.isfinite(tau) or tau <= 0:
            raise ValueError("time column is not strictly increasing")
    return TimeSeries(float(times[0]), float(tau), values)
