"""False-nearest-neighbour estimation of the embedding dimension.

For every delay vector in ``d`` dimensions the nearest other vector (outside
a Theiler window) is found; the pair is *false* when adding the ``(d+1)``-th
delay coordinate separates them by more than ``r_tol`` times their distance,
or when their ``(d+1)``-dimensional distance exceeds ``a_tol`` standard
deviations of the series.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .embedding import (
    DegenerateSeriesError,
    InsufficientDataError,
    SeriesLike,
    as_array,
    autocorrelation_delay,
)

MIN_POINTS = 10
BRUTE_FORCE_LIMIT = 2000


def _sqdist(query: np.ndarray, others: np.ndarray) -> np.ndarray:
    # Shared by both neighbour searches so their distances agree bit for bit.
    return ((query - others) ** 2).sum(axis=-1)


def nearest_brute(Y: np.ndarray, theiler: int, chunk: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """O(M^2) nearest neighbours; ties go to the smaller index.

    Returns ``(index, squared_distance)`` with index ``-1`` where every other
    point lies inside the Theiler window.
    """
    M = len(Y)
    if chunk is None:
        chunk = max(1, min(M, 4_000_000 // max(M * Y.shape[1], 1)))
    nbr = np.full(M, -1, dtype=np.int64)
    d2 = np.full(M, np.inf)
    cols = np.arange(M)
    for lo in range(0, M, chunk):
        rows = np.arange(lo, min(lo + chunk, M))
        D = _sqdist(Y[rows, None, :], Y[None, :, :])
        D[np.abs(rows[:, None] - cols[None, :]) <= theiler] = np.inf
        j = np.argmin(D, axis=1)
        best = D[np.arange(len(rows)), j]
        ok = np.isfinite(best)
        nbr[rows[ok]] = j[ok]
        d2[rows[ok]] = best[ok]
    return nbr, d2


def nearest_kdtree(Y: np.ndarray, theiler: int) -> tuple[np.ndarray, np.ndarray]:
    """Same contract as :func:`nearest_brute`, accelerated with a k-d tree."""
    M = len(Y)
    tree = cKDTree(Y)
    k = min(M, 2 * theiler + 2)
    dist, idx = tree.query(Y, k=k, workers=-1)
    if k == 1:
        dist, idx = dist[:, None], idx[:, None]
    rows = np.arange(M)
    cand_d2 = _sqdist(Y[:, None, :], Y[idx])
    cand_d2[np.abs(idx - rows[:, None]) <= theiler] = np.inf
    best = cand_d2.min(axis=1)
    # among equal minima take the smallest index
    tied = cand_d2 == best[:, None]
    j = np.where(tied, idx, np.iinfo(np.int64).max).min(axis=1)
    nbr = np.where(np.isfinite(best), j, -1)

    if k < M:
        # a point not returned by the query could tie with or (through
        # rounding) beat the best candidate; resolve those rows exactly
        kth = dist[:, -1] ** 2
        risky = np.flatnonzero(~np.isfinite(best) | (best >= kth * (1 - 1e-9)))
        for n in risky:
            radius = np.sqrt(best[n]) if np.isfinite(best[n]) else np.inf
            if np.isfinite(radius):
                cands = np.asarray(tree.query_ball_point(Y[n], radius * (1 + 1e-9) + 1e-300), dtype=np.int64)
            else:
                cands = np.arange(M)
            cands = cands[np.abs(cands - n) > theiler]
            if cands.size == 0:
                nbr[n], best[n] = -1, np.inf
                continue
            cd2 = _sqdist(Y[n], Y[cands])
            m = cd2.min()
            nbr[n] = cands[cd2 == m].min()
            best[n] = m
    best = np.where(nbr >= 0, best, np.inf)
    return nbr.astype(np.int64), best


@dataclass(frozen=True, eq=False)
class FnnResult:
    d: int
    T: int
    theiler: int
    neighbor: np.ndarray  # -1 where no admissible neighbour exists
    distance: np.ndarray  # d-dimensional neighbour distance R_d
    is_false: np.ndarray  # verdict for tested points
    tested: np.ndarray  # boolean mask

    @property
    def tested_count(self) -> int:
        return int(self.tested.sum())

    @property
    def fraction(self) -> float:
        return float(self.is_false[self.tested].sum()) / self.tested_count


def fnn_test(
    series: SeriesLike,
    d: int,
    T: int,
    r_tol: float = 15.0,
    a_tol: float = 2.0,
    theiler: int | None = None,
    method: str = "auto",
) -> FnnResult:
    """Run the false-neighbour test at dimension ``d`` and keep every verdict.

    ``method`` is ``"kdtree"``, ``"brute"`` or ``"auto"`` (k-d tree above
    2000 points).  Both return identical neighbours and verdicts.
    """
    s = as_array(series)
    if int(d) != d or d < 1 or int(T) != T or T < 1:
        raise ValueError(f"d and T must be positive integers, got d={d}, T={T}")
    d, T = int(d), int(T)
    theiler = T if theiler is None else int(theiler)
    A = float(np.std(s))
    if not A > 0:
        raise DegenerateSeriesError("series has zero variance")
    M = len(s) - d * T
    if M < MIN_POINTS:
        raise InsufficientDataError(
            f"only {max(M, 0)} points embeddable at d={d}+1 with T={T}; need {MIN_POINTS}",
            MIN_POINTS + d * T,
        )
    Y = s[np.arange(M)[:, None] + T * np.arange(d)[None, :]]
    if method == "auto":
        method = "kdtree" if M > BRUTE_FORCE_LIMIT else "brute"
    if method == "brute":
        nbr, d2 = nearest_brute(Y, theiler)
    elif method == "kdtree":
        nbr, d2 = nearest_kdtree(Y, theiler)
    else:
        raise ValueError(f"unknown neighbour search {method!r}")

    tested = nbr >= 0
    if not tested.any():
        raise InsufficientDataError(f"no admissible neighbours at d={d} (Theiler window {theiler})")
    n = np.flatnonzero(tested)
    m = nbr[tested]
    R = np.sqrt(d2[tested])
    gap = np.abs(s[n + d * T] - s[m + d * T])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(R > 0, gap / R, np.where(gap > 0, np.inf, 0.0))
    lifted = np.sqrt(d2[tested] + gap**2)
    verdict = np.zeros(M, dtype=bool)
    verdict[n] = (ratio > r_tol) | (lifted / A > a_tol)
    return FnnResult(d, T, theiler, nbr, np.sqrt(d2), verdict, tested)


def fnn_fraction(
    series: SeriesLike,
    d: int,
    T: int,
    r_tol: float = 15.0,
    a_tol: float = 2.0,
    theiler: int | None = None,
    method: str = "auto",
) -> float:
    """Fraction of false nearest neighbours at embedding dimension ``d``."""
    return fnn_test(series, d, T, r_tol, a_tol, theiler, method).fraction


@dataclass(frozen=True)
class FnnPoint:
    d: int
    fraction: float
    neighbors: int


@dataclass
class FnnCurve:
    points: list[FnnPoint]
    T: int
    skipped: list[tuple[int, str]] = field(default_factory=list)

    @property
    def dimensions(self) -> list[int]:
        return [p.d for p in self.points]

    @property
    def fractions(self) -> list[float]:
        return [p.fraction for p in self.points]


def fnn_curve(
    series: SeriesLike,
    d_max: int = 10,
    T: int | None = None,
    r_tol: float = 15.0,
    a_tol: float = 2.0,
    theiler: int | None = None,
    method: str = "auto",
) -> FnnCurve:
    """Evaluate the false-neighbour fraction for ``d = 1..d_max``.

    ``T`` defaults to the first autocorrelation minimum.  Dimensions that run
    out of data are listed in ``skipped`` (and warned about) instead of
    raising; a zero-variance series still raises.
    """
    if d_max < 1:
        raise ValueError("d_max must be >= 1")
    s = as_array(series)
    if T is None:
        T = autocorrelation_delay(s)
    curve = FnnCurve([], int(T))
    for d in range(1, int(d_max) + 1):
        try:
            res = fnn_test(s, d, T, r_tol, a_tol, theiler, method)
        except InsufficientDataError as exc:
            curve.skipped.append((d, str(exc)))
            warnings.warn(f"FNN at d={d} skipped: {exc}", RuntimeWarning, stacklevel=2)
            continue
        curve.points.append(FnnPoint(d, res.fraction, res.tested_count))
    return curve


def estimate_dimension(curve: FnnCurve | Sequence[float] | Iterable[FnnPoint], threshold: float = 0.05) -> int | None:
    """Smallest dimension whose false-neighbour fraction is at most ``threshold``.

    A bare sequence of fractions is taken to start at ``d = 1``.
    """
    if isinstance(curve, FnnCurve):
        pairs = [(p.d, p.fraction) for p in curve.points]
    else:
        items = list(curve)
        if items and isinstance(items[0], FnnPoint):
            pairs = [(p.d, p.fraction) for p in items]
        else:
            pairs = list(enumerate((float(f) for f in items), start=1))
    if not pairs:
        raise ValueError("empty FNN curve")
    for d, f in pairs:
        if f <= threshold:
            return d
    return None
