"""Grid-occupancy baseline of normal trajectories and a deviation score."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import ndimage

from .embedding import DelayVectors, InsufficientDataError, SeriesLike, embed, project

FORMAT_VERSION = 1
MIN_TRAINING_POINTS = 100


@dataclass(frozen=True, eq=False)
class OccupancyModel:
    axes: tuple[int, ...]
    resolution: tuple[int, ...]
    lower: np.ndarray
    upper: np.ndarray
    counts: np.ndarray
    embedding: tuple[int, int] | None = None  # (d, T) of the training vectors

    def __post_init__(self):
        # chessboard distance from each cell to the nearest occupied cell
        dist = ndimage.distance_transform_cdt(self.counts == 0, metric="chessboard")
        object.__setattr__(self, "_distance", dist)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def occupied_fraction(self) -> float:
        return float((self.counts > 0).mean())

    @property
    def cell_width(self) -> np.ndarray:
        span = self.upper - self.lower
        res = np.asarray(self.resolution, dtype=float)
        return np.where(span > 0, span / res, 1.0)

    def cells(self, points: np.ndarray) -> np.ndarray:
        """Cell index of each point, clamped onto the grid."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != len(self.axes):
            raise ValueError(f"points have {pts.shape[1]} coordinates, model expects {len(self.axes)}")
        idx = np.floor((pts - self.lower) / self.cell_width).astype(np.int64)
        return np.clip(idx, 0, np.asarray(self.resolution) - 1)


def fit_occupancy(
    vectors: DelayVectors | np.ndarray,
    axes: Sequence[int] = (0, 1),
    resolution: int | Sequence[int] = 32,
) -> OccupancyModel:
    """Histogram the projected training trajectory on a regular grid.

    Bounds are the per-axis min/max of the projection; a collapsed axis gets
    unit-width cells so identical points all land in cell 0.
    """
    pts = project(vectors, axes)
    if len(pts) < MIN_TRAINING_POINTS:
        raise InsufficientDataError(
            f"occupancy model needs >= {MIN_TRAINING_POINTS} points, got {len(pts)}", MIN_TRAINING_POINTS
        )
    k = pts.shape[1]
    res = (int(resolution),) * k if np.isscalar(resolution) else tuple(int(r) for r in resolution)
    if len(res) != k or min(res) < 2:
        raise ValueError(f"resolution must give >= 2 cells on each of {k} axes, got {res}")
    emb = (vectors.d, vectors.T) if isinstance(vectors, DelayVectors) else None
    shell = OccupancyModel(tuple(int(a) for a in axes), res, pts.min(axis=0), pts.max(axis=0),
                           np.ones(res, dtype=np.int64), emb)
    counts = np.zeros(res, dtype=np.int64)
    np.add.at(counts, tuple(shell.cells(pts).T), 1)
    return OccupancyModel(shell.axes, res, shell.lower, shell.upper, counts, emb)


def novelty_scores(model: OccupancyModel, points: np.ndarray) -> np.ndarray:
    """Chebyshev cell distance from each point's cell to the nearest occupied cell."""
    cells = model.cells(points)
    return model._distance[tuple(cells.T)].astype(np.int64)


def novelty_score(model: OccupancyModel, point: Sequence[float]) -> int:
    pt = np.asarray(point, dtype=float)
    if pt.ndim != 1 or pt.shape[0] != len(model.axes):
        raise ValueError(f"point must have {len(model.axes)} coordinates, got shape {pt.shape}")
    return int(novelty_scores(model, pt[None, :])[0])


def score_series(model: OccupancyModel, series: SeriesLike) -> np.ndarray:
    """Embed a series with the model's training ``(d, T)`` and score every vector."""
    if model.embedding is None:
        raise ValueError("model was fitted on raw points; no embedding to apply")
    d, T = model.embedding
    return novelty_scores(model, project(embed(series, d, T), model.axes))


def save_occupancy(model: OccupancyModel, path: Union[str, "os.PathLike[str]"]) -> None:
    """Write the model as a versioned ``.npz`` archive."""
    emb = np.asarray(model.embedding if model.embedding else (0, 0), dtype=np.int64)
    with open(path, "wb") as f:
        np.savez(
            f,
            version=np.int64(FORMAT_VERSION),
            axes=np.asarray(model.axes, dtype=np.int64),
            resolution=np.asarray(model.resolution, dtype=np.int64),
            lower=model.lower,
            upper=model.upper,
            counts=model.counts,
            embedding=emb,
        )


def load_occupancy(path: Union[str, "os.PathLike[str]"]) -> OccupancyModel:
    with np.load(path, allow_pickle=False) as z:
        version = int(z["version"])
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported occupancy model version {version}")
        emb = tuple(int(v) for v in z["embedding"])
        return OccupancyModel(
            tuple(int(a) for a in z["axes"]),
            tuple(int(r) for r in z["resolution"]),
            z["lower"].astype(float),
            z["upper"].astype(float),
            z["counts"].astype(np.int64),
            emb if emb != (0, 0) else None,
        )
