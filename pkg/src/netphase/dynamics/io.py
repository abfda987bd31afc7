"""CSV exchange formats for delay vectors, projections and FNN curves."""

from __future__ import annotations

import csv
import os
from typing import TextIO, Union

import numpy as np

from .embedding import DelayVectors
from .fnn import FnnCurve, FnnPoint

PathOrFile = Union[str, "os.PathLike[str]", TextIO]


def _open(target: PathOrFile, mode: str):
    if isinstance(target, (str, os.PathLike)):
        return open(target, mode, newline=""), True
    return target, False


def write_points_csv(target: PathOrFile, points: DelayVectors | np.ndarray, prefix: str = "y") -> None:
    """One point per row with columns ``y0, y1, ...``."""
    arr = points.vectors if isinstance(points, DelayVectors) else np.asarray(points, dtype=float)
    f, owned = _open(target, "w")
    try:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([f"{prefix}{i}" for i in range(arr.shape[1])])
        for row in arr:
            w.writerow([repr(float(v)) for v in row])
    finally:
        if owned:
            f.close()


def read_points_csv(source: PathOrFile) -> np.ndarray:
    f, owned = _open(source, "r")
    try:
        rows = list(csv.reader(f))
    finally:
        if owned:
            f.close()
    if len(rows) < 2:
        return np.empty((0, max(len(rows[0]) if rows else 0, 0)))
    return np.array([[float(v) for v in r] for r in rows[1:]])


def write_fnn_csv(target: PathOrFile, curve: FnnCurve) -> None:
    f, owned = _open(target, "w")
    try:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["d", "fraction", "neighbors"])
        for p in curve.points:
            w.writerow([p.d, repr(float(p.fraction)), p.neighbors])
    finally:
        if owned:
            f.close()


def read_fnn_csv(source: PathOrFile, T: int = 0) -> FnnCurve:
    f, owned = _open(source, "r")
    try:
        pts = [FnnPoint(int(r["d"]), float(r["fraction"]), int(r["neighbors"])) for r in csv.DictReader(f)]
    finally:
        if owned:
            f.close()
    return FnnCurve(pts, T)
