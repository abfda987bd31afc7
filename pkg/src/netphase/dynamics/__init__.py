"""Phase-space reconstruction from a single scalar series."""

from .embedding import (
    DegenerateSeriesError,
    DelayVectors,
    InsufficientDataError,
    autocorrelation,
    autocorrelation_delay,
    embed,
    project,
)
from .fnn import FnnCurve, FnnPoint, FnnResult, estimate_dimension, fnn_curve, fnn_fraction, fnn_test
from .generators import lorenz, sine, uniform_noise
from .io import read_fnn_csv, read_points_csv, write_fnn_csv, write_points_csv
from .occupancy import (
    OccupancyModel,
    fit_occupancy,
    load_occupancy,
    novelty_score,
    novelty_scores,
    save_occupancy,
    score_series,
)

__all__ = [
    "DegenerateSeriesError",
    "DelayVectors",
    "FnnCurve",
    "FnnPoint",
    "FnnResult",
    "InsufficientDataError",
    "OccupancyModel",
    "autocorrelation",
    "autocorrelation_delay",
    "embed",
    "estimate_dimension",
    "fit_occupancy",
    "fnn_curve",
    "fnn_fraction",
    "fnn_test",
    "load_occupancy",
    "lorenz",
    "novelty_score",
    "novelty_scores",
    "project",
    "read_fnn_csv",
    "read_points_csv",
    "save_occupancy",
    "score_series",
    "sine",
    "uniform_noise",
    "write_fnn_csv",
    "write_points_csv",
]
