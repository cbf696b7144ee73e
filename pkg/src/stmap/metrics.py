"""DEM and safety-map quality metrics.

Estimates are compared on the truth grid's geometry (nearest-resample the
estimate first).  "Positive" means safe throughout: precision is the
reliability of predicted-safe cells, recall their coverage of truly safe
cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GaussianGrid, GeoGrid


def rmse(truth: GeoGrid, est: GeoGrid) -> float:
    """Root-mean-square elevation error over commonly valid cells."""
    if not truth.same_geometry(est, tol=1e-9):
        raise ValueError("grids must share geometry (nearest-resample first)")
    both = truth.valid & est.valid
    if not both.any():
        raise ValueError("no overlapping valid cells")
    diff = truth.values[both] - est.values[both]
    return float(np.sqrt(np.mean(diff * diff)))


def nlpd(truth: GeoGrid, est: GaussianGrid) -> float:
    """Mean negative log predictive density of the truth under the estimate.

    Per cell: (z - mu)^2 / (2 sigma^2) + 0.5 * log(2 pi sigma^2).  Raises if
    any evaluated cell has zero variance.
    """
    if not truth.same_geometry(est.mean, tol=1e-9):
        raise ValueError("grids must share geometry (nearest-resample first)")
    both = truth.valid & est.valid
    if not both.any():
        raise ValueError("no overlapping valid cells")
    var = est.variance.values[both]
    if np.any(var <= 0):
        raise ValueError("NLPD needs positive variance on every evaluated cell")
    resid = truth.values[both] - est.mean.values[both]
    return float(np.mean(resid * resid / (2.0 * var) + 0.5 * np.log(2.0 * np.pi * var)))


@dataclass
class PrResult:
    precision: float  # NaN when nothing is predicted safe
    recall: float  # NaN when nothing is truly safe
    true_safe: int
    false_safe: int
    false_unsafe: int
    true_unsafe: int

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "true_safe": self.true_safe,
            "false_safe": self.false_safe,
            "false_unsafe": self.false_unsafe,
            "true_unsafe": self.true_unsafe,
        }


def precision_recall(pred, truth_safe, threshold: float = 0.5, mask=None) -> PrResult:
    """Precision and recall of predicted-safe cells.

    ``pred`` may be a probability raster (binarized at ``threshold``) or a
    boolean raster; ``mask`` restricts evaluation.  Empty denominators give
    NaN rather than 0 so "nothing predicted safe" stays distinguishable.
    """
    pred = np.asarray(pred)
    truth_safe = np.asarray(truth_safe, dtype=bool)
    if pred.shape != truth_safe.shape:
        raise ValueError("prediction and truth shapes differ")
    pred_safe = pred if pred.dtype == bool else pred > threshold
    if mask is None:
        mask = np.ones(pred.shape, dtype=bool)
    ts = int(np.count_nonzero(pred_safe & truth_safe & mask))
    fs = int(np.count_nonzero(pred_safe & ~truth_safe & mask))
    fu = int(np.count_nonzero(~pred_safe & truth_safe & mask))
    tu = int(np.count_nonzero(~pred_safe & ~truth_safe & mask))
    precision = ts / (ts + fs) if ts + fs > 0 else math.nan
    recall = ts / (ts + fu) if ts + fu > 0 else math.nan
    return PrResult(precision, recall, ts, fs, fu, tu)


def hazard_missing_map(truth_safe, pred_prob) -> np.ndarray:
    """Cellwise (true safety) - (estimated safety probability), in [-1, 1]."""
    truth_safe = np.asarray(truth_safe, dtype=np.float64)
    pred_prob = np.asarray(pred_prob, dtype=np.float64)
    if truth_safe.shape != pred_prob.shape:
        raise ValueError("rasters must share geometry")
    return truth_safe - pred_prob


def evaluation_mask(shape: tuple[int, int], cell_size: float, border_radius: float, *extra_valid) -> np.ndarray:
    """Mask excluding a border of width ``border_radius`` (the lander
    footprint radius: detectors cannot evaluate partial footprints there)
    and any cells invalid in the provided masks."""
    nrows, ncols = shape
    b = int(math.ceil(border_radius / cell_size))
    mask = np.zeros(shape, dtype=bool)
    if nrows > 2 * b and ncols > 2 * b:
        mask[b : nrows - b, b : ncols - b] = True
    for extra in extra_valid:
        mask &= np.asarray(extra, dtype=bool)
    return mask
