"""2-D score grids and the resampling they share.

Resizing is corner-aligned bilinear everywhere: output sample i maps to
source coordinate i * (n_in - 1) / (n_out - 1), and single-row/column axes
collapse to coordinate 0. The choice is frozen by a golden test; changing it
invalidates committed fixtures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

__all__ = ["AnomalyMap", "resize_bilinear", "smooth"]


@dataclass(frozen=True)
class AnomalyMap:
    """Per-position abnormality scores; unbounded scale, finite and >= 0."""

    scores: np.ndarray  # (height, width) float64
    origin: str

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 2 or s.size == 0:
            raise ValueError(f"anomaly map must be a non-empty 2-D grid, got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("anomaly map contains non-finite scores")
        if np.any(s < 0):
            raise ValueError("anomaly map contains negative scores")
        s = s.copy()
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    @property
    def height(self) -> int:
        return self.scores.shape[0]

    @property
    def width(self) -> int:
        return self.scores.shape[1]


def _axis_coords(n_in: int, n_out: int) -> np.ndarray:
    if n_out == 1 or n_in == 1:
        return np.zeros(n_out, dtype=np.float64)
    return np.arange(n_out, dtype=np.float64) * (n_in - 1) / (n_out - 1)


def resize_bilinear(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resample of a 2-D grid to (out_h, out_w)."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ValueError(f"expected 2-D grid, got shape {grid.shape}")
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be >= 1 in both axes")
    h, w = grid.shape
    if (h, w) == (out_h, out_w):
        return grid.copy()
    ry = _axis_coords(h, out_h)
    rx = _axis_coords(w, out_w)
    y0 = np.floor(ry).astype(np.intp)
    x0 = np.floor(rx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ry - y0)[:, None]
    wx = (rx - x0)[None, :]
    top = grid[np.ix_(y0, x0)] * (1 - wx) + grid[np.ix_(y0, x1)] * wx
    bot = grid[np.ix_(y1, x0)] * (1 - wx) + grid[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def smooth(scores: np.ndarray, sigma: float) -> np.ndarray:
    """Optional Gaussian blur; sigma 0 is the identity."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.asarray(scores, dtype=np.float64)
    out = gaussian_filter(np.asarray(scores, dtype=np.float64), sigma=sigma, mode="nearest")
    return np.maximum(out, 0.0)
