"""Column reduction fused with the transpose into column-major layout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DisparityImage:
    """Dense disparity map.

    ``data`` has shape ``(h, w)`` and is stored top row first. Invalid
    measurements are NaN. Valid values lie in ``[0, d_range)``.
    """

    data: np.ndarray
    d_range: int = 128

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or 0 in self.data.shape:
            raise ValueError(f"disparity image must be a non-empty 2D grid, got shape {self.data.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class ColumnImage:
    """Reduced image, one row of ``data`` per stixel column.

    ``data[c, v]`` is indexed by model row ``v`` (0 = bottom of the image),
    so each column is a contiguous run of ``h`` float64 cells.
    """

    data: np.ndarray
    stixel_width: int

    @property
    def n_cols(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]


def reduce_and_transpose(img: DisparityImage, s: int) -> ColumnImage:
    """Average each band of ``s`` pixels per row and emit the bands as columns.

    Only valid pixels are averaged; a band row without valid pixels stays
    invalid. The trailing ``w mod s`` pixels are dropped.
    """
    if s < 1:
        raise ValueError(f"stixel width must be >= 1, got {s}")
    h, w = img.data.shape
    n_cols = w // s
    if n_cols == 0:
        raise ValueError(f"image width {w} is smaller than the stixel width {s}")

    bands = img.data[:, : n_cols * s].reshape(h, n_cols, s)
    valid = ~np.isnan(bands)
    count = valid.sum(axis=2)
    zeroed = np.where(valid, bands, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = zeroed.sum(axis=2) / count
    # Keep the mean inside [min, max] of its inputs despite summation round-off.
    lo = np.where(valid, bands, np.inf).min(axis=2)
    hi = np.where(valid, bands, -np.inf).max(axis=2)
    mean = np.where(count > 0, np.clip(mean, lo, hi), np.nan)

    # (h, n_cols) top-first -> (n_cols, h) bottom-first
    out = np.ascontiguousarray(mean[::-1].T)
    return ColumnImage(out, s)
