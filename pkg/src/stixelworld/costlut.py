"""Look-up tables that make any stixel's data cost an O(1) query.

``PairCostLut`` is content independent and built once per parameter set.
``ColumnLuts`` holds the per-column prefix sums; entry ``k`` of every prefix
row is the accumulated cost of rows ``0..k-1``, so a stixel spanning rows
``vb..vt`` costs ``lut[vt + 1] - lut[vb]``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .model import SensorParams, StixelClass, disparity_index, pixel_cost, round_half_up
from .params import StixelParams


@dataclass(frozen=True)
class PairCostLut:
    """``table[m, d]``: object cost of integer measurement ``d`` against mean ``m``."""

    table: np.ndarray
    outlier_cost: float

    @property
    def d_range(self) -> int:
        return self.table.shape[0]

    @cached_property
    def extended(self) -> np.ndarray:
        """Table with an extra last column holding the outlier cost for invalid pixels."""
        d = self.d_range
        ext = np.empty((d, d + 1), dtype=np.float64)
        ext[:, :d] = self.table
        ext[:, d] = self.outlier_cost
        return ext

    def dump(self, path) -> None:
        """Write as two little-endian uint32 dims followed by float64 LE data."""
        rows, cols = self.table.shape
        with open(path, "wb") as fh:
            fh.write(struct.pack("<II", rows, cols))
            fh.write(np.ascontiguousarray(self.table, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path, sensor: SensorParams) -> "PairCostLut":
        raw = Path(path).read_bytes()
        if len(raw) < 8:
            raise ValueError(f"{path}: truncated pair-cost table header")
        rows, cols = struct.unpack_from("<II", raw)
        expected = 8 + 8 * rows * cols
        if len(raw) != expected:
            raise ValueError(f"{path}: expected {expected} bytes for a {rows}x{cols} table, got {len(raw)}")
        if rows != sensor.d_range or cols != sensor.d_range:
            raise ValueError(f"{path}: table is {rows}x{cols}, sensor d_range is {sensor.d_range}")
        table = np.frombuffer(raw, dtype="<f8", offset=8).reshape(rows, cols).astype(np.float64)
        return cls(table, sensor.outlier_cost)


def build_pair_cost_lut(sensor: SensorParams) -> PairCostLut:
    d = np.arange(sensor.d_range, dtype=np.float64)
    table = pixel_cost(d[None, :], d[:, None], StixelClass.OBJECT, sensor)
    return PairCostLut(np.ascontiguousarray(table), sensor.outlier_cost)


def prefix_sum(values) -> np.ndarray:
    """Exclusive-then-total prefix sum along the last axis: ``out[..., 0] == 0``."""
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros(values.shape[:-1] + (values.shape[-1] + 1,), dtype=np.float64)
    np.cumsum(values, axis=-1, out=out[..., 1:])
    return out


@dataclass
class ColumnLuts:
    lut_ground: np.ndarray  # (h + 1,)
    lut_sky: np.ndarray  # (h + 1,)
    # (h + 1, d_range): row k holds the prefix sums of every object
    # disparity up to pixel row k. The DP reads neighbouring disparities of
    # one row far more often than one disparity across rows.
    object_rows: np.ndarray
    disp_prefix: np.ndarray  # (h + 1,)
    valid_count_prefix: np.ndarray  # (h + 1,) int64

    @property
    def height(self) -> int:
        return self.lut_ground.shape[0] - 1

    @property
    def d_range(self) -> int:
        return self.object_rows.shape[1]

    @property
    def lut_object(self) -> np.ndarray:
        """``(d_range, h + 1)`` view: ``lut_object[m]`` is the prefix row of mean ``m``."""
        return self.object_rows.T


def build_column_luts(col, pair: PairCostLut, params: StixelParams) -> ColumnLuts:
    """Prefix-sum tables for one reduced column (model-row order, NaN invalid)."""
    col = np.asarray(col, dtype=np.float64)
    h = col.shape[0]
    if h < 1:
        raise ValueError("column must have at least one row")
    sensor = params.sensor
    valid = ~np.isnan(col)

    ground_f = params.ground.disparity(np.arange(h))
    lut_ground = prefix_sum(pixel_cost(col, ground_f, StixelClass.GROUND, sensor))
    lut_sky = prefix_sum(pixel_cost(col, 0.0, StixelClass.SKY, sensor))

    # Invalid pixels index the extra all-outlier column of the pair table.
    d = pair.d_range
    idx = np.full(h, d, dtype=np.int64)
    idx[valid] = disparity_index(col[valid], d)
    object_rows = np.zeros((h + 1, d), dtype=np.float64)
    np.cumsum(pair.extended.T[idx], axis=0, out=object_rows[1:])

    disp_prefix = prefix_sum(np.where(valid, col, 0.0))
    count_prefix = np.zeros(h + 1, dtype=np.int64)
    np.cumsum(valid, out=count_prefix[1:])
    return ColumnLuts(lut_ground, lut_sky, object_rows, disp_prefix, count_prefix)


def mean_disparity(luts: ColumnLuts, vb: int, vt: int) -> float:
    """Mean of the valid disparities in rows ``vb..vt``; 0 if there are none."""
    n = luts.valid_count_prefix[vt + 1] - luts.valid_count_prefix[vb]
    if n == 0:
        return 0.0
    return float((luts.disp_prefix[vt + 1] - luts.disp_prefix[vb]) / n)


def object_disparity(luts: ColumnLuts, vb: int, vt: int) -> int:
    """Rounded, clamped mean disparity used as the object model of a span."""
    f = round_half_up(mean_disparity(luts, vb, vt))
    return min(max(f, 0), luts.d_range - 1)


def stixel_data_cost(luts: ColumnLuts, cls: StixelClass, vb: int, vt: int) -> float:
    if not 0 <= vb <= vt < luts.height:
        raise IndexError(f"stixel span [{vb}, {vt}] outside column of height {luts.height}")
    if cls == StixelClass.GROUND:
        table = luts.lut_ground
    elif cls == StixelClass.SKY:
        table = luts.lut_sky
    else:
        f = object_disparity(luts, vb, vt)
        return float(luts.object_rows[vt + 1, f] - luts.object_rows[vb, f])
    return float(table[vt + 1] - table[vb])
