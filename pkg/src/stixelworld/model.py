"""Stixel classes, model constants and the per-pixel sensor cost.

Row convention: ``v`` is a model row counted from the bottom of the image
upward (``v = 0`` is the bottom row). Image storage is top-to-bottom; the
mapping is ``v = h - 1 - r`` for storage row ``r``.

All costs are negative natural-log likelihoods.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

# In-memory marker for a missing disparity measurement.
INVALID = math.nan


class StixelClass(enum.IntEnum):
    """Stixel label. The integer order is used for deterministic tie-breaking."""

    GROUND = 0
    OBJECT = 1
    SKY = 2

    @classmethod
    def parse(cls, name: str) -> "StixelClass":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown stixel class {name!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class GroundModel:
    """Ground plane as seen in disparity space: ``alpha * (v_horizon - v)``."""

    alpha: float = 0.4
    v_horizon: float = 308.0

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ValueError(f"ground slope alpha must be positive, got {self.alpha}")
        if not math.isfinite(self.v_horizon):
            raise ValueError("v_horizon must be finite")

    def disparity(self, v):
        """Ground disparity at row(s) ``v``, clamped at 0 above the horizon."""
        d = self.alpha * (self.v_horizon - np.asarray(v, dtype=np.float64))
        d = np.maximum(d, 0.0)
        return float(d) if d.ndim == 0 else d


@dataclass(frozen=True)
class NoiseModel:
    """Per-class disparity noise, optionally widening linearly with disparity.

    sigma(c, f) = base[c] + slope[c] * f

    Sky defaults to a slightly narrower model than objects. Object costs are
    looked up with the measurement rounded to an integer, which otherwise
    gives an object at disparity 0 a small edge over sky on every row.
    """

    sigma_ground: float = 1.0
    sigma_object: float = 1.0
    sigma_sky: float = 0.8
    slope_ground: float = 0.0
    slope_object: float = 0.0
    slope_sky: float = 0.0

    def __post_init__(self):
        for name in ("sigma_ground", "sigma_object", "sigma_sky"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("slope_ground", "slope_object", "slope_sky"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def base(self, cls: StixelClass) -> float:
        return (self.sigma_ground, self.sigma_object, self.sigma_sky)[cls]

    def slope(self, cls: StixelClass) -> float:
        return (self.slope_ground, self.slope_object, self.slope_sky)[cls]

    def sigma(self, cls: StixelClass, f):
        return self.base(cls) + self.slope(cls) * np.asarray(f, dtype=np.float64)


@dataclass(frozen=True)
class SensorParams:
    """Gaussian + uniform sensor model constants.

    ``p_out`` defaults high because an outlier pixel contaminates the whole
    band average it falls into. A high outlier cap would reward explaining a
    few contaminated rows with a short spurious object.
    """

    p_out: float = 0.7
    d_range: int = 128
    a_norm: float = 1.0
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if not 0.0 < self.p_out < 1.0:
            raise ValueError(f"p_out must lie in (0, 1), got {self.p_out}")
        if int(self.d_range) != self.d_range or self.d_range < 2:
            raise ValueError(f"d_range must be an integer >= 2, got {self.d_range}")
        if not self.a_norm > 0:
            raise ValueError(f"a_norm must be positive, got {self.a_norm}")

    @property
    def outlier_cost(self) -> float:
        """Cost of the uniform branch; the upper bound of every pixel cost."""
        return math.log(self.d_range) - math.log(self.p_out)


def model_disparity(cls: StixelClass, ground: GroundModel, v, f_n: float | None = None):
    """Theoretical disparity of a class model at row ``v``."""
    if cls == StixelClass.GROUND:
        return ground.disparity(v)
    if cls == StixelClass.SKY:
        return 0.0
    if f_n is None:
        raise ValueError("object model needs the stixel mean disparity f_n")
    return float(f_n)


def pixel_cost(d_v, f, cls: StixelClass, sensor: SensorParams):
    """Data cost of measured disparity ``d_v`` against model disparity ``f``.

    Minimum of the outlier (uniform) branch and the Gaussian branch. NaN
    measurements are invalid and cost exactly the outlier branch. Works on
    scalars and broadcasts over arrays.
    """
    d_v = np.asarray(d_v, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    sigma = sensor.noise.sigma(cls, f)
    cap = sensor.outlier_cost
    gauss = (
        math.log(sensor.a_norm)
        + np.log(sigma * math.sqrt(2.0 * math.pi))
        - math.log(1.0 - sensor.p_out)
        + (d_v - f) ** 2 / (2.0 * sigma**2)
    )
    out = np.where(np.isnan(d_v), cap, np.minimum(cap, gauss))
    return float(out) if out.ndim == 0 else out


def round_half_up(x) -> np.ndarray | int:
    """Nearest integer, halves rounded toward +inf."""
    r = np.floor(np.asarray(x, dtype=np.float64) + 0.5)
    return int(r) if r.ndim == 0 else r.astype(np.int64)


def disparity_index(d, d_range: int):
    """Integer disparity bin of a (fractional) measurement, clamped to the table."""
    return np.clip(round_half_up(d), 0, d_range - 1)
