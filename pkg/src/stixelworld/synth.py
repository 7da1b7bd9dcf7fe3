"""Synthetic road scenes with exact ground truth.

A scene is a ground plane below the horizon, sky (zero disparity) above it
and fronto-parallel boxes of constant disparity drawn over both. Where boxes
overlap the nearer one (larger disparity) wins. Rows are model rows
(0 = bottom of the image).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imageio import StixelRecord
from .model import GroundModel, StixelClass
from .preprocess import DisparityImage

GROUND_LABEL = -1
SKY_LABEL = -2


@dataclass(frozen=True)
class Box:
    x0: int  # first pixel column
    x1: int  # one past the last pixel column
    base: int  # lowest model row
    height: int  # rows
    disparity: float

    def __post_init__(self):
        if self.x1 <= self.x0 or self.height < 1 or self.base < 0:
            raise ValueError(f"degenerate box {self}")

    @classmethod
    def parse(cls, text: str) -> "Box":
        """``x0,x1,base,height,disparity``"""
        parts = text.split(",")
        if len(parts) != 5:
            raise ValueError(f"box {text!r}: expected x0,x1,base,height,disparity")
        x0, x1, base, height = (int(p) for p in parts[:4])
        return cls(x0, x1, base, height, float(parts[4]))


@dataclass(frozen=True)
class SceneSpec:
    width: int = 1024
    height: int = 440
    alpha: float = 0.4
    v_horizon: float = 308.0
    boxes: tuple[Box, ...] = field(default_factory=tuple)
    noise: float = 0.0
    outliers: float = 0.0
    invalid: float = 0.0
    seed: int = 0
    d_range: int = 128
    scale: float = 256.0

    @property
    def ground(self) -> GroundModel:
        return GroundModel(self.alpha, self.v_horizon)


def standing_base(ground: GroundModel, disparity: float) -> int:
    """Model row where a box of this disparity touches the ground."""
    return max(int(round(ground.v_horizon - disparity / ground.alpha)), 0)


def random_boxes(rng: np.random.Generator, spec: SceneSpec, n: int, stixel_width: int,
                 disparity_range=(10.0, 60.0), width_range=(40, 160), height_range=(30, 120)) -> tuple[Box, ...]:
    """``n`` boxes standing on the ground in disjoint, band-aligned column ranges."""
    ground = spec.ground
    n_bands = spec.width // stixel_width
    slot = n_bands // n
    if slot < 2:
        raise ValueError("image too narrow for that many boxes")
    boxes = []
    for i in range(n):
        bw = int(rng.integers(width_range[0], width_range[1] + 1)) // stixel_width
        bw = min(max(bw, 1), slot - 1)
        start = i * slot + int(rng.integers(0, slot - bw + 1))
        d = float(rng.integers(int(disparity_range[0]), int(disparity_range[1]) + 1))
        base = standing_base(ground, d)
        height = int(rng.integers(height_range[0], height_range[1] + 1))
        height = max(1, min(height, spec.height - base))
        boxes.append(Box(start * stixel_width, (start + bw) * stixel_width, base, height, d))
    return tuple(boxes)


def render(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """Noise-free disparity (top row first) and per-pixel surface labels."""
    h, w = spec.height, spec.width
    v = np.arange(h - 1, -1, -1, dtype=np.float64)  # model row of each storage row
    below = v < spec.v_horizon
    disp = np.repeat(np.where(below, spec.ground.disparity(v), 0.0)[:, None], w, axis=1)
    labels = np.repeat(np.where(below, GROUND_LABEL, SKY_LABEL)[:, None], w, axis=1)
    # far boxes first so nearer ones overwrite them
    for i in sorted(range(len(spec.boxes)), key=lambda i: spec.boxes[i].disparity):
        b = spec.boxes[i]
        rows = (v >= b.base) & (v < b.base + b.height)
        x0, x1 = max(b.x0, 0), min(b.x1, w)
        disp[rows, x0:x1] = b.disparity
        labels[rows, x0:x1] = i
    return disp, labels


def generate(spec: SceneSpec) -> tuple[DisparityImage, np.ndarray]:
    """Render, perturb and quantize a scene. Byte-reproducible for a given seed."""
    rng = np.random.default_rng(spec.seed)
    disp, labels = render(spec)
    h, w = disp.shape
    if spec.noise > 0:
        disp = disp + rng.normal(0.0, spec.noise, size=(h, w))
    out_mask = rng.random((h, w)) < spec.outliers
    disp[out_mask] = rng.uniform(0.0, spec.d_range - 1, size=int(out_mask.sum()))
    disp = np.clip(disp, 0.0, spec.d_range - 1)
    disp = np.rint(disp * spec.scale) / spec.scale
    disp[rng.random((h, w)) < spec.invalid] = np.nan
    return DisparityImage(disp, spec.d_range), labels


def ground_truth(spec: SceneSpec, labels: np.ndarray, stixel_width: int, frame: str) -> list[StixelRecord]:
    """One record per run of equal labels in each ``stixel_width`` band.

    A band row takes the label held by most of its pixels; ties go to the
    nearer surface.
    """
    h, w = labels.shape
    n_bands = w // stixel_width
    bands = labels[:, : n_bands * stixel_width].reshape(h, n_bands, stixel_width)
    # candidate labels ordered nearest first so argmax breaks ties toward them
    order = sorted(range(len(spec.boxes)), key=lambda i: -spec.boxes[i].disparity) + [GROUND_LABEL, SKY_LABEL]
    counts = np.stack([(bands == lab).sum(axis=2) for lab in order])
    band_labels = np.asarray(order)[counts.argmax(axis=0)]  # (h, n_bands), top row first
    band_labels = band_labels[::-1]  # model rows

    ground = spec.ground
    out = []
    for c in range(n_bands):
        col = band_labels[:, c]
        starts = np.flatnonzero(np.diff(col, prepend=col[0] - 1))
        ends = np.append(starts[1:] - 1, h - 1)
        for vb, vt in zip(starts, ends):
            lab = int(col[vb])
            if lab == GROUND_LABEL:
                cls, f = StixelClass.GROUND, ground.disparity(int(vb))
            elif lab == SKY_LABEL:
                cls, f = StixelClass.SKY, 0.0
            else:
                cls, f = StixelClass.OBJECT, spec.boxes[lab].disparity
            out.append(StixelRecord(frame, c, c * stixel_width, stixel_width, int(vb), int(vt), cls, float(f), 0.0))
    return out
