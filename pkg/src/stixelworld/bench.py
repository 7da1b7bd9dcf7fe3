"""Throughput measurement of the compute pipeline.

Timed stages are column reduction, per-column LUT construction, the DP and
backtracking. File I/O and the pair-cost table (built once per parameter
set) are outside the timed region.
"""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from .costlut import PairCostLut, build_column_luts, build_pair_cost_lut
from .params import StixelParams
from .preprocess import DisparityImage, reduce_and_transpose
from .solver import StixelColumn, Workspace, solve_column, solve_frame
from .synth import SceneSpec, generate, random_boxes

SCALING_HEIGHTS = (128, 256, 512, 1024)
SCALING_COLUMNS = (64, 128, 256, 512)


@dataclass
class LatencyReport:
    samples: np.ndarray  # seconds per frame

    @property
    def median(self) -> float:
        return float(np.median(self.samples))

    @property
    def mad(self) -> float:
        return float(np.median(np.abs(self.samples - self.median)))

    @property
    def fps(self) -> float:
        return 1.0 / self.median if self.median > 0 else float("inf")

    def summary(self) -> str:
        return (f"median {1e3 * self.median:.2f} ms  MAD {1e3 * self.mad:.2f} ms  "
                f"{self.fps:.2f} fps  ({len(self.samples)} runs)")


@dataclass
class ScalingReport:
    sizes: tuple[int, ...]
    seconds: tuple[float, ...]
    exponent: float


def run_pipeline(img: DisparityImage, pair: PairCostLut, params: StixelParams, threads: int = 1) -> list[StixelColumn]:
    cols = reduce_and_transpose(img, params.stixel_width)
    return solve_frame(cols, pair, params, threads)


def time_frames(img: DisparityImage, params: StixelParams, repeat: int = 10, threads: int = 1,
                pair: PairCostLut | None = None) -> LatencyReport:
    """Latency of ``repeat`` runs after one untimed warm-up run."""
    if pair is None:
        pair = build_pair_cost_lut(params.sensor)
    run_pipeline(img, pair, params, threads)
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        run_pipeline(img, pair, params, threads)
        samples.append(time.perf_counter() - t0)
    return LatencyReport(np.asarray(samples))


def fit_exponent(sizes, seconds) -> float:
    """Slope of ``log(seconds)`` against ``log(size)``."""
    slope, _ = np.polyfit(np.log(np.asarray(sizes, dtype=float)), np.log(np.asarray(seconds, dtype=float)), 1)
    return float(slope)


def scene_image(h: int, w: int, stixel_width: int, d_range: int, rng: np.random.Generator) -> DisparityImage:
    """A noisy synthetic road scene of the given size; the timing workload.

    The horizon sits at 70% of the height, one box stands on the ground per
    32 stixel columns and box heights scale with the image.
    """
    base = SceneSpec(width=w, height=h, v_horizon=0.7 * h, noise=0.5, outliers=0.02,
                     d_range=d_range, seed=int(rng.integers(2**31)))
    n_boxes = max(1, w // stixel_width // 32)
    boxes = random_boxes(rng, base, n_boxes, stixel_width, height_range=(max(h // 8, 1), max(h // 3, 1)))
    img, _ = generate(dataclasses.replace(base, boxes=boxes))
    return img


def _elapsed(fn) -> float:
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def _dp_seconds(img: DisparityImage, pair: PairCostLut, params: StixelParams, ws: Workspace) -> float:
    """Summed solve_column time; each column's LUTs are built untimed just before."""
    total = 0.0
    for col in reduce_and_transpose(img, params.stixel_width).data:
        luts = build_column_luts(col, pair, params)
        total += _elapsed(lambda: solve_column(luts, params, ws))
    return total


def scaling_series(params: StixelParams, sizes, axis: str, fixed: int, repeat: int = 5,
                   seed: int = 0, stage: str = "frame") -> ScalingReport:
    """Time per size as image height (``axis="h"``) or column count grows.

    ``fixed`` is the column count for the height series and the height for
    the column series. ``stage="frame"`` times the whole compute pipeline;
    ``stage="dp"`` times only the per-column DP on prebuilt LUTs. Sizes are
    measured round-robin for ``repeat`` rounds after a warm-up round and each
    keeps its best time, so slow drift in machine load hits every size alike
    and interference from other processes is filtered out.
    """
    if axis not in ("h", "cols"):
        raise ValueError("axis must be 'h' or 'cols'")
    if stage not in ("frame", "dp"):
        raise ValueError("stage must be 'frame' or 'dp'")
    pair = build_pair_cost_lut(params.sensor)
    rng = np.random.default_rng(seed)
    s = params.stixel_width
    runs = []
    for n in sizes:
        h, n_cols = (n, fixed) if axis == "h" else (fixed, n)
        img = scene_image(h, n_cols * s, s, params.d_range, rng)
        if stage == "frame":
            runs.append(lambda img=img: _elapsed(lambda: run_pipeline(img, pair, params)))
        else:
            ws = Workspace(h, params)
            runs.append(lambda img=img, ws=ws: _dp_seconds(img, pair, params, ws))
    best = [np.inf] * len(runs)
    for r in range(repeat + 1):
        for i, run in enumerate(runs):
            t = run()
            if r > 0:
                best[i] = min(best[i], t)
    return ScalingReport(tuple(sizes), tuple(best), fit_exponent(sizes, best))
