"""Exhaustive reference solver for short columns.

Every break pattern and every class assignment is scored with per-pixel
direct summation and the prior functions. No prefix sums, no pair table and
no DP, so it cannot share a bug with the optimized path.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .model import StixelClass, disparity_index, pixel_cost, round_half_up
from .params import StixelParams
from .prior import StixelSummary, first_stixel_cost, transition_cost
from .solver import Stixel

MAX_HEIGHT = 12


@dataclass
class OracleResult:
    cost: float
    stixels: list[Stixel]
    count: int


def candidate_count(h: int) -> int:
    """Number of labelled segmentations of a column of height ``h``."""
    return sum(math.comb(h - 1, n - 1) * 3**n for n in range(1, h + 1))


@lru_cache(maxsize=None)
def _labelings(n: int) -> np.ndarray:
    return np.array(list(itertools.product(range(3), repeat=n)), dtype=np.int64).reshape(-1, n)


def object_mean(col: np.ndarray, vb: int, vt: int, d_range: int) -> int:
    seg = col[vb : vt + 1]
    seg = seg[~np.isnan(seg)]
    if seg.size == 0:
        return 0
    return min(max(round_half_up(seg.sum() / seg.size), 0), d_range - 1)


def direct_data_cost(col: np.ndarray, cls: StixelClass, vb: int, vt: int, params: StixelParams) -> float:
    """Sum of per-pixel costs, computed pixel by pixel."""
    sensor = params.sensor
    total = 0.0
    if cls == StixelClass.OBJECT:
        f = object_mean(col, vb, vt, sensor.d_range)
        for v in range(vb, vt + 1):
            d = col[v]
            d = d if math.isnan(d) else float(disparity_index(d, sensor.d_range))
            total += pixel_cost(d, f, cls, sensor)
    else:
        for v in range(vb, vt + 1):
            f = params.ground.disparity(v) if cls == StixelClass.GROUND else 0.0
            total += pixel_cost(col[v], f, cls, sensor)
    return total


def _summary(col, cls: StixelClass, vb: int, vt: int, params: StixelParams) -> StixelSummary:
    if cls == StixelClass.OBJECT:
        f = float(object_mean(col, vb, vt, params.d_range))
    elif cls == StixelClass.GROUND:
        f = params.ground.disparity(vb)
    else:
        f = 0.0
    return StixelSummary(cls, vb, vt, f)


def score_direct(col, stixels, params: StixelParams) -> float:
    """Total cost of a given segmentation by direct summation."""
    col = np.asarray(col, dtype=np.float64)
    total = 0.0
    below = None
    for s in stixels:
        total += direct_data_cost(col, s.cls, s.vb, s.vt, params)
        cur = _summary(col, s.cls, s.vb, s.vt, params)
        if below is None:
            total += first_stixel_cost(cur, params.prior)
        else:
            total += transition_cost(cur, below, params.ground, params.prior)
        below = cur
    return total


def brute_force_column(col, params: StixelParams) -> OracleResult:
    col = np.asarray(col, dtype=np.float64)
    h = col.shape[0]
    if not 1 <= h <= MAX_HEIGHT:
        raise ValueError(f"brute force supports 1 <= h <= {MAX_HEIGHT}, got {h}")
    classes = list(StixelClass)

    data: dict[tuple[int, int], np.ndarray] = {}
    summaries: dict[tuple[int, int], list[StixelSummary]] = {}
    for vb in range(h):
        for vt in range(vb, h):
            data[vb, vt] = np.array([direct_data_cost(col, c, vb, vt, params) for c in classes])
            summaries[vb, vt] = [_summary(col, c, vb, vt, params) for c in classes]
    first = {
        vt: np.array([first_stixel_cost(s, params.prior) for s in summaries[0, vt]]) for vt in range(h)
    }
    trans: dict[tuple[int, int, int], np.ndarray] = {}

    def pair_costs(vb_low: int, vb_up: int, vt_up: int) -> np.ndarray:
        key = (vb_low, vb_up, vt_up)
        if key not in trans:
            lows = summaries[vb_low, vb_up - 1]
            ups = summaries[vb_up, vt_up]
            trans[key] = np.array(
                [[transition_cost(u, lo, params.ground, params.prior) for u in ups] for lo in lows]
            )
        return trans[key]

    best_cost = math.inf
    best: tuple[list[tuple[int, int]], np.ndarray] | None = None
    count = 0
    for mask in range(1 << (h - 1)):
        cuts = [b + 1 for b in range(h - 1) if mask >> b & 1]
        starts = [0] + cuts
        ends = [c - 1 for c in cuts] + [h - 1]
        spans = list(zip(starts, ends))
        n = len(spans)
        labels = _labelings(n)
        count += labels.shape[0]

        total = first[spans[0][1]][labels[:, 0]].copy()
        for i, span in enumerate(spans):
            total += data[span][labels[:, i]]
            if i:
                t = pair_costs(spans[i - 1][0], span[0], span[1])
                total += t[labels[:, i - 1], labels[:, i]]
        i_min = int(np.argmin(total))
        if total[i_min] < best_cost:
            best_cost = float(total[i_min])
            best = (spans, labels[i_min])

    assert best is not None
    spans, lab = best
    stixels = []
    below = None
    for (vb, vt), c in zip(spans, lab):
        cls = StixelClass(int(c))
        s = summaries[vb, vt][cls]
        cost = data[vb, vt][cls] + (
            first_stixel_cost(s, params.prior)
            if below is None
            else transition_cost(s, below, params.ground, params.prior)
        )
        stixels.append(Stixel(0, vb, vt, cls, s.f, float(cost)))
        below = s
    return OracleResult(best_cost, stixels, count)
