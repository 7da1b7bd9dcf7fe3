"""Detection rate and false positives of estimated object stixels.

All areas are in original-image pixels: a record covers pixel columns
``x0 .. x0 + width - 1`` and model rows ``vb .. vt``.

* A ground-truth object stixel is detected when more than half of its
  pixels are covered by the union of estimated object stixels.
* An estimated object stixel is a false positive when more than
  ``FP_PIXELS`` of its pixels lie in ground-truth free space, i.e. strictly
  below every ground-truth object in that pixel column. A pixel column
  without ground-truth objects is free over its whole height.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .imageio import StixelRecord
from .model import StixelClass

DETECTION_RATIO = 0.5
FP_PIXELS = 30


class FrameMismatchError(ValueError):
    pass


@dataclass
class EvalReport:
    detection_rate: float
    detected: int
    total_gt: int
    total_false_positives: int
    n_est_objects: int
    frame_fp: dict[str, int] = field(default_factory=dict)

    @property
    def n_frames(self) -> int:
        return len(self.frame_fp)

    @property
    def frames_with_fp(self) -> int:
        return sum(1 for n in self.frame_fp.values() if n > 0)

    @property
    def pct_frames_with_fp(self) -> float:
        return 100.0 * self.frames_with_fp / self.n_frames if self.n_frames else 0.0

    def table(self) -> str:
        rows = [
            ("Detection Rate", f"{100.0 * self.detection_rate:.1f} %"),
            ("% Image Pairs with False Positives", f"{self.pct_frames_with_fp:.2f} %"),
            ("Total number of False Positives", str(self.total_false_positives)),
        ]
        width = max(len(r[0]) for r in rows)
        lines = [f"{name:<{width}}  {value}" for name, value in rows]
        lines.append(f"({self.detected}/{self.total_gt} GT object stixels detected, "
                     f"{self.n_est_objects} estimated object stixels, {self.n_frames} frames)")
        return "\n".join(lines)


def _objects(records) -> list[StixelRecord]:
    return [r for r in records if r.cls == StixelClass.OBJECT]


def is_detected(gt: StixelRecord, est_objects) -> bool:
    covered = np.zeros((gt.height, gt.width), dtype=bool)
    for e in est_objects:
        x0 = max(gt.x0, e.x0)
        x1 = min(gt.x0 + gt.width, e.x0 + e.width)
        v0 = max(gt.vb, e.vb)
        v1 = min(gt.vt, e.vt)
        if x0 < x1 and v0 <= v1:
            covered[v0 - gt.vb : v1 - gt.vb + 1, x0 - gt.x0 : x1 - gt.x0] = True
    # integer form of covered / area > 0.5
    return 2 * int(covered.sum()) > gt.area


def detection_count(gt, est) -> tuple[int, int]:
    """(detected, total) over the object records of ``gt`` for one frame."""
    gt_objects = _objects(gt)
    est_objects = _objects(est)
    return sum(is_detected(g, est_objects) for g in gt_objects), len(gt_objects)


def detection_rate(gt, est) -> float:
    detected, total = detection_count(gt, est)
    return 1.0 if total == 0 else detected / total


def free_space_pixels(e: StixelRecord, gt_objects) -> int:
    """Pixels of ``e`` lying strictly below every GT object in their pixel column."""
    ceiling = np.full(e.width, e.vt + 1, dtype=np.int64)
    for g in gt_objects:
        x0 = max(e.x0, g.x0)
        x1 = min(e.x0 + e.width, g.x0 + g.width)
        if x0 < x1:
            seg = ceiling[x0 - e.x0 : x1 - e.x0]
            np.minimum(seg, g.vb, out=seg)
    return int(np.clip(ceiling - e.vb, 0, None).sum())


def false_positives(gt, est) -> int:
    gt_objects = _objects(gt)
    return sum(free_space_pixels(e, gt_objects) > FP_PIXELS for e in _objects(est))


def _by_frame(records) -> dict[str, list[StixelRecord]]:
    out: dict[str, list[StixelRecord]] = defaultdict(list)
    for r in records:
        out[r.frame].append(r)
    return out


def evaluate(gt_records, est_records, frames=None) -> EvalReport:
    """Score estimates against ground truth frame by frame.

    Frames are those present in ``gt_records`` (or ``frames`` if given);
    a frame without estimates counts as an empty prediction. Estimates for
    unknown frames are an error.
    """
    gt = _by_frame(gt_records)
    est = _by_frame(est_records)
    frame_ids = sorted(set(frames) if frames is not None else set(gt))
    unknown = sorted(set(est) - set(frame_ids))
    if unknown:
        raise FrameMismatchError(f"estimates for frames missing from the ground truth: {', '.join(unknown)}")

    detected = total = n_est = 0
    frame_fp = {}
    for f in frame_ids:
        d, t = detection_count(gt.get(f, []), est.get(f, []))
        detected += d
        total += t
        frame_fp[f] = false_positives(gt.get(f, []), est.get(f, []))
        n_est += len(_objects(est.get(f, [])))
    rate = 1.0 if total == 0 else detected / total
    return EvalReport(rate, detected, total, sum(frame_fp.values()), n_est, frame_fp)
