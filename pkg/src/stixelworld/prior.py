"""World-model prior: first-stixel and pairwise transition costs.

The five constraints are encoded as follows:

* model complexity: every stixel pays ``c_bic``;
* staggering: ground directly above sky, and ground/ground or sky/sky
  adjacency, are forbidden (cost ``inf``);
* ordering: an object above another object should be farther away;
  disparity in excess of ``lower.f + ordering_margin`` costs
  ``c_ordering`` per unit;
* gravity: an object may not rest on sky; an object above ground that is
  nearer than the ground at its base (beyond the margin) costs
  ``c_gravity`` per unit;
* diving: an object above ground that is farther than the ground at its
  base (beyond the margin) costs ``c_diving`` per unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import GroundModel, StixelClass

INF = math.inf

G, O, S = StixelClass.GROUND, StixelClass.OBJECT, StixelClass.SKY


@dataclass(frozen=True)
class PriorParams:
    c_bic: float = 4.0
    c_gravity: float = 1.0
    c_ordering: float = 1.0
    c_diving: float = 1.0
    ordering_margin: float = 1.0
    first_ground: float = 0.0
    first_object: float = 2.0
    first_sky: float = INF

    def __post_init__(self):
        for name in ("c_gravity", "c_ordering", "c_diving", "first_ground", "first_object", "first_sky"):
            value = getattr(self, name)
            if math.isnan(value) or value < 0:
                raise ValueError(f"{name} must be >= 0 (inf allowed), got {value}")
        if not (math.isfinite(self.c_bic) and self.c_bic >= 0):
            raise ValueError(f"c_bic must be finite and >= 0, got {self.c_bic}")
        if not (math.isfinite(self.ordering_margin) and self.ordering_margin >= 0):
            raise ValueError(f"ordering_margin must be finite and >= 0, got {self.ordering_margin}")
        if not math.isfinite(self.first_ground):
            # A column must always admit the single-ground-stixel solution.
            raise ValueError("first_ground must be finite")

    @property
    def first_stixel_costs(self) -> tuple[float, float, float]:
        return (self.first_ground, self.first_object, self.first_sky)


@dataclass(frozen=True)
class StixelSummary:
    """What the prior needs to know about a stixel at a junction."""

    cls: StixelClass
    vb: int
    vt: int
    f: float

    def __post_init__(self):
        if self.vb > self.vt:
            raise ValueError(f"stixel base {self.vb} above its top {self.vt}")


def _linear_penalty(weight: float, amount: float) -> float:
    # inf * 0 must not leak NaN into the cost
    return weight * amount if amount > 0 else 0.0


def first_stixel_cost(s: StixelSummary, prior: PriorParams) -> float:
    """Unary prior of the bottom-most stixel of a column."""
    return prior.first_stixel_costs[s.cls] + prior.c_bic


def transition_cost(
    upper: StixelSummary, lower: StixelSummary, ground: GroundModel, prior: PriorParams
) -> float:
    """Prior cost of placing ``upper`` directly on top of ``lower``."""
    assert upper.vb == lower.vt + 1, "transition between non-adjacent stixels"

    if upper.cls == G:
        return INF if lower.cls in (G, S) else prior.c_bic
    if upper.cls == S:
        return INF if lower.cls == S else prior.c_bic

    # upper is an object
    if lower.cls == S:
        return INF
    cost = prior.c_bic
    m = prior.ordering_margin
    if lower.cls == O:
        cost += _linear_penalty(prior.c_ordering, upper.f - lower.f - m)
    else:
        g = ground.disparity(upper.vb)
        cost += _linear_penalty(prior.c_gravity, upper.f - g - m)
        cost += _linear_penalty(prior.c_diving, g - m - upper.f)
    return cost
