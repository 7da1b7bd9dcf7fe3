from __future__ import annotations

from dataclasses import dataclass, field

from .model import GroundModel, SensorParams
from .prior import PriorParams


@dataclass(frozen=True)
class StixelParams:
    """Everything the estimator needs besides the disparity data.

    ``exact`` selects the solver's state space. With ``exact=True`` object
    states are kept per rounded disparity, which makes the column optimum
    exact under the ordering prior. With ``exact=False`` only the single best
    object segmentation per row is kept, as in the classic recurrence.
    """

    ground: GroundModel = field(default_factory=GroundModel)
    sensor: SensorParams = field(default_factory=SensorParams)
    prior: PriorParams = field(default_factory=PriorParams)
    stixel_width: int = 5
    exact: bool = True

    def __post_init__(self):
        if self.stixel_width < 1:
            raise ValueError(f"stixel_width must be >= 1, got {self.stixel_width}")

    @property
    def d_range(self) -> int:
        return self.sensor.d_range
