import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stixelworld.model import GroundModel, SensorParams
from stixelworld.params import StixelParams
from stixelworld.prior import PriorParams

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_params(rng: np.random.Generator, h: int, d: int, exact: bool = True) -> StixelParams:
    """Random model with prior weights drawn from {0, finite, inf}."""

    def weight():
        return float(rng.choice([0.0, rng.uniform(0, 5), math.inf]))

    prior = PriorParams(
        c_bic=float(rng.choice([0.0, rng.uniform(0, 5)])), c_gravity=weight(), c_ordering=weight(),
        c_diving=weight(), ordering_margin=float(rng.choice([0.0, rng.uniform(0, 2)])),
        first_ground=float(rng.uniform(0, 3)), first_object=weight(), first_sky=weight(),
    )
    return StixelParams(
        ground=GroundModel(float(rng.uniform(0.2, 2)), float(rng.uniform(-2, h + 2))),
        sensor=SensorParams(p_out=float(rng.uniform(0.05, 0.5)), d_range=d),
        prior=prior,
        exact=exact,
    )


def random_column(rng: np.random.Generator, h: int, d: int, invalid: float = 0.1) -> np.ndarray:
    col = rng.uniform(0, d, h)
    col[rng.random(h) < invalid] = np.nan
    return col


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
