"""Stixel estimation from dense disparity maps by column-wise dynamic programming."""

from .config import RunConfig, load_config
from .costlut import ColumnLuts, PairCostLut, build_column_luts, build_pair_cost_lut
from .imageio import StixelRecord, load_disparity, read_records, write_records, write_stixels
from .metrics import EvalReport, evaluate
from .model import GroundModel, NoiseModel, SensorParams, StixelClass
from .params import StixelParams
from .preprocess import ColumnImage, DisparityImage, reduce_and_transpose
from .prior import PriorParams
from .solver import Stixel, StixelColumn, solve_column, solve_frame

__all__ = [
    "ColumnImage", "ColumnLuts", "DisparityImage", "EvalReport", "GroundModel", "NoiseModel",
    "PairCostLut", "PriorParams", "RunConfig", "SensorParams", "Stixel", "StixelClass",
    "StixelColumn", "StixelParams", "StixelRecord", "build_column_luts", "build_pair_cost_lut",
    "evaluate", "load_config", "load_disparity", "read_records", "reduce_and_transpose",
    "solve_column", "solve_frame", "write_records", "write_stixels",
]
