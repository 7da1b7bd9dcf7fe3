"""Acceptance suite: one test per acceptance criterion of the package.

Property suites (criterion 6) live in the per-module test files; the test
here gathers their boundary cases so the criterion has a single verdict.
"""

import dataclasses
import math
import os
import time

import numpy as np
import pytest
from conftest import random_column, random_params

from stixelworld.bench import SCALING_COLUMNS, SCALING_HEIGHTS, scaling_series, scene_image, time_frames
from stixelworld.cli import main
from stixelworld.config import RunConfig
from stixelworld.costlut import build_column_luts, build_pair_cost_lut, stixel_data_cost
from stixelworld.imageio import StixelRecord, records_from_columns
from stixelworld.metrics import detection_rate, evaluate, false_positives
from stixelworld.model import SensorParams, StixelClass, pixel_cost
from stixelworld.oracle import brute_force_column, direct_data_cost, score_direct
from stixelworld.params import StixelParams
from stixelworld.preprocess import ColumnImage, reduce_and_transpose
from stixelworld.solver import solve_frame
from stixelworld.synth import SceneSpec, generate, ground_truth, random_boxes


def test_1_oracle_equivalence():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    n = 0
    for _ in range(240):
        h, d = int(rng.integers(1, 11)), int(rng.integers(4, 17))
        params = random_params(rng, h, d, exact=True)
        col = random_column(rng, h, d, invalid=0.1)
        (result,) = solve_frame(ColumnImage(col[None, :], d), build_pair_cost_lut(params.sensor), params)
        expected = brute_force_column(col, params).cost
        assert result.cost == expected or abs(result.cost - expected) <= 1e-9
        rescored = score_direct(col, result.stixels, params)
        assert rescored == result.cost or abs(rescored - result.cost) <= 1e-6
        n += 1
    assert n >= 200
    assert time.perf_counter() - t0 < 60


def test_2_lut_consistency():
    rng = np.random.default_rng(7)
    h, d = 400, 128
    params = StixelParams(sensor=SensorParams(d_range=d))
    pair = build_pair_cost_lut(params.sensor)
    checked = 0
    for _ in range(20):
        col = random_column(rng, h, d, invalid=0.1)
        luts = build_column_luts(col, pair, params)
        for _ in range(50):
            vb, vt = sorted(int(x) for x in rng.integers(0, h, 2))
            cls = StixelClass(int(rng.integers(3)))
            fast = stixel_data_cost(luts, cls, vb, vt)
            slow = direct_data_cost(col, cls, vb, vt, params)
            assert fast == pytest.approx(slow, rel=1e-6)
            checked += 1
    assert checked == 1000


def test_3_complexity_scaling():
    params = RunConfig().stixel_params()
    h_rep = scaling_series(params, SCALING_HEIGHTS, "h", 16, repeat=7, stage="dp")
    c_rep = scaling_series(params, SCALING_COLUMNS, "cols", 440, repeat=5)
    print(f"height exponent {h_rep.exponent:.3f}, column exponent {c_rep.exponent:.3f}")
    assert 1.8 <= h_rep.exponent <= 2.3
    assert 0.9 <= c_rep.exponent <= 1.2
    img = scene_image(440, 1024, 5, params.d_range, np.random.default_rng(0))
    rep = time_frames(img, params, repeat=3, threads=1)
    print(f"1024x440 frame: {rep.summary()}")
    assert rep.median < 1.0


def _scene(seed: int, cfg: RunConfig):
    spec = SceneSpec(width=1024, height=440, alpha=0.4, v_horizon=0.7 * 440, noise=0.5, outliers=0.02, seed=seed)
    boxes = random_boxes(np.random.default_rng([seed, 1]), spec, 3, cfg.stixel_width)
    return dataclasses.replace(spec, boxes=boxes)


def test_4_synthetic_end_to_end():
    cfg = RunConfig()
    params = cfg.stixel_params()
    pair = build_pair_cost_lut(params.sensor)
    gt, est = [], []
    for seed in range(100):
        spec = _scene(seed, cfg)
        img, labels = generate(spec)
        frame = f"frame_{seed:04d}"
        gt.extend(ground_truth(spec, labels, cfg.stixel_width, frame))
        cols = solve_frame(reduce_and_transpose(img, cfg.stixel_width), pair, params)
        est.extend(records_from_columns(frame, cols, cfg.stixel_width))
    report = evaluate(gt, est)
    print(report.table())
    assert report.n_frames == 100
    assert report.detection_rate >= 0.95
    assert report.total_false_positives <= 1


def test_5_determinism_across_threads(tmp_path):
    scenes = tmp_path / "scenes"
    assert main(["synth", str(scenes), "--frames", "20", "--seed", "100"]) == 0
    many = max(os.cpu_count() or 1, 4)
    outputs = []
    for threads in (1, many):
        out = tmp_path / f"threads{threads}.stixels"
        assert main(["estimate", str(scenes), "-o", str(out), "--threads", str(threads)]) == 0
        outputs.append(out.read_bytes())
    assert len({r.split()[0] for r in outputs[0].decode().splitlines()[1:]}) == 20
    assert outputs[0] == outputs[1]


def test_6_property_boundaries():
    sensor = SensorParams(p_out=0.3, d_range=32)
    cap = sensor.outlier_cost
    for cls in StixelClass:
        costs = [pixel_cost(10.0, 10.0 + x, cls, sensor) for x in np.linspace(0, 40, 81)]
        assert all(b >= a - 1e-12 for a, b in zip(costs, costs[1:]))
        assert max(costs) <= cap + 1e-12
        assert pixel_cost(8.0, 12.0, cls, sensor) == pytest.approx(pixel_cost(12.0, 8.0, cls, sensor))
        assert pixel_cost(math.nan, 5.0, cls, sensor) == pytest.approx(cap)

    rng = np.random.default_rng(3)
    params = StixelParams(sensor=sensor)
    col = random_column(rng, 50, 32)
    luts = build_column_luts(col, build_pair_cost_lut(sensor), params)
    for cls in StixelClass:
        for vb, m, vt in ((0, 20, 49), (5, 5, 30), (10, 40, 41)):
            whole = stixel_data_cost(luts, cls, vb, vt)
            split = stixel_data_cost(luts, cls, vb, m - 1) + stixel_data_cost(luts, cls, m, vt) if m > vb else whole
            if cls != StixelClass.OBJECT:
                assert whole == pytest.approx(split, abs=1e-9)

    for _ in range(50):
        h, d = int(rng.integers(1, 30)), int(rng.integers(4, 32))
        p = random_params(rng, h, d)
        (res,) = solve_frame(ColumnImage(random_column(rng, h, d)[None, :], d), build_pair_cost_lut(p.sensor), p)
        st = res.stixels
        assert st[0].vb == 0 and st[-1].vt == h - 1
        assert all(b.vb == a.vt + 1 for a, b in zip(st, st[1:]))
        forbidden = {(StixelClass.GROUND, StixelClass.SKY), (StixelClass.GROUND, StixelClass.GROUND),
                     (StixelClass.SKY, StixelClass.SKY), (StixelClass.OBJECT, StixelClass.SKY)}
        assert all((b.cls, a.cls) not in forbidden for a, b in zip(st, st[1:]))

    def obj(vb, vt, width=1):
        return StixelRecord("f", 0, 0, width, vb, vt, StixelClass.OBJECT, 10.0, 0.0)

    assert detection_rate([obj(10, 19)], [obj(15, 19)]) == 0.0
    assert detection_rate([obj(10, 19)], [obj(14, 19)]) == 1.0
    assert false_positives([], [obj(0, 29)]) == 0
    assert false_positives([], [obj(0, 30)]) == 1
