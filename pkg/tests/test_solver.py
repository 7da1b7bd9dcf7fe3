import dataclasses
import math

import numpy as np
import pytest
from conftest import random_column, random_params
from hypothesis import given, settings
from hypothesis import strategies as st

from stixelworld.costlut import build_column_luts, build_pair_cost_lut, object_disparity, stixel_data_cost
from stixelworld.model import GroundModel, NoiseModel, SensorParams, StixelClass, pixel_cost
from stixelworld.oracle import brute_force_column
from stixelworld.params import StixelParams
from stixelworld.preprocess import ColumnImage
from stixelworld.prior import PriorParams, StixelSummary, first_stixel_cost, transition_cost
from stixelworld.solver import (
    START,
    BacktrackError,
    ColumnError,
    ColumnTables,
    CostTable,
    IndexTable,
    Workspace,
    backtrack,
    score_segmentation,
    solve_column,
    solve_frame,
    solve_luts,
)

G, O, S = StixelClass.GROUND, StixelClass.OBJECT, StixelClass.SKY
ZERO_PRIOR = PriorParams(0, 0, 0, 0, 0, 0, 0, 0)


def luts_for(col, params):
    return build_column_luts(np.asarray(col, dtype=float), build_pair_cost_lut(params.sensor), params)


def solve(col, params):
    luts = luts_for(col, params)
    tables = solve_column(luts, params)
    return luts, tables, backtrack(tables)


def assert_tiles(stixels, h):
    assert stixels[0].vb == 0 and stixels[-1].vt == h - 1
    for a, b in zip(stixels, stixels[1:]):
        assert b.vb == a.vt + 1
    assert sum(s.height for s in stixels) == h


def test_single_row_picks_cheapest_base_case():
    params = StixelParams(sensor=SensorParams(d_range=16), ground=GroundModel(0.5, 10))
    for d in (0.0, 3.0, 5.0, 11.0, math.nan):
        luts, tables, stixels = solve([d], params)
        base = [stixel_data_cost(luts, c, 0, 0)
                + first_stixel_cost(StixelSummary(c, 0, 0, 0.0), params.prior) for c in StixelClass]
        assert len(stixels) == 1 and (stixels[0].vb, stixels[0].vt) == (0, 0)
        assert stixels[0].cls == StixelClass(int(np.argmin(base)))
        assert tables.cost.cost[:, 0] == pytest.approx(base, abs=1e-12)


def test_perfect_ground_column():
    sensor = SensorParams(p_out=0.15, d_range=64, noise=NoiseModel(1, 1, 1))
    params = StixelParams(ground=GroundModel(0.4, 60.0), sensor=sensor, prior=ZERO_PRIOR)
    h = 40
    col = params.ground.disparity(np.arange(h))
    _, tables, stixels = solve(col, params)
    expected = h * pixel_cost(0.0, 0.0, G, sensor)
    total, cls = tables.cost.minimum()
    assert total == pytest.approx(expected, abs=1e-9)
    assert cls == G
    assert tables.cost.cost[G, h - 1] == pytest.approx(expected, abs=1e-9)


def test_matches_oracle_small(rng):
    for _ in range(40):
        h, d = int(rng.integers(1, 9)), int(rng.integers(4, 17))
        params = random_params(rng, h, d)
        col = random_column(rng, h, d)
        _, tables, stixels = solve(col, params)
        assert tables.cost.minimum()[0] == pytest.approx(brute_force_column(col, params).cost, abs=1e-9)


def test_backtrack_reaches_recorded_cost(rng):
    for _ in range(50):
        h, d = int(rng.integers(1, 40)), int(rng.integers(4, 40))
        params = random_params(rng, h, d)
        col = random_column(rng, h, d)
        luts, tables, stixels = solve(col, params)
        assert_tiles(stixels, h)
        total = tables.cost.minimum()[0]
        assert math.fsum(s.cost for s in stixels) == pytest.approx(total, abs=1e-9)
        assert score_segmentation(luts, stixels, params) == pytest.approx(total, abs=1e-9)


def _audit(luts, tables, params):
    """Re-evaluate every finite state from its recorded argmin."""
    cost, index = tables.cost, tables.index
    ground, prior = params.ground, params.prior
    h = cost.height

    def state_cost(c, k, f):
        return cost.object_by_f[k, f] if c == O else cost.cost[c, k]

    def summary_below(c, k, f, j):
        if c == O:
            return StixelSummary(O, j, k, float(f))
        return StixelSummary(StixelClass(c), j, k, ground.disparity(j) if c == G else 0.0)

    checked = 0
    for k in range(h):
        states = [(G, k, -1), (S, k, -1)] + [(O, k, f) for f in range(params.d_range)]
        for c, _, f in states:
            if c == O:
                value, j, pc, pf = cost.object_by_f[k, f], index.object_base[k, f], index.object_prev_class[k, f], index.object_prev_f[k, f]
            else:
                value, j, pc, pf = cost.cost[c, k], index.base[c, k], index.prev_class[c, k], index.prev_f[c, k]
            if not math.isfinite(value):
                continue
            if c == O:
                assert object_disparity(luts, j, k) == f
            here = summary_below(c, k, f, j)
            data = stixel_data_cost(luts, StixelClass(c), j, k)
            if j == 0:
                assert pc == START
                expected = data + first_stixel_cost(here, prior)
            else:
                pj = index.object_base[j - 1, pf] if pc == O else index.base[pc, j - 1]
                below = summary_below(pc, j - 1, pf, pj)
                expected = data + transition_cost(here, below, ground, prior) + state_cost(pc, j - 1, pf)
            assert value == pytest.approx(expected, abs=1e-9)
            checked += 1
    return checked


def test_optimal_substructure_audit(rng):
    for _ in range(30):
        h, d = int(rng.integers(1, 30)), int(rng.integers(4, 24))
        params = random_params(rng, h, d)
        luts, tables, _ = solve(random_column(rng, h, d), params)
        assert _audit(luts, tables, params) > 0


def test_zero_prior_cost_is_data_cost(rng):
    for _ in range(20):
        h, d = int(rng.integers(1, 30)), 32
        params = StixelParams(ground=GroundModel(0.5, h / 2), sensor=SensorParams(d_range=d), prior=ZERO_PRIOR)
        luts, tables, stixels = solve(random_column(rng, h, d), params)
        data = math.fsum(stixel_data_cost(luts, s.cls, s.vb, s.vt) for s in stixels)
        assert tables.cost.minimum()[0] == pytest.approx(data, abs=1e-9)


def test_cost_monotone_in_prior_weights(rng):
    for _ in range(30):
        h, d = int(rng.integers(2, 40)), 32
        base = random_params(rng, h, d)
        col = random_column(rng, h, d)
        lo = solve(col, base)[1].cost.minimum()[0]
        p = base.prior
        heavier = dataclasses.replace(p, c_bic=p.c_bic + 1, c_gravity=p.c_gravity + 1, c_ordering=p.c_ordering + 0.5,
                                      c_diving=p.c_diving * 2, first_object=p.first_object + 1)
        hi = solve(col, dataclasses.replace(base, prior=heavier))[1].cost.minimum()[0]
        assert hi >= lo - 1e-9


def test_bic_never_increases_stixel_count(rng):
    for _ in range(20):
        h, d = int(rng.integers(5, 50)), 32
        base = random_params(rng, h, d)
        col = random_column(rng, h, d)
        counts = [len(solve(col, dataclasses.replace(base, prior=dataclasses.replace(base.prior, c_bic=c)))[2])
                  for c in (0.0, 0.5, 1, 2, 4, 8, 16)]
        assert all(b <= a for a, b in zip(counts, counts[1:]))


def test_classic_mode_is_consistent_and_never_better(rng):
    for _ in range(30):
        h, d = int(rng.integers(1, 30)), int(rng.integers(4, 24))
        exact = random_params(rng, h, d)
        classic = dataclasses.replace(exact, exact=False)
        col = random_column(rng, h, d)
        _, te, _ = solve(col, exact)
        luts, tc, stixels = solve(col, classic)
        assert_tiles(stixels, h)
        assert tc.cost.minimum()[0] >= te.cost.minimum()[0] - 1e-9
        assert score_segmentation(luts, stixels, classic) == pytest.approx(tc.cost.minimum()[0], abs=1e-9)


def test_hand_built_index_table():
    h = 10
    cost = np.full((3, h), np.inf)
    cost[G, :] = np.arange(h)
    cost[O, h - 1] = 0.0
    base = np.zeros((3, h), dtype=np.int32)
    prev_class = np.full((3, h), START, dtype=np.int32)
    prev_f = np.full((3, h), -1, dtype=np.int32)
    base[O, h - 1] = 5
    prev_class[O, h - 1] = G
    object_f = np.full(h, 7, dtype=np.int32)
    tables = ColumnTables(CostTable(cost, object_f), IndexTable(base, prev_class, prev_f), GroundModel())
    stixels = backtrack(tables, column=3)
    assert [(s.vb, s.vt, s.cls) for s in stixels] == [(0, 4, G), (5, 9, O)]
    assert stixels[1].disparity == 7.0 and all(s.column == 3 for s in stixels)


def test_single_row_backtrack():
    params = StixelParams(sensor=SensorParams(d_range=8))
    assert len(solve([3.0], params)[2]) == 1


def test_corrupt_index_table_fails():
    h = 4
    cost = np.zeros((3, h))
    base = np.full((3, h), 3, dtype=np.int32)  # every state claims to start at row 3
    prev_class = np.full((3, h), G, dtype=np.int32)
    prev_f = np.full((3, h), -1, dtype=np.int32)
    tables = ColumnTables(CostTable(cost, np.zeros(h, dtype=np.int32)), IndexTable(base, prev_class, prev_f), GroundModel())
    with pytest.raises(BacktrackError):
        backtrack(tables)


def test_workspace_reuse_is_identical(rng):
    params = StixelParams(sensor=SensorParams(d_range=32), ground=GroundModel(0.5, 30))
    ws = Workspace(40, params)
    pair = build_pair_cost_lut(params.sensor)
    for _ in range(20):
        col = random_column(rng, 40, 32)
        luts = build_column_luts(col, pair, params)
        assert solve_luts(luts, params, workspace=ws) == solve_luts(luts, params)


def test_workspace_mismatch_rejected():
    params = StixelParams(sensor=SensorParams(d_range=32))
    luts = luts_for(np.ones(5), params)
    with pytest.raises(ValueError):
        solve_column(luts, params, Workspace(6, params))
    with pytest.raises(ValueError):
        solve_column(luts, dataclasses.replace(params, sensor=SensorParams(d_range=16)))


def _frame(rng, n_cols, h, d):
    data = np.stack([random_column(rng, h, d) for _ in range(n_cols)])
    return ColumnImage(data, 1)


def test_frame_one_column_equals_solve_column(rng):
    params = StixelParams(sensor=SensorParams(d_range=32), ground=GroundModel(0.5, 20))
    cols = _frame(rng, 1, 30, 32)
    pair = build_pair_cost_lut(params.sensor)
    out = solve_frame(cols, pair, params)
    assert len(out) == 1 and out[0].index == 0
    assert out[0].stixels == backtrack(solve_column(build_column_luts(cols.data[0], pair, params), params))


def test_frame_identical_columns(rng):
    params = StixelParams(sensor=SensorParams(d_range=32), ground=GroundModel(0.5, 20))
    col = random_column(rng, 30, 32)
    out = solve_frame(ColumnImage(np.stack([col] * 4), 1), build_pair_cost_lut(params.sensor), params)
    first = [(s.vb, s.vt, s.cls, s.disparity, s.cost) for s in out[0].stixels]
    for c in out[1:]:
        assert [(s.vb, s.vt, s.cls, s.disparity, s.cost) for s in c.stixels] == first


def test_frame_independent_of_threads_and_order(rng):
    params = StixelParams(sensor=SensorParams(d_range=32), ground=GroundModel(0.5, 20))
    cols = _frame(rng, 12, 30, 32)
    pair = build_pair_cost_lut(params.sensor)
    ref = solve_frame(cols, pair, params)
    for threads in (2, 5):
        assert solve_frame(cols, pair, params, threads) == ref
    perm = rng.permutation(12)
    shuffled = solve_frame(ColumnImage(cols.data[perm], 1), pair, params)
    for new, old in enumerate(perm):
        assert [dataclasses.replace(s, column=old) for s in shuffled[new].stixels] == ref[old].stixels
    assert [c.index for c in ref] == list(range(12))


def test_frame_errors_carry_column_index():
    params = StixelParams(sensor=SensorParams(d_range=32))
    cols = ColumnImage(np.ones((3, 4)), 1)
    with pytest.raises(ColumnError) as info:
        solve_frame(cols, build_pair_cost_lut(SensorParams(d_range=16)), params)
    assert info.value.column == 0
    with pytest.raises(ValueError):
        solve_frame(cols, build_pair_cost_lut(params.sensor), params, threads=0)


@settings(max_examples=60)
@given(st.integers(1, 25), st.integers(4, 40), st.integers(0, 2**32 - 1), st.booleans())
def test_segmentations_tile(h, d, seed, exact):
    rng = np.random.default_rng(seed)
    params = random_params(rng, h, d, exact)
    _, tables, stixels = solve(random_column(rng, h, d), params)
    assert_tiles(stixels, h)
    assert all(0 <= s.vb <= s.vt < h for s in stixels)


FORBIDDEN = {(G, S), (G, G), (S, S), (O, S)}


@settings(max_examples=60)
@given(st.integers(1, 25), st.integers(4, 40), st.integers(0, 2**32 - 1))
def test_no_forbidden_transitions(h, d, seed):
    rng = np.random.default_rng(seed)
    params = random_params(rng, h, d)
    _, _, stixels = solve(random_column(rng, h, d), params)
    if math.isinf(params.prior.first_sky):
        assert stixels[0].cls != S
    for lower, upper in zip(stixels, stixels[1:]):
        assert (upper.cls, lower.cls) not in FORBIDDEN
