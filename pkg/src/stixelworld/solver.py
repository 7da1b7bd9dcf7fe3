"""Per-column dynamic program and backtracking.

State ``(c, k)`` is the cheapest segmentation of rows ``0..k`` whose last
stixel has class ``c``. Object states are additionally split by the rounded
disparity ``f`` of the last stixel, because the ordering prior of a later
object depends on it. The split keeps the recurrence exact; dropping it
(``StixelParams.exact = False``) gives the classic one-state-per-class
recurrence.

Candidates are enumerated with split row ``j`` ascending and predecessor
class in ``GROUND < OBJECT < SKY`` order; a candidate replaces the incumbent
only when strictly cheaper, so the first minimum wins.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .costlut import ColumnLuts, PairCostLut, build_column_luts, object_disparity, stixel_data_cost
from .model import GroundModel, StixelClass
from .params import StixelParams
from .preprocess import ColumnImage
from .prior import StixelSummary, first_stixel_cost, transition_cost

START = -1
_G, _O, _S = 0, 1, 2


class BacktrackError(RuntimeError):
    """Index table links do not describe a segmentation (solver bug)."""


class ColumnError(RuntimeError):
    def __init__(self, column: int, cause: Exception):
        super().__init__(f"column {column}: {cause}")
        self.column = column


@dataclass(frozen=True, slots=True)
class Stixel:
    column: int
    vb: int
    vt: int
    cls: StixelClass
    disparity: float
    cost: float

    @property
    def height(self) -> int:
        return self.vt - self.vb + 1

    def summary(self) -> StixelSummary:
        return StixelSummary(self.cls, self.vb, self.vt, self.disparity)


@dataclass
class StixelColumn:
    index: int
    stixels: list[Stixel]

    @property
    def cost(self) -> float:
        return math.fsum(s.cost for s in self.stixels)


@dataclass
class CostTable:
    """``cost[c, k]``: best aggregated cost of rows ``0..k`` ending in class ``c``.

    ``object_f[k]`` is the rounded disparity of the last stixel of the best
    object state. ``object_by_f[k, f]`` splits the object row by that
    disparity (absent for hand-built tables).
    """

    cost: np.ndarray
    object_f: np.ndarray
    object_by_f: np.ndarray | None = None

    @property
    def height(self) -> int:
        return self.cost.shape[1]

    def minimum(self) -> tuple[float, StixelClass]:
        top = self.cost[:, -1]
        c = int(np.argmin(top))  # first minimum: GROUND < OBJECT < SKY
        return float(top[c]), StixelClass(c)


@dataclass
class IndexTable:
    """Backtracking links, indexed like :class:`CostTable`.

    ``base[c, k]`` is the first row of the last stixel, ``prev_class[c, k]``
    the class of the stixel below it (``START`` when ``base == 0``) and
    ``prev_f[c, k]`` that stixel's object disparity (-1 if not an object).
    """

    base: np.ndarray
    prev_class: np.ndarray
    prev_f: np.ndarray
    object_base: np.ndarray | None = None
    object_prev_class: np.ndarray | None = None
    object_prev_f: np.ndarray | None = None


@dataclass
class ColumnTables:
    cost: CostTable
    index: IndexTable
    ground: GroundModel


@numba.njit(cache=True, nogil=True, error_model="numpy")
def _penalty(weight, amount):
    if amount > 0.0:
        return weight * amount
    return 0.0


@numba.njit(cache=True, nogil=True, error_model="numpy")
def _dp_kernel(
    lut_g, lut_s, lut_o, disp_prefix, count_prefix, ground_f, free_lo,
    c_bic, c_grav, c_div, c_ord, margin, first_g, first_o, first_s, exact,
    cost, base, prev_c, prev_f, best_f, cost_o, base_o, prev_c_o, prev_f_o,
    rows, env, span_f, into_g, into_s, into_s_cls,
):
    h = lut_g.shape[0] - 1
    d = lut_o.shape[1]
    inf = np.inf
    finite_ord = c_ord < inf
    top = d - 1

    cost[:, :] = inf
    base[:, :] = -1
    prev_c[:, :] = -2
    prev_f[:, :] = -1
    best_f[:] = -1

    for k in range(h):
        # rounded mean disparity of every span j..k; spans without valid
        # pixels have a zero disparity sum and round to 0
        dp_top = disp_prefix[k + 1]
        n_top = count_prefix[k + 1]
        for j in range(k + 1):
            n = max(n_top - count_prefix[j], 1)
            f = math.floor((dp_top - disp_prefix[j]) / n + 0.5)
            span_f[j] = min(max(f, 0.0), top)
        f_lo = top
        f_hi = 0.0
        for j in range(k + 1):
            f_lo = min(f_lo, span_f[j])
            f_hi = max(f_hi, span_f[j])
        # Object states of this row live in [fl, fh]. Entries outside keep
        # their reset values; only the range written for a previous column
        # needs clearing, and the part of it inside [fl, fh] is reset below.
        fl = int(f_lo)
        fh = int(f_hi)
        for f in range(rows[k, 0], min(rows[k, 1], fl - 1) + 1):
            cost_o[k, f] = inf
            base_o[k, f] = -1
            prev_c_o[k, f] = -2
            prev_f_o[k, f] = -1
        for f in range(max(rows[k, 0], fh + 1), rows[k, 1] + 1):
            cost_o[k, f] = inf
            base_o[k, f] = -1
            prev_c_o[k, f] = -2
            prev_f_o[k, f] = -1
        for f in range(fl, fh + 1):
            cost_o[k, f] = inf
            base_o[k, f] = -1
            prev_c_o[k, f] = -2
            prev_f_o[k, f] = -1
        rows[k, 0] = fl
        rows[k, 1] = fh

        # ground
        g_top = lut_g[k + 1]
        best = (g_top - lut_g[0]) + (first_g + c_bic)
        arg = 0
        for j in range(1, k + 1):
            v = (g_top - lut_g[j]) + into_g[j - 1]
            if v < best:
                best = v
                arg = j
        cost[_G, k] = best
        base[_G, k] = arg
        if arg == 0:
            prev_c[_G, k] = START
        else:
            prev_c[_G, k] = _O
            prev_f[_G, k] = best_f[arg - 1]

        # sky
        s_top = lut_s[k + 1]
        best = (s_top - lut_s[0]) + (first_s + c_bic)
        arg = 0
        for j in range(1, k + 1):
            v = (s_top - lut_s[j]) + into_s[j - 1]
            if v < best:
                best = v
                arg = j
        cost[_S, k] = best
        base[_S, k] = arg
        if arg == 0:
            prev_c[_S, k] = START
        else:
            pc = into_s_cls[arg - 1]
            prev_c[_S, k] = pc
            if pc == _O:
                prev_f[_S, k] = best_f[arg - 1]

        # object, one state per rounded disparity
        f = int(span_f[0])
        cob = (lut_o[k + 1, f] - lut_o[0, f]) + (first_o + c_bic)
        fb = f
        cost_o[k, f] = cob
        base_o[k, f] = 0
        prev_c_o[k, f] = START
        for j in range(1, k + 1):
            p = j - 1
            f = int(span_f[j])
            do = lut_o[k + 1, f] - lut_o[j, f]
            g = ground_f[j]
            rest = c_bic + _penalty(c_grav, f - g - margin) + _penalty(c_div, g - margin - f)
            vg = do + rest + cost[_G, p]
            # cheapest object state at row p under an object of disparity f,
            # ordering penalty included
            if not exact:
                e = cost[_O, p] + _penalty(c_ord, f - best_f[p] - margin)
                ea = best_f[p]
            else:
                # states f' >= t are free, f' < t pay the ordering penalty;
                # both tables carry an inf sentinel past the row's range
                t = min(max(free_lo[f], rows[p, 0]), rows[p, 1] + 1)
                e = env[p, t, 0]
                ea = int(env[p, t, 2])
                pv = env[p, t, 1]
                b = c_ord * (f - margin) + pv if pv < inf else inf
                take = b < e
                e = b if take else e
                ea = int(env[p, t, 3]) if take else ea
            vo = do + c_bic + e
            # ground below wins ties against an object below
            take = vo < vg
            v = vo if take else vg
            if v < cost_o[k, f]:
                cost_o[k, f] = v
                base_o[k, f] = j
                prev_c_o[k, f] = _O if take else _G
                prev_f_o[k, f] = ea if take else -1
                if v < cob:
                    cob = v
                    fb = f
        cost[_O, k] = cob
        best_f[k] = fb
        base[_O, k] = base_o[k, fb]
        prev_c[_O, k] = prev_c_o[k, fb]
        prev_f[_O, k] = prev_f_o[k, fb]

        into_g[k] = c_bic + cob
        if cost[_G, k] <= cob:
            into_s[k] = c_bic + cost[_G, k]
            into_s_cls[k] = _G
        else:
            into_s[k] = c_bic + cob
            into_s_cls[k] = _O

        if not exact:
            continue
        # env[k, t, 0]: minimum cost over f' >= t (free side), ties -> smaller f',
        # argument in env[k, t, 2]
        sv = inf
        sa = -1
        env[k, fh + 1, 0] = inf
        env[k, fh + 1, 2] = -1
        for i in range(fh, fl - 1, -1):
            c = cost_o[k, i]
            if c <= sv:
                sv = c
                sa = i
            env[k, i, 0] = sv
            env[k, i, 2] = sa
        # env[k, t, 1]: minimum of cost - c_ord * f' over fl <= f' < t
        # (penalised side), ties -> smaller f', argument in env[k, t, 3]
        pv = inf
        pa = -1
        env[k, fl, 1] = inf
        env[k, fl, 3] = -1
        for i in range(fl, fh + 1):
            if finite_ord:
                c = cost_o[k, i] - c_ord * i
                if c < pv:
                    pv = c
                    pa = i
            env[k, i + 1, 1] = pv
            env[k, i + 1, 3] = pa


class Workspace:
    """Reusable DP buffers for one column height and parameter set.

    Tables returned by :func:`solve_column` with a workspace alias its
    buffers and stay valid until the workspace solves another column. A
    workspace must not be shared between threads.
    """

    def __init__(self, h: int, params: StixelParams):
        if h < 1:
            raise ValueError("column must have at least one row")
        d = params.d_range
        prior = params.prior
        self.h, self.d, self.params = h, d, params
        self.ground_f = np.ascontiguousarray(params.ground.disparity(np.arange(h, dtype=np.float64)), dtype=np.float64)
        # lowest disparity f' an object may have below one of disparity f
        # without an ordering penalty
        self.free_lo = np.maximum(np.ceil(np.arange(d) - float(prior.ordering_margin)), 0).astype(np.int64)
        self.cost = np.empty((3, h))
        self.base = np.empty((3, h), dtype=np.int32)
        self.prev_c = np.empty((3, h), dtype=np.int32)
        self.prev_f = np.empty((3, h), dtype=np.int32)
        self.best_f = np.empty(h, dtype=np.int32)
        # object tables start fully reset; the kernel then only touches the
        # disparity range each row actually uses
        self.cost_o = np.full((h, d), np.inf)
        self.base_o = np.full((h, d), -1, dtype=np.int32)
        self.prev_c_o = np.full((h, d), -2, dtype=np.int32)
        self.prev_f_o = np.full((h, d), -1, dtype=np.int32)
        # disparity range [lo, hi] holding each row's object states
        self.rows = np.empty((h, 2), dtype=np.int64)
        self.rows[:, 0], self.rows[:, 1] = 0, -1
        # per row and threshold: free-side minimum, penalised-side minimum and
        # their arguments, interleaved so one lookup touches one cache line
        self.env = np.empty((h, d + 1, 4))
        self.span_f = np.empty(h)
        self.into_g = np.empty(h)
        self.into_s = np.empty(h)
        self.into_s_cls = np.empty(h, dtype=np.int32)

    def fits(self, h: int, params: StixelParams) -> bool:
        return self.h == h and self.params == params


def solve_column(luts: ColumnLuts, params: StixelParams, workspace: Workspace | None = None) -> ColumnTables:
    """Fill the cost and index tables of one column."""
    h = luts.height
    if luts.d_range != params.d_range:
        raise ValueError(f"LUT d_range {luts.d_range} does not match params d_range {params.d_range}")
    ws = workspace if workspace is not None else Workspace(h, params)
    if not ws.fits(h, params):
        raise ValueError("workspace was built for a different height or parameter set")
    prior = params.prior
    _dp_kernel(
        luts.lut_ground, luts.lut_sky, luts.object_rows, luts.disp_prefix, luts.valid_count_prefix,
        ws.ground_f, ws.free_lo,
        float(prior.c_bic), float(prior.c_gravity), float(prior.c_diving), float(prior.c_ordering), float(prior.ordering_margin),
        float(prior.first_ground), float(prior.first_object), float(prior.first_sky), bool(params.exact),
        ws.cost, ws.base, ws.prev_c, ws.prev_f, ws.best_f, ws.cost_o, ws.base_o, ws.prev_c_o, ws.prev_f_o,
        ws.rows, ws.env,
        ws.span_f, ws.into_g, ws.into_s, ws.into_s_cls,
    )
    return ColumnTables(
        CostTable(ws.cost, ws.best_f, ws.cost_o),
        IndexTable(ws.base, ws.prev_c, ws.prev_f, ws.base_o, ws.prev_c_o, ws.prev_f_o),
        params.ground,
    )


def _state(tables: ColumnTables, cls: int, k: int, f: int):
    """(cost, base, prev_class, prev_f) of a DP state."""
    ct, it = tables.cost, tables.index
    if cls == _O and ct.object_by_f is not None and it.object_base is not None:
        if not 0 <= f < ct.object_by_f.shape[1]:
            raise BacktrackError(f"object state at row {k} has no disparity")
        return (ct.object_by_f[k, f], it.object_base[k, f], it.object_prev_class[k, f], it.object_prev_f[k, f])
    return ct.cost[cls, k], it.base[cls, k], it.prev_class[cls, k], it.prev_f[cls, k]


def backtrack(tables: ColumnTables, column: int = 0) -> list[Stixel]:
    """Follow the index table from the cheapest top state; bottom-to-top stixels."""
    h = tables.cost.height
    total, cls = tables.cost.minimum()
    if not math.isfinite(total):
        raise BacktrackError("no finite segmentation")
    c, k = int(cls), h - 1
    f = int(tables.cost.object_f[k]) if c == _O else -1

    out: list[Stixel] = []
    for _ in range(h):
        cost, j, pc, pf = _state(tables, c, k, f)
        j, pc, pf = int(j), int(pc), int(pf)
        if not 0 <= j <= k:
            raise BacktrackError(f"link of state ({StixelClass(c).name}, {k}) points to row {j}")
        if j == 0:
            if pc != START:
                raise BacktrackError(f"stixel at row 0 has predecessor class {pc}")
            below = 0.0
        else:
            if pc not in (_G, _O, _S):
                raise BacktrackError(f"state ({StixelClass(c).name}, {k}) has no predecessor")
            below = _state(tables, pc, j - 1, pf)[0]
        klass = StixelClass(c)
        if klass == StixelClass.OBJECT:
            disp = float(f)
        elif klass == StixelClass.GROUND:
            disp = tables.ground.disparity(j)
        else:
            disp = 0.0
        out.append(Stixel(column, j, k, klass, disp, float(cost - below)))
        if j == 0:
            out.reverse()
            return out
        c, k, f = pc, j - 1, pf
    raise BacktrackError(f"links do not reach row 0 within {h} steps")


def score_segmentation(luts: ColumnLuts, stixels, params: StixelParams) -> float:
    """Total cost of a segmentation using the LUT data costs and the prior."""
    total = 0.0
    below = None
    for s in stixels:
        total += stixel_data_cost(luts, s.cls, s.vb, s.vt)
        summary = _summary(luts, s, params)
        if below is None:
            total += first_stixel_cost(summary, params.prior)
        else:
            total += transition_cost(summary, below, params.ground, params.prior)
        below = summary
    return total


def _summary(luts: ColumnLuts, s: Stixel, params: StixelParams) -> StixelSummary:
    if s.cls == StixelClass.OBJECT:
        f = float(object_disparity(luts, s.vb, s.vt))
    elif s.cls == StixelClass.GROUND:
        f = params.ground.disparity(s.vb)
    else:
        f = 0.0
    return StixelSummary(s.cls, s.vb, s.vt, f)


def solve_luts(luts: ColumnLuts, params: StixelParams, column: int = 0,
               workspace: Workspace | None = None) -> list[Stixel]:
    return backtrack(solve_column(luts, params, workspace), column)


def solve_frame(
    cols: ColumnImage, pair: PairCostLut, params: StixelParams, threads: int = 1
) -> list[StixelColumn]:
    """Segment every column. Output order and content do not depend on ``threads``."""
    if threads < 1:
        raise ValueError("threads must be >= 1")
    local = threading.local()

    def one(c: int) -> StixelColumn:
        try:
            ws = getattr(local, "ws", None)
            if ws is None:
                ws = local.ws = Workspace(cols.height, params)
            luts = build_column_luts(cols.data[c], pair, params)
            return StixelColumn(c, solve_luts(luts, params, c, ws))
        except Exception as exc:
            raise ColumnError(c, exc) from exc

    indices = range(cols.n_cols)
    if threads == 1:
        return [one(c) for c in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, indices))
