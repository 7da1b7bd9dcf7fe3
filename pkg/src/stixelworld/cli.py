"""Command-line driver: estimate, bench, eval, synth.

Every subcommand accepts ``--config FILE`` plus one ``--<key> VALUE`` flag per
configuration field; flags override the file. Exit codes: 0 success,
1 usage or configuration error, 2 data error (unreadable or malformed input,
mismatched frames, oracle disagreement).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from .bench import SCALING_COLUMNS, SCALING_HEIGHTS, scaling_series, scene_image, time_frames
from .config import ConfigError, RunConfig, convert, load_config
from .costlut import build_pair_cost_lut
from .imageio import (
    DisparityFormatError,
    disparity_to_raw,
    load_disparity,
    read_records,
    records_from_columns,
    render_overlay,
    write_pgm,
    write_records,
)
from .metrics import FrameMismatchError, evaluate
from .model import GroundModel, SensorParams
from .params import StixelParams
from .preprocess import ColumnImage, reduce_and_transpose
from .prior import PriorParams
from .solver import ColumnError, solve_frame
from .synth import Box, SceneSpec, generate, ground_truth, random_boxes

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

DISPARITY_SUFFIXES = (".pgm",)
GT_FILE = "gt.stixels"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raises instead of exiting so usage errors map to exit code 1."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- configuration flags -----------------------------------------------------

def add_config_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("configuration")
    group.add_argument("--config", metavar="FILE", help="key = value file; flags below override it")
    defaults = RunConfig()
    for f in fields(RunConfig):
        group.add_argument(f"--{f.name}", metavar=f.type.upper(), default=None,
                           help=f"default {getattr(defaults, f.name)}")


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    overrides = {}
    for f in fields(RunConfig):
        text = getattr(ns, f.name, None)
        if text is not None:
            overrides[f.name] = convert(f.name, text)
    return load_config(ns.config, overrides)


# -- inputs ------------------------------------------------------------------

def collect_inputs(paths) -> list[Path]:
    """Files as given, directories expanded to their graymaps in name order."""
    out = []
    for p in map(Path, paths):
        if p.is_dir():
            out.extend(sorted(q for q in p.iterdir() if q.suffix.lower() in DISPARITY_SUFFIXES and q.is_file()))
        elif p.is_file():
            out.append(p)
        else:
            raise DataError(f"no such file or directory: {p}")
    stems = [p.stem for p in out]
    dupes = sorted({s for s in stems if stems.count(s) > 1})
    if dupes:
        raise DataError(f"duplicate frame ids: {', '.join(dupes)}")
    return out


def _load(path: Path, cfg: RunConfig):
    try:
        return load_disparity(path, cfg.scale, cfg.invalid_value, cfg.d_range)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc


# -- subcommands ---------------------------------------------------------------

def cmd_estimate(ns, cfg: RunConfig, out) -> int:
    params = cfg.stixel_params()
    inputs = collect_inputs(ns.inputs)
    if not inputs:
        raise DataError("no disparity images found")
    if ns.overlay:
        Path(ns.overlay).mkdir(parents=True, exist_ok=True)
    pair = build_pair_cost_lut(params.sensor)
    records = []
    compute = 0.0
    for path in inputs:
        img = _load(path, cfg)
        t0 = time.perf_counter()
        cols = solve_frame(reduce_and_transpose(img, cfg.stixel_width), pair, params, cfg.threads)
        compute += time.perf_counter() - t0
        records.extend(records_from_columns(path.stem, cols, cfg.stixel_width))
        if ns.overlay:
            render_overlay(img, cols, Path(ns.overlay) / f"{path.stem}.ppm", cfg.stixel_width)
    write_records(records, ns.output)
    print(f"{len(records)} stixels from {len(inputs)} frame(s) in {compute:.3f} s", file=out)
    return EXIT_OK


def cmd_bench(ns, cfg: RunConfig, out) -> int:
    if cfg.repeat < 3:
        raise UsageError("bench needs --repeat >= 3")
    params = cfg.stixel_params()
    if ns.input:
        img = _load(Path(ns.input), cfg)
        source = ns.input
    else:
        img = scene_image(ns.height, ns.width, cfg.stixel_width, cfg.d_range, np.random.default_rng(ns.seed))
        source = f"synthetic {ns.width}x{ns.height} scene"
    print(f"{source}, s={cfg.stixel_width}, threads={cfg.threads}", file=out)
    print(time_frames(img, params, cfg.repeat, cfg.threads).summary(), file=out)
    if ns.scaling:
        h_rep = scaling_series(params, SCALING_HEIGHTS, "h", ns.scaling_columns, cfg.repeat, ns.seed, stage="dp")
        c_rep = scaling_series(params, SCALING_COLUMNS, "cols", ns.scaling_height, cfg.repeat, ns.seed)
        for name, rep, unit in (("height", h_rep, "column DP"), ("columns", c_rep, "frame")):
            pts = "  ".join(f"{n}:{1e3 * t:.2f}ms" for n, t in zip(rep.sizes, rep.seconds))
            print(f"{name} series ({unit}): {pts}  exponent {rep.exponent:.3f}", file=out)
    return EXIT_OK


def cmd_eval(ns, cfg: RunConfig, out) -> int:
    try:
        est = read_records(ns.pred)
        gt = read_records(ns.gt)
    except OSError as exc:
        raise DataError(f"cannot read {exc.filename}: {exc.strerror}") from exc
    except DisparityFormatError as exc:
        raise DataError(str(exc)) from exc
    try:
        report = evaluate(gt, est)
    except FrameMismatchError as exc:
        raise DataError(str(exc)) from exc
    print(report.table(), file=out)
    return EXIT_OK


def cmd_synth(ns, cfg: RunConfig, out) -> int:
    try:
        boxes = tuple(Box.parse(b) for b in ns.box)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if ns.frames < 1:
        raise UsageError("--frames must be >= 1")
    outdir = Path(ns.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(ns.frames):
        seed = ns.seed + i
        spec = SceneSpec(width=ns.width, height=ns.height, alpha=cfg.alpha, v_horizon=cfg.v_horizon,
                         noise=ns.noise, outliers=ns.outliers, invalid=ns.invalid, seed=seed,
                         d_range=cfg.d_range, scale=cfg.scale)
        frame_boxes = boxes
        if not boxes and ns.random_boxes > 0:
            try:
                frame_boxes = random_boxes(np.random.default_rng([seed, 1]), spec, ns.random_boxes, cfg.stixel_width)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
        spec = dataclasses.replace(spec, boxes=frame_boxes)
        img, labels = generate(spec)
        frame = f"frame_{i:04d}"
        write_pgm(outdir / f"{frame}.pgm", disparity_to_raw(img, cfg.scale, cfg.invalid_value))
        records.extend(ground_truth(spec, labels, cfg.stixel_width, frame))
    write_records(records, outdir / GT_FILE)
    print(f"{ns.frames} frame(s) and {GT_FILE} written to {outdir}", file=out)
    return EXIT_OK


def cmd_oracle_fuzz(ns, cfg: RunConfig, out) -> int:
    """Compare the solver with exhaustive search on small random columns."""
    from .oracle import MAX_HEIGHT, brute_force_column, score_direct

    if not 1 <= ns.max_height <= MAX_HEIGHT:
        raise UsageError(f"--max-height must be in [1, {MAX_HEIGHT}]")
    rng = np.random.default_rng(ns.seed)
    bad = 0
    for it in range(ns.columns):
        h = int(rng.integers(1, ns.max_height + 1))
        d = int(rng.integers(4, 17))

        def weight():
            return float(rng.choice([0.0, rng.uniform(0, 5), math.inf]))

        prior = PriorParams(
            c_bic=float(rng.choice([0.0, rng.uniform(0, 5)])), c_gravity=weight(), c_ordering=weight(),
            c_diving=weight(), ordering_margin=float(rng.choice([0.0, rng.uniform(0, 2)])),
            first_ground=float(rng.uniform(0, 3)), first_object=weight(), first_sky=weight(),
        )
        params = StixelParams(
            ground=GroundModel(float(rng.uniform(0.2, 2)), float(rng.uniform(-2, h + 2))),
            sensor=SensorParams(p_out=float(rng.uniform(0.05, 0.5)), d_range=d),
            prior=prior,
        )
        col = rng.uniform(0, d, h)
        col[rng.random(h) < 0.1] = np.nan
        result = solve_frame(ColumnImage(col[None, :], d), build_pair_cost_lut(params.sensor), params)[0]
        expected = brute_force_column(col, params).cost
        rescored = score_direct(col, result.stixels, params)
        if not (abs(result.cost - expected) <= 1e-9 or result.cost == expected) or not (
                abs(rescored - result.cost) <= 1e-6 or rescored == result.cost):
            bad += 1
            print(f"column {it}: solver {result.cost!r} oracle {expected!r} rescored {rescored!r}", file=out)
    print(f"{ns.columns - bad}/{ns.columns} columns agree", file=out)
    return EXIT_OK if bad == 0 else EXIT_DATA


# -- parser ----------------------------------------------------------------

VISIBLE = ("estimate", "bench", "eval", "synth")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stixels", description="Stixel estimation from disparity maps.")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(VISIBLE) + "}", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("estimate", help="estimate stixels for disparity images")
    p.add_argument("inputs", nargs="+", help="disparity files or directories of .pgm files")
    p.add_argument("-o", "--output", required=True, help="stixel record file to write")
    p.add_argument("--overlay", metavar="DIR", help="also write one overlay pixmap per frame here")
    add_config_args(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bench", help="measure per-frame latency")
    p.add_argument("input", nargs="?", help="disparity file (default: a synthetic scene)")
    p.add_argument("--width", type=int, default=1024, help="synthetic scene width (default 1024)")
    p.add_argument("--height", type=int, default=440, help="synthetic scene height (default 440)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scaling", action="store_true", help="also fit height and column-count exponents")
    p.add_argument("--scaling-columns", type=int, default=16, help="columns in the height series (default 16)")
    p.add_argument("--scaling-height", type=int, default=440, help="height in the column series (default 440)")
    add_config_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="score predicted stixels against ground truth")
    p.add_argument("pred", help="predicted stixel records")
    p.add_argument("gt", help="ground-truth stixel records")
    add_config_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate synthetic scenes with ground truth")
    p.add_argument("outdir")
    p.add_argument("--frames", type=int, default=1)
    p.add_argument("--width", type=int, default=1024)
    p.add_argument("--height", type=int, default=440)
    p.add_argument("--box", action="append", default=[], metavar="X0,X1,BASE,HEIGHT,DISP",
                   help="fronto-parallel box; repeatable. Base and height are in rows from the bottom")
    p.add_argument("--random-boxes", type=int, default=3, help="random boxes per frame when no --box is given")
    p.add_argument("--noise", type=float, default=0.5, help="Gaussian noise sigma (default 0.5)")
    p.add_argument("--outliers", type=float, default=0.02, help="outlier pixel fraction (default 0.02)")
    p.add_argument("--invalid", type=float, default=0.0, help="invalid pixel fraction (default 0)")
    p.add_argument("--seed", type=int, default=0, help="seed of the first frame; frame i uses seed + i")
    add_config_args(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("oracle-fuzz")
    p.add_argument("--columns", type=int, default=200)
    p.add_argument("--max-height", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    add_config_args(p)
    p.set_defaults(func=cmd_oracle_fuzz)
    return parser


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    try:
        ns = build_parser().parse_args(argv)
        cfg = config_from_args(ns)
        return ns.func(ns, cfg, out)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ColumnError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
