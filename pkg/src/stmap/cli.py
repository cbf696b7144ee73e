"""Command-line front end.

Subcommands: synth, scan, dem (baseline|gaussian), hd
(fast|stochastic|baseline|oracle), eval, bench, pipeline.  Exit codes:
0 ok, 2 config/usage error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np


def _add_threads(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("STMAP_THREADS", "0")) or None,
        help="cap worker threads (default: STMAP_THREADS or library default)",
    )


def _apply_threads(args) -> None:
    if getattr(args, "threads", None):
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stmap", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a ground-truth testbed terrain")
    p.add_argument("--out", required=True, help="output grid path")
    p.add_argument("--extent", type=float, default=50.0)
    p.add_argument("--resolution", type=float, default=0.1)
    p.add_argument("--n-rocks", type=int, default=0)
    p.add_argument("--rock-diameter", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--base-amplitude", type=float, default=0.0, help="fractal base RMS amplitude (m)")
    p.add_argument("--base-hurst", type=float, default=0.8)
    p.add_argument("--complexity", type=float, default=0.0)
    p.add_argument("--rocks-out", help="optional rock list CSV path")
    p.add_argument("--format", choices=("ascii", "binary"), default="binary")

    p = sub.add_parser("scan", help="simulate a LiDAR scan of a truth grid")
    p.add_argument("--truth", required=True)
    p.add_argument("--out", required=True, help="output cloud path (.csv or binary)")
    p.add_argument("--config", help="flat key-value file with scan.* keys (flags override)")
    p.add_argument("--range", type=float)
    p.add_argument("--angle", type=float)
    p.add_argument("--detector", type=int)
    p.add_argument("--sigma3-500m", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.add_argument("--geometry", action="store_true", help="print the nominal coverage/GSD and exit")

    p = sub.add_parser("dem", help="construct a DEM from a point cloud")
    p.add_argument("mode", choices=("baseline", "gaussian"))
    p.add_argument("--cloud", required=True)
    p.add_argument("--out", required=True, help="output grid path; gaussian mode appends _mean/_var")
    p.add_argument("--cell-size", type=float, help="output resolution (m/pix)")
    p.add_argument("--auto-gsd", action="store_true", help="baseline: use the cloud's average GSD")
    p.add_argument("--sigma-f", type=float)
    p.add_argument("--length-scale", type=float)
    p.add_argument("--sigma-eps", type=float, default=0.0, help="cloud elevation noise std (m)")
    p.add_argument("--format", choices=("ascii", "binary"), default="binary")

    p = sub.add_parser("hd", help="evaluate landing safety on a DEM")
    p.add_argument("detector", choices=("fast", "stochastic", "baseline", "oracle"))
    p.add_argument("--dem", help="elevation grid (fast/baseline/oracle)")
    p.add_argument("--gdem", nargs=2, metavar=("MEAN", "VAR"), help="gaussian DEM grids (stochastic)")
    p.add_argument("--lander", help="lander config file (lander.* keys)")
    p.add_argument("--out", required=True, help="output prefix for safety rasters")
    p.add_argument("--dtheta", type=float, default=1.0, help="orientation step, degrees")
    p.add_argument("--slope-bound", choices=("sin", "tan"), default="tan")
    p.add_argument("--sigma-pixel", type=float, default=0.0, help="baseline per-pixel noise std (m)")
    p.add_argument("--format", choices=("ascii", "binary"), default="binary")
    _add_threads(p)

    p = sub.add_parser("eval", help="compare a prediction against a truth raster")
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--pred-var", help="variance grid (nlpd)")
    p.add_argument("--metric", choices=("rmse", "nlpd", "pr", "missing"), required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--border", type=float, default=0.0, help="excluded border width (m)")
    p.add_argument("--out", help="output raster path (missing)")

    p = sub.add_parser("bench", help="runtime scaling and backend benchmarks")
    p.add_argument("--resolutions", default="0.4,0.2", help="comma-separated m/pix list")
    p.add_argument("--extent", type=float, default=100.0)
    p.add_argument("--n-rocks", type=int, default=125)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backends", action="store_true", help="compare compiled vs pure-Python kernels instead")
    p.add_argument("--json", dest="as_json", action="store_true")
    _add_threads(p)

    p = sub.add_parser("pipeline", help="run the full synth/scan/dem/hd/eval pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="artifact directory")
    _add_threads(p)

    return ap


def _load_lander(path: str | None):
    from .config import Config
    from .pipeline import lander_from_config

    cfg = Config.load(path) if path else Config()
    return lander_from_config(cfg)


def cmd_synth(args) -> int:
    from . import terrain
    from .grid import grid_write

    cfg = terrain.TerrainConfig(
        extent=(args.extent, args.extent),
        resolution=args.resolution,
        n_rocks=args.n_rocks,
        rock_diameter=args.rock_diameter,
        seed=args.seed,
    )
    truth, rocks = terrain.gen_rock_field(cfg)
    if args.base_amplitude > 0:
        base = terrain.gen_fractal_base(
            cfg.extent, args.resolution, hurst=args.base_hurst, amplitude=args.base_amplitude, seed=args.seed + 1000
        )
        truth = terrain.superpose_complexity(truth, base, args.complexity)
    grid_write(truth, args.out, args.format)
    if args.rocks_out:
        terrain.rocks_write(rocks, args.rocks_out)
    print(f"wrote {args.out}: {truth.values.shape[1]}x{truth.values.shape[0]} cells at {args.resolution} m/pix")
    return 0


def cmd_scan(args) -> int:
    from .config import Config
    from .grid import cloud_write, grid_read
    from .lidar import ScanConfig, nominal_scan_geometry, simulate_scan

    file_cfg = Config.load(args.config) if args.config else Config()

    def pick(flag, key, default):
        return flag if flag is not None else type(default)(file_cfg.get(key, default))

    cfg = ScanConfig(
        range=pick(args.range, "scan.range", 500.0),
        off_nadir_angle=pick(args.angle, "scan.angle", 0.0),
        detector=pick(args.detector, "scan.detector", 256),
        sigma3_at_500m=pick(args.sigma3_500m, "scan.sigma3_500m", 0.05),
        seed=pick(args.seed, "scan.seed", 0),
    )
    if args.geometry:
        cov_x, cov_y, gsd_x, gsd_y = nominal_scan_geometry(cfg)
        print(f"coverage_x = {cov_x:.2f}\ncoverage_y = {cov_y:.2f}\ngsd_x = {gsd_x:.3f}\ngsd_y = {gsd_y:.3f}")
        return 0
    truth = grid_read(args.truth)
    cloud = simulate_scan(truth, cfg)
    cloud_write(cloud, args.out, args.format)
    print(f"wrote {args.out}: {len(cloud)} points, sigma_eps = {cloud.sigma_eps:.6g} m")
    return 0


def cmd_dem(args) -> int:
    from . import dem as dem_mod
    from .gdem import GrfHyper, build_gaussian_dem, default_hyper
    from .grid import cloud_read, grid_write

    cloud = cloud_read(args.cloud, sigma_eps=args.sigma_eps)
    if args.mode == "baseline":
        cell = None if args.auto_gsd or args.cell_size is None else args.cell_size
        out = dem_mod.dem_from_cloud_auto(cloud, cell_size=cell)
        grid_write(out, args.out, args.format)
        print(f"wrote {args.out}: {out.ncols}x{out.nrows} at {out.cell_size:.4g} m/pix")
        return 0
    if args.cell_size is None:
        raise SystemExit("dem gaussian requires --cell-size")
    import math

    ox, oy = cloud.x.min(), cloud.y.min()
    ncols = max(1, int(math.ceil((cloud.x.max() - ox) / args.cell_size)))
    nrows = max(1, int(math.ceil((cloud.y.max() - oy) / args.cell_size)))
    hyper = None
    if args.sigma_f is not None or args.length_scale is not None:
        base = default_hyper(cloud)
        hyper = GrfHyper(
            sigma_f=args.sigma_f if args.sigma_f is not None else base.sigma_f,
            length_scale=args.length_scale if args.length_scale is not None else base.length_scale,
            sigma_eps=args.sigma_eps,
        )
    gauss = build_gaussian_dem(cloud, (ox, oy), args.cell_size, (nrows, ncols), hyper)
    stem, ext = os.path.splitext(args.out)
    grid_write(gauss.mean, f"{stem}_mean{ext or '.grid'}", args.format)
    grid_write(gauss.variance, f"{stem}_var{ext or '.grid'}", args.format)
    print(f"wrote {stem}_mean/_var: {ncols}x{nrows} at {args.cell_size} m/pix")
    return 0


def cmd_hd(args) -> int:
    from . import hazard
    from .grid import GaussianGrid, GeoGrid, grid_read, grid_write
    from .pipeline import _bool_grid, _float_grid

    geom = _load_lander(args.lander)
    prefix = args.out

    def write(name, grid):
        grid_write(grid, f"{prefix}_{name}.grid", args.format)

    if args.detector == "stochastic":
        if not args.gdem:
            raise SystemExit("hd stochastic requires --gdem MEAN VAR")
        gdem = GaussianGrid(grid_read(args.gdem[0]), grid_read(args.gdem[1]))
        m = hazard.hd_fast_stochastic(gdem, geom, slope_bound=args.slope_bound)
        template = gdem.mean
        write("pslope", _float_grid(template, m.p_slope, m.valid))
        write("prough", _float_grid(template, m.p_rough, m.valid))
        b = m.binary()
        write("safe", _bool_grid(template, b.safe, b.valid))
        print(f"wrote {prefix}_pslope/_prough/_safe ({int(b.safe.sum())} safe cells)")
        return 0
    if not args.dem:
        raise SystemExit(f"hd {args.detector} requires --dem")
    dem = grid_read(args.dem)
    if args.detector == "fast":
        m = hazard.hd_fast_deterministic(dem, geom)
    elif args.detector == "oracle":
        m = hazard.hd_exact_oracle(dem, geom, dtheta_deg=args.dtheta)
    else:
        sm = hazard.hd_baseline_stochastic(dem, args.sigma_pixel, geom, dtheta_deg=args.dtheta)
        write("pslope", _float_grid(dem, sm.p_slope, sm.valid))
        write("prough", _float_grid(dem, sm.p_rough, sm.valid))
        b = sm.binary()
        write("safe", _bool_grid(dem, b.safe, b.valid))
        print(f"wrote {prefix}_pslope/_prough/_safe ({int(b.safe.sum())} safe cells)")
        return 0
    write("safe", _bool_grid(dem, m.safe, m.valid))
    write("slope", _float_grid(dem, m.slope_deg, m.valid))
    write("rough", _float_grid(dem, m.rough_m, m.valid))
    print(f"wrote {prefix}_safe/_slope/_rough ({int(m.safe.sum())} safe cells)")
    return 0


def cmd_eval(args) -> int:
    from . import metrics
    from .grid import GaussianGrid, grid_read, grid_write, nearest_resample, GeoGrid

    truth = grid_read(args.truth)
    pred = grid_read(args.pred)
    pred_t = nearest_resample(pred, (truth.origin_x, truth.origin_y), truth.cell_size, truth.values.shape)
    if args.metric == "rmse":
        print(f"rmse = {metrics.rmse(truth, pred_t):.6g}")
        return 0
    if args.metric == "nlpd":
        if not args.pred_var:
            raise SystemExit("eval --metric nlpd requires --pred-var")
        var = nearest_resample(grid_read(args.pred_var), (truth.origin_x, truth.origin_y), truth.cell_size, truth.values.shape)
        print(f"nlpd = {metrics.nlpd(truth, GaussianGrid(pred_t, var)):.6g}")
        return 0
    truth_safe = truth.values > 0.5
    mask = metrics.evaluation_mask(truth.values.shape, truth.cell_size, args.border, truth.valid, pred_t.valid)
    if args.metric == "pr":
        pr = metrics.precision_recall(np.nan_to_num(pred_t.values, nan=0.0), truth_safe, args.threshold, mask)
        for k, v in pr.as_dict().items():
            print(f"{k} = {v}")
        return 0
    miss = metrics.hazard_missing_map(truth_safe, pred_t.values)
    if args.out:
        grid_write(GeoGrid(truth.origin_x, truth.origin_y, truth.cell_size, miss), args.out, "binary")
        print(f"wrote {args.out}")
    else:
        print(f"missing_mean = {np.nanmean(miss):.6g}\nmissing_max = {np.nanmax(miss):.6g}")
    return 0


def cmd_bench(args) -> int:
    from .bench import bench_backends, bench_runtime

    if args.backends:
        out = bench_backends(repeats=args.repeats, seed=args.seed)
        if args.as_json:
            print(json.dumps(out, indent=2))
        else:
            for k, v in out.items():
                if isinstance(v, dict):
                    parts = ", ".join(f"{b}={t:.5f}s" for b, t in v.items() if b != "speedup")
                    sp = f" (speedup {v['speedup']:.1f}x)" if "speedup" in v else ""
                    print(f"{k}: {parts}{sp}")
                else:
                    print(f"{k}: {v}")
        return 0
    resolutions = [float(r) for r in args.resolutions.split(",") if r.strip()]
    result = bench_runtime(
        resolutions, extent=args.extent, n_rocks=args.n_rocks, seed=args.seed, repeats=args.repeats
    )
    if args.as_json:
        print(
            json.dumps(
                {
                    "rows": [vars(r) for r in result.rows],
                    "exponents": result.exponents,
                    "meta": result.meta,
                },
                indent=2,
            )
        )
    else:
        print(result.table())
    return 0


def cmd_pipeline(args) -> int:
    from .config import Config
    from .pipeline import pipeline_run

    cfg = Config.load(args.config)
    manifest = pipeline_run(cfg, args.out)
    print(f"pipeline complete: {len(manifest['artifacts'])} artifacts in {args.out}")
    return 0


def main(argv=None) -> int:
    from .config import ConfigError
    from .pipeline import StageError

    args = build_parser().parse_args(argv)
    _apply_threads(args)
    handlers = {
        "synth": cmd_synth,
        "scan": cmd_scan,
        "dem": cmd_dem,
        "hd": cmd_hd,
        "eval": cmd_eval,
        "bench": cmd_bench,
        "pipeline": cmd_pipeline,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
