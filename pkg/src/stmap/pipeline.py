"""End-to-end experiment pipeline with a reproducible artifact manifest.

Stages: terrain synthesis -> LiDAR scan -> DEM construction (baseline
and/or Gaussian) -> hazard detection -> evaluation.  Every intermediate
raster is written in the binary grid format; the manifest records the
config hash, seeds, kernel backend, and a content hash per artifact, so a
rerun with the same config is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np

from . import _kernels, dem as dem_mod, gdem as gdem_mod, hazard, lidar, metrics, terrain
from .config import Config, ConfigError
from .grid import GaussianGrid, GeoGrid, cloud_write, grid_write, nearest_resample


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def lander_from_config(cfg: Config):
    from .lander import LanderGeom

    body = cfg.get("lander.body_radius", "auto")
    return LanderGeom(
        n_legs=cfg.get_int("lander.n_legs", 3),
        leg_circle_radius=cfg.get_float("lander.leg_circle_radius", 2.5),
        pad_radius=cfg.get_float("lander.pad_radius", 0.15),
        body_radius=None if body in (None, "auto") else float(body),
        slope_threshold=cfg.get_float("lander.slope_threshold", 10.0),
        rough_threshold=cfg.get_float("lander.rough_threshold", 0.25),
    )


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class _Run:
    def __init__(self, out_dir: Path):
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: dict[str, str] = {}
        self.timings: dict[str, float] = {}

    def write_grid(self, name: str, grid: GeoGrid) -> None:
        path = self.out / f"{name}.grid"
        grid_write(grid, path, "binary")
        self.artifacts[path.name] = _sha256_file(path)

    def write_cloud(self, name: str, cloud) -> None:
        path = self.out / f"{name}.bin"
        cloud_write(cloud, path, "binary")
        self.artifacts[path.name] = _sha256_file(path)

    def write_text(self, name: str, text: str) -> None:
        path = self.out / name
        path.write_text(text)
        self.artifacts[path.name] = _sha256_file(path)


def _bool_grid(template: GeoGrid, flags: np.ndarray, valid: np.ndarray) -> GeoGrid:
    vals = np.where(valid, flags.astype(np.float64), np.nan)
    return GeoGrid(template.origin_x, template.origin_y, template.cell_size, vals, template.nodata)


def _float_grid(template: GeoGrid, vals: np.ndarray, valid: np.ndarray) -> GeoGrid:
    out = np.where(valid, vals, np.nan)
    return GeoGrid(template.origin_x, template.origin_y, template.cell_size, out, template.nodata)


def _write_safety(run: _Run, name: str, m: hazard.SafetyMap, template: GeoGrid) -> None:
    run.write_grid(f"{name}_safe", _bool_grid(template, m.safe, m.valid))
    run.write_grid(f"{name}_slope", _float_grid(template, m.slope_deg, m.valid))
    run.write_grid(f"{name}_rough", _float_grid(template, m.rough_m, m.valid))


def _write_stochastic(run: _Run, name: str, m: hazard.StochasticSafetyMap, template: GeoGrid) -> None:
    run.write_grid(f"{name}_pslope", _float_grid(template, m.p_slope, m.valid))
    run.write_grid(f"{name}_prough", _float_grid(template, m.p_rough, m.valid))
    b = m.binary()
    run.write_grid(f"{name}_safe", _bool_grid(template, b.safe, b.valid))


def pipeline_run(cfg: Config, out_dir) -> dict:
    """Run the configured pipeline; returns the manifest dictionary.

    Comma lists in ``scan.range`` / ``scan.angle`` expand into a sweep: one
    artifact subdirectory per combination plus a sweep manifest with each
    configuration's nominal scan geometry.
    """
    ranges = cfg.get_list("scan.range", "500")
    angles = cfg.get_list("scan.angle", "0")
    if len(ranges) > 1 or len(angles) > 1:
        return _pipeline_sweep(cfg, out_dir, ranges, angles)
    run = _Run(Path(out_dir))
    manifest: dict = {
        "config_sha256": cfg.sha256(),
        "kernel_backend": _kernels.BACKEND,
        "seeds": {
            "terrain": cfg.get_int("terrain.seed", 0),
            "base": cfg.get_int("terrain.base_seed", cfg.get_int("terrain.seed", 0) + 1000),
            "scan": cfg.get_int("scan.seed", 0),
        },
    }
    cfg.save(run.out / "config.cfg")
    run.artifacts["config.cfg"] = _sha256_file(run.out / "config.cfg")

    # --- synth ---
    stage = "synth"
    t0 = time.perf_counter()
    try:
        extent = (
            cfg.get_float("terrain.extent", 50.0),
            cfg.get_float("terrain.extent_y", cfg.get_float("terrain.extent", 50.0)),
        )
        tcfg = terrain.TerrainConfig(
            extent=extent,
            resolution=cfg.get_float("terrain.resolution", 0.1),
            n_rocks=cfg.get_int("terrain.n_rocks", 0),
            rock_diameter=cfg.get_float("terrain.rock_diameter", 1.0),
            seed=cfg.get_int("terrain.seed", 0),
            height_mode=cfg.get_str("terrain.height_mode", "half_diameter"),
        )
        truth, rocks = terrain.gen_rock_field(tcfg)
        if cfg.get_str("terrain.base", "none") == "fractal":
            base = terrain.gen_fractal_base(
                extent,
                tcfg.resolution,
                hurst=cfg.get_float("terrain.base_hurst", 0.8),
                amplitude=cfg.get_float("terrain.base_amplitude", 0.0),
                seed=manifest["seeds"]["base"],
            )
            truth = terrain.superpose_complexity(truth, base, cfg.get_float("terrain.complexity", 0.0))
            run.write_grid("base", base)
        run.write_grid("truth", truth)
        rocks_path = run.out / "rocks.csv"
        terrain.rocks_write(rocks, rocks_path)
        run.artifacts["rocks.csv"] = _sha256_file(rocks_path)
    except ConfigError:
        raise
    except Exception as e:
        raise StageError(stage, e) from e
    run.timings[stage] = time.perf_counter() - t0

    # --- scan ---
    stage = "scan"
    t0 = time.perf_counter()
    try:
        scfg = lidar.ScanConfig(
            range=cfg.get_float("scan.range", 500.0),
            off_nadir_angle=cfg.get_float("scan.angle", 0.0),
            detector=cfg.get_int("scan.detector", 256),
            sigma3_at_500m=cfg.get_float("scan.sigma3_500m", 0.05),
            seed=manifest["seeds"]["scan"],
        )
        cloud = lidar.simulate_scan(truth, scfg)
        run.write_cloud("cloud", cloud)
        manifest["scan"] = {
            "n_points": len(cloud),
            "sigma_ray": scfg.sigma_ray,
            "sigma_eps": cloud.sigma_eps,
        }
    except ConfigError:
        raise
    except Exception as e:
        raise StageError(stage, e) from e
    run.timings[stage] = time.perf_counter() - t0

    geom = lander_from_config(cfg)

    # --- dem ---
    stage = "dem"
    t0 = time.perf_counter()
    base_dem = None
    gauss = None
    try:
        if cfg.get_bool("dem.baseline", True):
            base_dem = dem_mod.dem_from_cloud_auto(cloud, snap_origin=truth.origin_x)
            run.write_grid("dem_baseline", base_dem)
        if cfg.get_bool("dem.gaussian", True):
            cell = cfg.get_float("dem.cell_size", truth.cell_size)
            ox = truth.origin_x + math.floor((cloud.x.min() - truth.origin_x) / cell) * cell
            oy = truth.origin_y + math.floor((cloud.y.min() - truth.origin_y) / cell) * cell
            ncols = max(1, int(math.ceil((cloud.x.max() - ox) / cell)))
            nrows = max(1, int(math.ceil((cloud.y.max() - oy) / cell)))
            hyper = hyper_from_config(cfg, cloud)
            gauss = gdem_mod.build_gaussian_dem(cloud, (ox, oy), cell, (nrows, ncols), hyper)
            run.write_grid("gdem_mean", gauss.mean)
            run.write_grid("gdem_var", gauss.variance)
    except ConfigError:
        raise
    except Exception as e:
        raise StageError(stage, e) from e
    run.timings[stage] = time.perf_counter() - t0

    # --- hd ---
    stage = "hd"
    t0 = time.perf_counter()
    detectors = cfg.get_list("hd.detectors", "fast,stochastic,baseline,oracle")
    dtheta = cfg.get_float("hd.dtheta", 1.0)
    maps: dict[str, object] = {}
    try:
        if "oracle" in detectors:
            maps["oracle"] = hazard.hd_exact_oracle(truth, geom, dtheta_deg=dtheta, safety_only=True)
            _write_safety(run, "hd_oracle", maps["oracle"], truth)
        if "fast" in detectors:
            maps["fast"] = hazard.hd_fast_deterministic(truth, geom)
            _write_safety(run, "hd_fast", maps["fast"], truth)
        if "stochastic" in detectors:
            if gauss is None:
                raise ConfigError("hd.detectors includes 'stochastic' but dem.gaussian is off")
            maps["stochastic"] = hazard.hd_fast_stochastic(gauss, geom, slope_bound=cfg.get_str("hd.slope_bound", "tan"))
            _write_stochastic(run, "hd_stochastic", maps["stochastic"], gauss.mean)
        if "baseline" in detectors:
            if base_dem is None:
                raise ConfigError("hd.detectors includes 'baseline' but dem.baseline is off")
            maps["baseline"] = hazard.hd_baseline_stochastic(
                base_dem, manifest["scan"]["sigma_ray"], geom, dtheta_deg=dtheta
            )
            _write_stochastic(run, "hd_baseline", maps["baseline"], base_dem)
    except ConfigError:
        raise
    except Exception as e:
        raise StageError(stage, e) from e
    run.timings[stage] = time.perf_counter() - t0

    # --- eval ---
    stage = "eval"
    t0 = time.perf_counter()
    report: dict[str, float | int | str] = {}
    try:
        if cfg.get_bool("eval.enabled", True):
            report = evaluate(run, truth, geom, base_dem, gauss, maps, manifest)
            run.write_text("eval.txt", "".join(f"{k} = {report[k]}\n" for k in sorted(report)))
    except Exception as e:
        raise StageError(stage, e) from e
    run.timings[stage] = time.perf_counter() - t0

    manifest["metrics"] = report
    manifest["artifacts"] = dict(sorted(run.artifacts.items()))
    (run.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (run.out / "timings.json").write_text(json.dumps(run.timings, indent=2, sort_keys=True) + "\n")
    return manifest


def _pipeline_sweep(cfg: Config, out_dir, ranges: list[str], angles: list[str]) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sweep: dict = {"config_sha256": cfg.sha256(), "runs": {}}
    for r in ranges:
        for a in angles:
            sub = Config(dict(cfg.data))
            sub.data["scan.range"] = r
            sub.data["scan.angle"] = a
            name = f"r{float(r):g}_a{float(a):g}"
            manifest = pipeline_run(sub, out / name)
            scfg = lidar.ScanConfig(
                range=float(r),
                off_nadir_angle=float(a),
                detector=cfg.get_int("scan.detector", 256),
                sigma3_at_500m=cfg.get_float("scan.sigma3_500m", 0.05),
            )
            cov_x, cov_y, gsd_x, gsd_y = lidar.nominal_scan_geometry(scfg)
            sweep["runs"][name] = {
                "range": float(r),
                "angle": float(a),
                "nominal": {"coverage_x": cov_x, "coverage_y": cov_y, "gsd_x": gsd_x, "gsd_y": gsd_y},
                "config_sha256": manifest["config_sha256"],
                "metrics": manifest.get("metrics", {}),
            }
    (out / "sweep_manifest.json").write_text(json.dumps(sweep, indent=2, sort_keys=True) + "\n")
    return sweep


def hyper_from_config(cfg: Config, cloud) -> gdem_mod.GrfHyper | None:
    """GRF hyperparameters from config; 'auto' entries use the scale-aware
    defaults."""
    sf = cfg.get("dem.sigma_f", "auto")
    ls = cfg.get("dem.length_scale", "auto")
    se = cfg.get("dem.sigma_eps", "auto")
    center = cfg.get_bool("dem.center_mean", True)
    if sf == "auto" and ls == "auto" and se == "auto" and center:
        return None  # plain defaults
    default = gdem_mod.default_hyper(cloud)
    return gdem_mod.GrfHyper(
        sigma_f=default.sigma_f if sf == "auto" else float(sf),
        length_scale=default.length_scale if ls == "auto" else float(ls),
        sigma_eps=default.sigma_eps if se == "auto" else float(se),
        center_mean=center,
    )


def evaluate(run: _Run, truth: GeoGrid, geom, base_dem, gauss, maps: dict, manifest: dict) -> dict:
    """DEM quality and safety metrics against the truth grid and oracle."""
    report: dict[str, float | int | str] = {}
    dims = truth.values.shape
    origin = (truth.origin_x, truth.origin_y)

    def _nlpd_or_nan(t, est):
        # Undefined for zero-variance (noise-free) runs; NaN keeps the report shape.
        try:
            return metrics.nlpd(t, est)
        except ValueError:
            return float("nan")

    if base_dem is not None:
        est = nearest_resample(base_dem, origin, truth.cell_size, dims)
        report["rmse_baseline"] = metrics.rmse(truth, est)
        sigma = manifest["scan"]["sigma_ray"]
        var = GeoGrid(truth.origin_x, truth.origin_y, truth.cell_size, np.where(est.valid, sigma**2, np.nan))
        report["nlpd_baseline"] = _nlpd_or_nan(truth, GaussianGrid(est, var))
    if gauss is not None:
        est_m = nearest_resample(gauss.mean, origin, truth.cell_size, dims)
        est_v = nearest_resample(gauss.variance, origin, truth.cell_size, dims)
        report["rmse_proposed"] = metrics.rmse(truth, est_m)
        report["nlpd_proposed"] = _nlpd_or_nan(truth, GaussianGrid(est_m, est_v))

    oracle = maps.get("oracle")
    if oracle is not None:
        emask = metrics.evaluation_mask(dims, truth.cell_size, geom.footprint_radius, oracle.valid)
        truth_by_kind = {"slope": oracle.slope_safe, "rough": oracle.rough_safe, "all": oracle.safe}
        for name in ("fast", "stochastic", "baseline"):
            m = maps.get(name)
            if m is None:
                continue
            if isinstance(m, hazard.StochasticSafetyMap):
                template = gauss.mean if name == "stochastic" else base_dem
                probs = {}
                for kind, p in (("slope", m.p_slope), ("rough", m.p_rough)):
                    grid_p = nearest_resample(_float_grid(template, p, m.valid), origin, truth.cell_size, dims)
                    probs[kind] = grid_p
                    miss = metrics.hazard_missing_map(
                        truth_by_kind[kind], np.where(grid_p.valid, grid_p.values, np.nan)
                    )
                    run.write_grid(f"missing_{kind}_{name}", GeoGrid(*origin, truth.cell_size, miss))
                pvalid = probs["slope"].valid & probs["rough"].valid
                pred_by_kind = {
                    "slope": probs["slope"].values > 0.5,
                    "rough": probs["rough"].values > 0.5,
                }
                pred_by_kind["all"] = pred_by_kind["slope"] & pred_by_kind["rough"]
            else:
                pvalid = m.valid
                pred_by_kind = {"slope": m.slope_safe, "rough": m.rough_safe, "all": m.safe}
            for kind, pred in pred_by_kind.items():
                pr = metrics.precision_recall(pred, truth_by_kind[kind], mask=emask & pvalid)
                report[f"precision_{kind}_{name}"] = pr.precision
                report[f"recall_{kind}_{name}"] = pr.recall
                if kind == "all":
                    report[f"true_safe_{name}"] = pr.true_safe
                    report[f"false_safe_{name}"] = pr.false_safe
    return report
