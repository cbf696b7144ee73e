"""Runtime benchmarks.

``bench_runtime`` reproduces the resolution-scaling comparison between the
orientation-sweep baseline (O(p^5): the orientation count grows with
resolution) and the height-difference pipeline (O(p^4)), per stage (point
cloud to DEM, DEM to safety map).  Timings are warm-run medians and exclude
file I/O.  ``bench_backends`` compares the compiled and pure-Python kernel
backends on the same inputs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ._kernels import _py
from .gdem import build_gaussian_dem, default_hyper, delaunay_triangulate
from .grid import GaussianGrid, GeoGrid
from .hazard import baseline_dtheta, hd_baseline_stochastic, hd_fast_stochastic
from .lander import LanderGeom
from .lidar import ScanConfig, simulate_scan
from .terrain import TerrainConfig, gen_rock_field

try:
    from ._kernels import _core
except ImportError:
    _core = None


def _timed(fn, repeats: int):
    """Warm call plus ``repeats`` timed calls; returns (median s, result)."""
    result = fn()
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), result


@dataclass
class BenchRow:
    resolution: float
    proposed_dem: float
    proposed_safety: float
    baseline_safety: float
    baseline_dem: float | None = None  # GSD-locked; reported once, not per resolution


@dataclass
class BenchResult:
    rows: list[BenchRow] = field(default_factory=list)
    exponents: dict[str, float] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def table(self) -> str:
        lines = ["resolution  proposed_dem  proposed_safety  baseline_safety"]
        for r in self.rows:
            lines.append(
                f"{r.resolution:10.3f}  {r.proposed_dem:12.4f}  {r.proposed_safety:15.4f}  {r.baseline_safety:15.4f}"
            )
        for stage, e in sorted(self.exponents.items()):
            lines.append(f"scaling exponent {stage}: {e:.2f}")
        return "\n".join(lines)


def _fit_exponent(resolutions, times) -> float:
    """Least-squares slope of log(time) against log(pixels per meter)."""
    x = np.log(1.0 / np.asarray(resolutions))
    y = np.log(np.asarray(times))
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def bench_runtime(
    resolutions: list[float],
    extent: float = 100.0,
    n_rocks: int = 125,
    seed: int = 0,
    geom: LanderGeom | None = None,
    repeats: int = 3,
    scan_range: float = 500.0,
    detector: int = 256,
) -> BenchResult:
    """Time both pipelines across output resolutions on one scanned scene.

    The scene is a rock field observed nadir-pointing from ``scan_range``.
    The baseline safety stage runs on a hole-free DEM with the same
    dimensions as the proposed map (its cost depends only on the raster
    size) with the resolution-matched orientation step.
    """
    if geom is None:
        geom = LanderGeom()
    truth, _ = gen_rock_field(TerrainConfig(extent=(extent, extent), resolution=0.1, n_rocks=n_rocks, seed=seed))
    cloud = simulate_scan(truth, ScanConfig(range=scan_range, off_nadir_angle=0.0, detector=detector, seed=seed))
    hyper = default_hyper(cloud)
    result = BenchResult()
    result.meta = {
        "extent_m": extent,
        "n_points": len(cloud),
        "repeats": repeats,
        "gsd_m": None,
    }
    ox, oy = truth.origin_x, truth.origin_y
    for res in resolutions:
        dims = (int(round(extent / res)), int(round(extent / res)))
        t_dem, gauss = _timed(lambda: build_gaussian_dem(cloud, (ox, oy), res, dims, hyper), repeats)
        t_fast, _ = _timed(lambda: hd_fast_stochastic(gauss, geom), repeats)
        dem_in = GeoGrid(ox, oy, res, np.nan_to_num(gauss.mean.values, nan=0.0))
        dtheta = baseline_dtheta(geom, res)
        t_base, _ = _timed(
            lambda: hd_baseline_stochastic(dem_in, cloud.sigma_eps, geom, dtheta_deg=dtheta), repeats
        )
        result.rows.append(BenchRow(res, t_dem, t_fast, t_base))
    if len(resolutions) >= 2:
        rs = [r.resolution for r in result.rows]
        result.exponents = {
            "proposed_dem": _fit_exponent(rs, [r.proposed_dem for r in result.rows]),
            "proposed_safety": _fit_exponent(rs, [r.proposed_safety for r in result.rows]),
            "baseline_safety": _fit_exponent(rs, [r.baseline_safety for r in result.rows]),
        }
    return result


def bench_backends(size: int = 160, seed: int = 0, repeats: int = 3) -> dict:
    """Compare compiled vs pure-Python kernels on identical inputs.

    Returns {kernel: {backend: seconds, 'speedup': compiled advantage}}.
    """
    rng = np.random.default_rng(seed)
    dem = rng.normal(0, 0.1, (size, size))
    geom = LanderGeom()
    cs = 0.1

    from .lander import detector_masks, leg_triples, mask_offsets

    (l_du, l_dv, _, _), (u_du, u_dv, _, _) = detector_masks(geom, cs)
    pad_du, pad_dv, _, _ = mask_offsets(0.0, geom.pad_radius, cs)
    sd = np.abs(rng.normal(0.02, 0.005, (size, size)))

    n_pts = 60
    pts = rng.uniform(0.5, size * cs - 0.5, (n_pts, 2))
    pz = rng.normal(0, 0.1, n_pts)
    tri = delaunay_triangulate(pts)
    px, py = np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1])

    from .hazard import _orientation_tables

    _, leg_x, leg_y, leg_du_t, leg_dv_t = _orientation_tables(geom, cs, 6.0)
    disk_du, disk_dv, disk_x, disk_y = mask_offsets(0.0, geom.body_radius, cs)
    pad = _py.footpad_max(dem, pad_du, pad_dv)

    cases = {
        "mask_extremes": lambda impl: impl.mask_extremes(dem, l_du, l_dv),
        "mask_extremes_gauss3": lambda impl: impl.mask_extremes_gauss3(dem, sd, l_du, l_dv),
        "footpad_max": lambda impl: impl.footpad_max(dem, pad_du, pad_dv),
        "exact_scan": lambda impl: impl.exact_scan(
            dem, pad, cs, leg_du_t, leg_dv_t, leg_x, leg_y, leg_triples(geom.n_legs),
            disk_du, disk_dv, disk_x, disk_y, geom.slope_threshold, geom.rough_threshold, True, True,
        ),
        "rasterize_triangulation": lambda impl: impl.rasterize_triangulation(
            px, py, tri.triangles, tri.neighbors, 0.0, 0.0, cs, size, size
        ),
    }
    out: dict = {"backend_available": _core is not None}
    for name, fn in cases.items():
        entry: dict = {}
        t_py, _ = _timed(lambda: fn(_py), repeats)
        entry["python"] = t_py
        if _core is not None:
            t_cy, _ = _timed(lambda: fn(_core), repeats)
            entry["cython"] = t_cy
            entry["speedup"] = t_py / t_cy if t_cy > 0 else math.inf
        out[name] = entry
    return out
