"""Landing safety evaluators.

Four detectors over a common lander geometry:

* ``hd_exact_oracle``: brute-force sweep over lander orientations on a
  noise-free DEM; legs read the footpad map, slope comes from the landing
  plane through each leg triple, roughness from the signed plane distance
  over the body-disk cells.  The reference everything else is judged by.
* ``hd_baseline_stochastic``: the same orientation sweep plus a per-pixel
  Gaussian roughness-safety probability (ALHAT-style baseline, O(p^5) with
  an orientation count proportional to resolution).
* ``hd_fast_deterministic``: height-difference bounds over the leg annulus
  and footprint disk; provably conservative, single pass, O(p^4).
* ``hd_fast_stochastic``: the fast detector on a Gaussian DEM via the
  3-sigma extremum approximation.

Leg sets repeat with period 2*pi/n_legs, so the orientation sweeps cover
one period; that is equivalent to sweeping the full circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import GaussianGrid, GeoGrid
from .lander import LanderGeom, detector_masks, leg_offsets, leg_triples, mask_offsets


@dataclass
class SafetyMap:
    """Boolean safety rasters plus the metric values that produced them."""

    origin: tuple[float, float]
    cell_size: float
    slope_deg: np.ndarray  # worst slope (oracle) or conservative slope
    rough_m: np.ndarray  # worst roughness or conservative roughness
    slope_safe: np.ndarray  # bool
    rough_safe: np.ndarray  # bool
    valid: np.ndarray  # bool; False where the footprint left the grid

    @property
    def safe(self) -> np.ndarray:
        return self.slope_safe & self.rough_safe & self.valid


@dataclass
class StochasticSafetyMap:
    """Per-cell safety probabilities and the Gaussian summaries behind them."""

    origin: tuple[float, float]
    cell_size: float
    p_slope: np.ndarray
    p_rough: np.ndarray
    valid: np.ndarray
    mu_ll: np.ndarray | None = None
    sigma_ll: np.ndarray | None = None
    mu_ul: np.ndarray | None = None
    sigma_ul: np.ndarray | None = None

    def binary(self, threshold: float = 0.5) -> SafetyMap:
        """Binarized map: safe where the probability exceeds ``threshold``."""
        return SafetyMap(
            self.origin,
            self.cell_size,
            slope_deg=np.where(self.valid, self.p_slope, np.nan),
            rough_m=np.where(self.valid, self.p_rough, np.nan),
            slope_safe=self.p_slope > threshold,
            rough_safe=self.p_rough > threshold,
            valid=self.valid,
        )


def footpad_map(dem: GeoGrid, pad_radius: float) -> GeoGrid:
    """Max elevation over the pad disk around each cell (border cells use
    whatever coverage stays on the grid)."""
    if pad_radius < 0:
        raise ValueError("pad_radius must be non-negative")
    du, dv, _, _ = mask_offsets(0.0, pad_radius, dem.cell_size)
    out = _kernels.footpad_max(dem.values, du, dv)
    return GeoGrid(dem.origin_x, dem.origin_y, dem.cell_size, out, dem.nodata)


def gauss_extremum_approx(variables) -> tuple[tuple[float, float], tuple[float, float]]:
    """3-sigma Gaussian approximation of max_i X_i and min_i X_i.

    ``variables`` is a sequence of (mu, sigma).  Returns
    ((mu_max, sigma_max), (mu_min, sigma_min)) from the envelope of the
    mu_i +/- 3 sigma_i bounds.
    """
    arr = np.asarray(list(variables), dtype=np.float64).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise ValueError("need at least one variable")
    if np.any(arr[:, 1] < 0):
        raise ValueError("sigma must be non-negative")
    hi = arr[:, 0] + 3.0 * arr[:, 1]
    lo = arr[:, 0] - 3.0 * arr[:, 1]
    c_hi_max, c_lo_max = hi.max(), lo.max()
    c_hi_min, c_lo_min = hi.min(), lo.min()
    return (
        (0.5 * (c_hi_max + c_lo_max), (c_hi_max - c_lo_max) / 6.0),
        (0.5 * (c_hi_min + c_lo_min), (c_hi_min - c_lo_min) / 6.0),
    )


def _phi(x: np.ndarray) -> np.ndarray:
    from scipy.special import ndtr

    return ndtr(x)


def _prob_below(bound: float, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """P(X < bound) for X ~ N(mu, sigma^2); degenerates to a step (with 0.5
    exactly at the bound) when sigma = 0."""
    out = np.full(mu.shape, np.nan)
    pos = sigma > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        out[pos] = _phi((bound - mu[pos]) / sigma[pos])
    zero = sigma == 0
    out[zero] = np.where(mu[zero] < bound, 1.0, np.where(mu[zero] > bound, 0.0, 0.5))
    return out


def hd_fast_deterministic(dem: GeoGrid, geom: LanderGeom, margin: float | None = None) -> SafetyMap:
    """Conservative height-difference detector.

    Per pixel: the elevation span over the leg annulus bounds the slope
    (through the minimum leg-triangle height h0), and the footprint-disk max
    minus the annulus min bounds the roughness.  Safe pixels are guaranteed
    safe under the exact oracle.
    """
    (l_du, l_dv, _, _), (u_du, u_dv, _, _) = detector_masks(geom, dem.cell_size, margin)
    zmax_l, zmin_l, v_l = _kernels.mask_extremes(dem.values, l_du, l_dv)
    zmax_u, _, v_u = _kernels.mask_extremes(dem.values, u_du, u_dv)
    valid = (v_l & v_u).astype(bool)
    dz = zmax_l - zmin_l
    with np.errstate(invalid="ignore"):
        ratio = np.clip(dz / geom.h0, 0.0, 1.0)
        slope = np.degrees(np.arcsin(ratio))
    rough = zmax_u - zmin_l
    dz_bound = geom.h0 * math.sin(math.radians(geom.slope_threshold))
    slope_safe = valid & (dz < dz_bound)
    rough_safe = valid & (rough < geom.rough_threshold)
    return SafetyMap((dem.origin_x, dem.origin_y), dem.cell_size, slope, rough, slope_safe, rough_safe, valid)


def hd_fast_stochastic(
    gdem: GaussianGrid,
    geom: LanderGeom,
    slope_bound: str = "tan",
    margin: float | None = None,
) -> StochasticSafetyMap:
    """Stochastic extension of the fast detector for Gaussian DEM input.

    The annulus/footprint extrema become Gaussians via the 3-sigma
    approximation; slope and roughness safety probabilities follow from the
    normal CDF of the height differences.  ``slope_bound`` picks the slope
    comparison bound h0*tan(s) (default) or h0*sin(s); with zero variance
    and the sin bound the binary map matches ``hd_fast_deterministic``
    cell for cell.
    """
    if slope_bound not in ("sin", "tan"):
        raise ValueError("slope_bound must be 'sin' or 'tan'")
    mean = gdem.mean.values
    sd = np.sqrt(gdem.variance.values)
    cs = gdem.mean.cell_size
    (l_du, l_dv, _, _), (u_du, u_dv, _, _) = detector_masks(geom, cs, margin)
    mu_max_l, sg_max_l, mu_min_l, sg_min_l, v_l = _kernels.mask_extremes_gauss3(mean, sd, l_du, l_dv)
    mu_max_u, sg_max_u, _, _, v_u = _kernels.mask_extremes_gauss3(mean, sd, u_du, u_dv)
    valid = (v_l & v_u).astype(bool)
    mu_ll = mu_max_l - mu_min_l
    sg_ll = np.sqrt(sg_max_l**2 + sg_min_l**2)
    mu_ul = mu_max_u - mu_min_l
    sg_ul = np.sqrt(sg_max_u**2 + sg_min_l**2)
    srad = math.radians(geom.slope_threshold)
    bound = geom.h0 * (math.tan(srad) if slope_bound == "tan" else math.sin(srad))
    p_slope = _prob_below(bound, mu_ll, sg_ll)
    p_rough = _prob_below(geom.rough_threshold, mu_ul, sg_ul)
    p_slope[~valid] = np.nan
    p_rough[~valid] = np.nan
    return StochasticSafetyMap(
        (gdem.mean.origin_x, gdem.mean.origin_y),
        cs,
        p_slope,
        p_rough,
        valid,
        mu_ll=mu_ll,
        sigma_ll=sg_ll,
        mu_ul=mu_ul,
        sigma_ul=sg_ul,
    )


def _orientation_tables(geom: LanderGeom, cell_size: float, dtheta_deg: float):
    """Leg pixel/world offsets for a sweep of one leg-symmetry period."""
    period = 2.0 * math.pi / geom.n_legs
    n = max(1, int(round(period / math.radians(dtheta_deg))))
    thetas = np.arange(n) * period / n
    offs = np.stack([leg_offsets(geom, t) for t in thetas])  # (ntheta, nlegs, 2)
    leg_x = np.ascontiguousarray(offs[:, :, 0])
    leg_y = np.ascontiguousarray(offs[:, :, 1])
    leg_du = np.ascontiguousarray(np.rint(leg_x / cell_size).astype(np.int64))
    leg_dv = np.ascontiguousarray(np.rint(leg_y / cell_size).astype(np.int64))
    return thetas, leg_x, leg_y, leg_du, leg_dv


def _exact_scan(dem: GeoGrid, geom: LanderGeom, dtheta_deg: float, safety_only: bool, use_bounds: bool):
    pad = footpad_map(dem, geom.pad_radius)
    _, leg_x, leg_y, leg_du, leg_dv = _orientation_tables(geom, dem.cell_size, dtheta_deg)
    disk_du, disk_dv, disk_x, disk_y = mask_offsets(0.0, geom.body_radius, dem.cell_size)
    return _kernels.exact_scan(
        dem.values,
        pad.values,
        dem.cell_size,
        leg_du,
        leg_dv,
        leg_x,
        leg_y,
        leg_triples(geom.n_legs),
        disk_du,
        disk_dv,
        disk_x,
        disk_y,
        geom.slope_threshold,
        geom.rough_threshold,
        safety_only,
        use_bounds,
    )


def hd_exact_oracle(
    dem: GeoGrid,
    geom: LanderGeom,
    dtheta_deg: float = 1.0,
    safety_only: bool = False,
    use_bounds: bool = True,
) -> SafetyMap:
    """Exhaustive orientation-sweep safety evaluation on a noise-free DEM.

    ``safety_only`` allows early exits (the safe/unsafe maps stay exact but
    the metric rasters become partial); ``use_bounds`` enables an exact
    branch-and-bound shortcut that never changes any output.
    """
    slope, rough, s_safe, r_safe, valid = _exact_scan(dem, geom, dtheta_deg, safety_only, use_bounds)
    return SafetyMap(
        (dem.origin_x, dem.origin_y),
        dem.cell_size,
        slope,
        rough,
        s_safe.astype(bool),
        r_safe.astype(bool),
        valid.astype(bool),
    )


def baseline_dtheta(geom: LanderGeom, cell_size: float) -> float:
    """Orientation step matching the raster: one cell of arc at the leg
    circle, the resolution-proportional count behind the O(p^5) baseline."""
    return math.degrees(cell_size / geom.leg_circle_radius)


def hd_baseline_stochastic(
    dem: GeoGrid,
    sigma_pixel: float,
    geom: LanderGeom,
    dtheta_deg: float = 1.0,
    use_bounds: bool = False,
) -> StochasticSafetyMap:
    """ALHAT-style baseline: deterministic slope sweep plus per-pixel
    probabilistic roughness safety.

    Each footprint cell contributes P = Phi((r_thr - r) / (sqrt(2) *
    sigma_pixel)), combining independent noise on the terrain cell and the
    plane reference; the pixel's value is the minimum over orientations and
    cells, which equals Phi evaluated at the worst roughness.  Slope safety
    is binary.  Runs the full cell loops by default (the measured O(p^5)
    path); ``use_bounds`` opts into the exact shortcut.
    """
    if sigma_pixel < 0:
        raise ValueError("sigma_pixel must be non-negative")
    slope, rough, _, _, valid = _exact_scan(dem, geom, dtheta_deg, safety_only=False, use_bounds=use_bounds)
    validb = valid.astype(bool)
    sigma_r = math.sqrt(2.0) * sigma_pixel
    p_rough = _prob_below(geom.rough_threshold, rough, np.full(rough.shape, sigma_r))
    p_slope = np.where(slope < geom.slope_threshold, 1.0, 0.0)
    p_slope[~validb] = np.nan
    p_rough[~validb] = np.nan
    return StochasticSafetyMap((dem.origin_x, dem.origin_y), dem.cell_size, p_slope, p_rough, validb)


def theorem1_max_slope(tri_xy, dz: float) -> float:
    """Maximum slope (degrees) of a rigid triangle whose vertex elevations
    stay within a band of height ``dz``: asin(dz / h0) with h0 the minimum
    vertex-to-opposite-edge height.  Requires dz < every height."""
    p = np.asarray(tri_xy, dtype=np.float64).reshape(3, 2)
    area2 = abs(
        (p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1]) - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0])
    )
    if area2 == 0:
        raise ValueError("degenerate triangle")
    sides = np.array(
        [
            math.dist(p[1], p[2]),  # opposite vertex 0
            math.dist(p[0], p[2]),
            math.dist(p[0], p[1]),
        ]
    )
    heights = area2 / sides
    if dz < 0 or dz >= heights.min():
        raise ValueError("need 0 <= dz < every triangle height")
    return math.degrees(math.asin(dz / heights.min()))
