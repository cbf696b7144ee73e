"""Lander geometry and the exact slope/roughness primitives.

The landing plane is the plane through three landing legs in contact with
the terrain; slope is the angle between its normal and the vertical, and
roughness the signed plane distance of terrain points under the lander.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass
class LanderGeom:
    """Lander configuration and safety thresholds.

    The body footprint (radius ``body_radius``) must be inscribed in the
    polygon formed by the landing legs, which keeps the height-difference
    safety bounds conservative; construction fails otherwise.
    """

    n_legs: int = 3
    leg_circle_radius: float = 2.5
    pad_radius: float = 0.15
    body_radius: float | None = None  # defaults to the leg-polygon inradius
    slope_threshold: float = 10.0  # degrees
    rough_threshold: float = 0.25  # meters

    def __post_init__(self):
        if self.n_legs < 3:
            raise ValueError("need at least 3 legs")
        if self.leg_circle_radius <= 0 or self.pad_radius < 0:
            raise ValueError("bad leg circle / pad radius")
        inradius = self.leg_circle_radius * math.cos(math.pi / self.n_legs)
        if self.body_radius is None:
            self.body_radius = inradius
        if self.body_radius > inradius + 1e-12:
            raise ValueError(
                f"body radius {self.body_radius} exceeds the leg-polygon inradius {inradius:.6g}; "
                "the conservativeness guarantee needs an inscribed footprint"
            )
        if self.h0 <= 0:
            raise ValueError("degenerate leg geometry (h0 must be positive)")

    @property
    def h0(self) -> float:
        """Minimum height over all leg triangles (vertex-to-opposite-edge)."""
        return compute_h0(self)

    @property
    def footprint_radius(self) -> float:
        """Radius of the all-orientation footprint union (legs plus pads)."""
        return self.leg_circle_radius + self.pad_radius


def leg_offsets(geom: LanderGeom, theta: float) -> np.ndarray:
    """Horizontal leg coordinates at orientation ``theta`` (radians), shape
    (n_legs, 2), legs evenly spaced on the leg circle."""
    ang = theta + 2.0 * np.pi * np.arange(geom.n_legs) / geom.n_legs
    return np.column_stack([geom.leg_circle_radius * np.cos(ang), geom.leg_circle_radius * np.sin(ang)])


def _triangle_min_height(p1, p2, p3) -> float:
    area2 = abs((p2[0] - p1[0]) * (p3[1] - p1[1]) - (p2[1] - p1[1]) * (p3[0] - p1[0]))
    if area2 == 0:
        return 0.0
    sides = (math.dist(p1, p2), math.dist(p2, p3), math.dist(p3, p1))
    return min(area2 / s for s in sides)


def compute_h0(geom: LanderGeom) -> float:
    """min over all leg triples of the triple's minimum triangle height."""
    legs = leg_offsets(geom, 0.0)
    h0 = math.inf
    for i, j, k in itertools.combinations(range(geom.n_legs), 3):
        h = _triangle_min_height(legs[i], legs[j], legs[k])
        if h <= 0:
            raise ValueError("collinear leg triple")
        h0 = min(h0, h)
    return h0


def leg_triples(n_legs: int) -> np.ndarray:
    """All 3-leg contact combinations, each ordered CCW for unit leg angles."""
    return np.array(list(itertools.combinations(range(n_legs), 3)), dtype=np.int64)


def plane_normal(p1, p2, p3) -> np.ndarray:
    """Normal (p2 - p1) x (p3 - p1) of the plane through three 3-D points,
    expecting counterclockwise order seen from above (positive z part)."""
    p1 = np.asarray(p1, dtype=np.float64)
    n = np.cross(np.asarray(p2, dtype=np.float64) - p1, np.asarray(p3, dtype=np.float64) - p1)
    if np.all(n == 0):
        raise ValueError("collinear points have no plane normal")
    return n


def slope_of(n) -> float:
    """Slope in degrees: angle between the plane normal and the vertical."""
    a, b, c = float(n[0]), float(n[1]), float(n[2])
    norm = math.sqrt(a * a + b * b + c * c)
    if norm == 0:
        raise ValueError("zero normal")
    if not c > 0:
        raise ValueError("normal must point upward (c > 0)")
    return math.degrees(math.acos(min(1.0, c / norm)))


def roughness_at(plane, xy, z: float) -> float:
    """Signed plane distance (a x + b y + c z + d) / ||(a, b, c)|| of a
    terrain point; positive above the landing plane."""
    a, b, c, d = (float(t) for t in plane)
    return (a * xy[0] + b * xy[1] + c * z + d) / math.sqrt(a * a + b * b + c * c)


def plane_through(p1, p2, p3) -> tuple[float, float, float, float]:
    """(a, b, c, d) with a x + b y + c z + d = 0 through the three points."""
    n = plane_normal(p1, p2, p3)
    d = -float(np.dot(n, np.asarray(p1, dtype=np.float64)))
    return float(n[0]), float(n[1]), float(n[2]), d


def mask_offsets(radius_lo: float, radius_hi: float, cell_size: float):
    """Integer cell offsets whose center distance lies in [radius_lo, radius_hi].

    Returns (du, dv, dx, dy): pixel offsets and their exact world offsets.
    """
    m = int(math.ceil(radius_hi / cell_size))
    rng = np.arange(-m, m + 1)
    dv, du = np.meshgrid(rng, rng, indexing="ij")
    dx = du * cell_size
    dy = dv * cell_size
    dist = np.hypot(dx, dy)
    keep = (dist >= radius_lo) & (dist <= radius_hi)
    return (
        np.ascontiguousarray(du[keep].astype(np.int64)),
        np.ascontiguousarray(dv[keep].astype(np.int64)),
        np.ascontiguousarray(dx[keep]),
        np.ascontiguousarray(dy[keep]),
    )


def detector_masks(geom: LanderGeom, cell_size: float, margin: float | None = None):
    """(L, U) offset masks for the height-difference detectors.

    L is the annulus swept by the leg pads over all orientations, U the full
    footprint disk.  ``margin`` (default half the cell diagonal) inflates
    both so that every cell the orientation-sweep detectors can read through
    the snapped footpad map is covered; conservativeness survives the
    raster discretization that way.
    """
    if margin is None:
        margin = cell_size * math.sqrt(2.0) / 2.0
    lo = max(0.0, geom.leg_circle_radius - geom.pad_radius - margin)
    hi = geom.leg_circle_radius + geom.pad_radius + margin
    L = mask_offsets(lo, hi, cell_size)
    U = mask_offsets(0.0, hi, cell_size)
    return L, U
