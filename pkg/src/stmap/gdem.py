"""Real-time Gaussian DEM construction.

Cells with direct bilinear sample support take the bilinear mean with the
measurement-noise variance; the remaining cells inside the convex hull of
the cloud are filled per containing Delaunay triangle with a closed-form
3-point Gaussian-random-field regression under the absolute-exponential
kernel.  Cells outside the hull stay nodata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dem import build_dem_bilinear
from .grid import GaussianGrid, GeoGrid, PointCloud


@dataclass
class GrfHyper:
    """Absolute-exponential kernel hyperparameters.

    ``center_mean`` centers each local regression on the triangle's vertex
    mean instead of a zero prior, keeping far-field predictions at local
    terrain level.
    """

    sigma_f: float
    length_scale: float
    sigma_eps: float = 0.0
    center_mean: bool = True

    def __post_init__(self):
        if self.sigma_f < 0 or self.length_scale <= 0 or self.sigma_eps < 0:
            raise ValueError("need sigma_f >= 0, length_scale > 0, sigma_eps >= 0")


def ae_kernel(d, hyper: GrfHyper):
    """Absolute-exponential covariance sigma_f^2 * exp(-d / length_scale)."""
    return hyper.sigma_f**2 * np.exp(-np.asarray(d, dtype=np.float64) / hyper.length_scale)


@dataclass
class Triangulation:
    """Delaunay triangulation of a cloud's horizontal coordinates.

    ``triangles`` are CCW vertex-index triples; ``neighbors[t, e]`` is the
    triangle sharing the edge opposite vertex ``e`` of triangle ``t`` (-1 on
    the hull), matching the rasterizer's edge convention.
    """

    points: np.ndarray  # (n, 2)
    triangles: np.ndarray  # (m, 3) int64, CCW
    neighbors: np.ndarray  # (m, 3) int64, -1 on hull
    _qhull: object = None

    def edge_lengths(self) -> np.ndarray:
        p = self.points
        t = self.triangles
        e = []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            e.append(np.hypot(*(p[t[:, a]] - p[t[:, b]]).T))
        return np.concatenate(e)

    def find_triangle(self, xy: np.ndarray) -> np.ndarray:
        """Index of a containing triangle per query point, -1 outside hull.

        Indices match ``triangles`` rows (vertex reordering preserves row
        order relative to the underlying Qhull simplices).
        """
        return np.asarray(self._qhull.find_simplex(xy), dtype=np.int64)


def delaunay_triangulate(cloud_or_xy) -> Triangulation:
    """Delaunay-triangulate the horizontal coordinates of a cloud.

    Uses Qhull, which is deterministic for a fixed input ordering; cocircular
    degeneracies resolve to whatever diagonal Qhull picks, identically on
    every run.  Raises if fewer than 3 points or all points are collinear.
    """
    from scipy.spatial import Delaunay, QhullError

    xy = cloud_or_xy.xyz[:, :2] if isinstance(cloud_or_xy, PointCloud) else np.asarray(cloud_or_xy, dtype=np.float64)
    if xy.shape[0] < 3:
        raise ValueError("need at least 3 points to triangulate")
    try:
        qhull = Delaunay(xy)
    except QhullError as e:
        raise ValueError(f"degenerate point set (collinear?): {e}") from e
    if qhull.simplices.shape[0] == 0:
        raise ValueError("degenerate point set produced no triangles")
    tris = qhull.simplices.astype(np.int64).copy()
    neigh = qhull.neighbors.astype(np.int64).copy()
    p = xy
    cross = (p[tris[:, 1], 0] - p[tris[:, 0], 0]) * (p[tris[:, 2], 1] - p[tris[:, 0], 1]) - (
        p[tris[:, 1], 1] - p[tris[:, 0], 1]
    ) * (p[tris[:, 2], 0] - p[tris[:, 0], 0])
    flip = cross < 0
    # Swapping vertices 1 and 2 keeps the neighbor-opposite-vertex pairing
    # if neighbors 1 and 2 swap as well.
    tris[flip, 1], tris[flip, 2] = tris[flip, 2], tris[flip, 1].copy()
    neigh[flip, 1], neigh[flip, 2] = neigh[flip, 2], neigh[flip, 1].copy()
    return Triangulation(points=np.ascontiguousarray(xy), triangles=tris, neighbors=neigh, _qhull=qhull)


def grf_predict_local(query, v1, v2, v3, hyper: GrfHyper) -> tuple[float, float]:
    """Closed-form 3-point GRF prediction at ``query`` (x, y).

    ``v1``..``v3`` are (x, y, z) samples.  Returns (mean, variance); the
    3x3 system is solved via the adjugate, and the posterior mean is
    centered on the vertex mean when the hyperparameters say so.
    """
    x = np.array([v1[0], v2[0], v3[0]], dtype=np.float64)
    y = np.array([v1[1], v2[1], v3[1]], dtype=np.float64)
    z = np.array([v1[2], v2[2], v3[2]], dtype=np.float64)
    sf2 = hyper.sigma_f**2
    se2 = hyper.sigma_eps**2
    mb = z.mean() if hyper.center_mean else 0.0
    if sf2 == 0.0:
        return float(mb), 0.0
    ell = hyper.length_scale
    k12 = sf2 * math.exp(-math.hypot(x[0] - x[1], y[0] - y[1]) / ell)
    k13 = sf2 * math.exp(-math.hypot(x[0] - x[2], y[0] - y[2]) / ell)
    k23 = sf2 * math.exp(-math.hypot(x[1] - x[2], y[1] - y[2]) / ell)
    a = sf2 + se2
    det = a * (a * a - k23 * k23) - k12 * (k12 * a - k23 * k13) + k13 * (k12 * k23 - a * k13)
    if det == 0.0:
        raise ValueError("singular covariance (duplicate points with zero noise?)")
    i11 = (a * a - k23 * k23) / det
    i12 = (k13 * k23 - k12 * a) / det
    i13 = (k12 * k23 - a * k13) / det
    i22 = (a * a - k13 * k13) / det
    i23 = (k13 * k12 - a * k23) / det
    i33 = (a * a - k12 * k12) / det
    qx, qy = query
    k1 = sf2 * math.exp(-math.hypot(qx - x[0], qy - y[0]) / ell)
    k2 = sf2 * math.exp(-math.hypot(qx - x[1], qy - y[1]) / ell)
    k3 = sf2 * math.exp(-math.hypot(qx - x[2], qy - y[2]) / ell)
    zc = z - mb
    w1 = i11 * zc[0] + i12 * zc[1] + i13 * zc[2]
    w2 = i12 * zc[0] + i22 * zc[1] + i23 * zc[2]
    w3 = i13 * zc[0] + i23 * zc[1] + i33 * zc[2]
    mean = k1 * w1 + k2 * w2 + k3 * w3 + mb
    q = k1 * k1 * i11 + k2 * k2 * i22 + k3 * k3 * i33 + 2.0 * (k1 * k2 * i12 + k1 * k3 * i13 + k2 * k3 * i23)
    return float(mean), float(max(0.0, sf2 - q))


def rasterize_triangle(tri, origin: tuple[float, float], cell_size: float, dims: tuple[int, int]) -> list[tuple[int, int]]:
    """Cells of a grid whose centers lie inside or on a single triangle.

    ``tri`` is three (x, y) vertices; ``dims`` is (nrows, ncols).  Cells are
    returned as (u, v) pairs in raster order.
    """
    (ax, ay), (bx, by), (cx, cy) = [(float(p[0]), float(p[1])) for p in tri]
    cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if cross == 0:
        raise ValueError("degenerate triangle")
    if cross < 0:
        (bx, by), (cx, cy) = (cx, cy), (bx, by)
    nrows, ncols = dims
    ox, oy = origin
    xmin, xmax = min(ax, bx, cx), max(ax, bx, cx)
    ymin, ymax = min(ay, by, cy), max(ay, by, cy)
    v_lo = max(0, int(math.ceil((ymin - oy) / cell_size - 0.5)))
    v_hi = min(nrows - 1, int(math.floor((ymax - oy) / cell_size - 0.5)))
    u_lo = max(0, int(math.ceil((xmin - ox) / cell_size - 0.5)))
    u_hi = min(ncols - 1, int(math.floor((xmax - ox) / cell_size - 0.5)))
    cells: list[tuple[int, int]] = []
    if v_lo > v_hi or u_lo > u_hi:
        return cells
    edges = (((ax, ay), (bx, by)), ((bx, by), (cx, cy)), ((cx, cy), (ax, ay)))
    uu = ox + (np.arange(u_lo, u_hi + 1) + 0.5) * cell_size
    for v in range(v_lo, v_hi + 1):
        yc = oy + (v + 0.5) * cell_size
        inside = np.ones(len(uu), dtype=bool)
        for (sx, sy), (ex, ey) in edges:
            inside &= (ex - sx) * (yc - sy) - (ey - sy) * (uu - sx) >= 0
        for u in np.nonzero(inside)[0]:
            cells.append((u_lo + int(u), v))
    return cells


# Scale-aware hyperparameter defaults.  The detrended sample std alone
# under-covers sub-sample-scale relief (rocks between samples), so the prior
# std carries a safety factor; the length scale stays near the sample
# spacing so uncertainty actually grows inside triangles.
LENGTH_SCALE_EDGE_FACTOR = 1.5
SIGMA_F_STD_FACTOR = 2.0


def default_hyper(cloud: PointCloud, tri: Triangulation | None = None) -> GrfHyper:
    """Scale-aware hyperparameter defaults.

    Length scale: LENGTH_SCALE_EDGE_FACTOR times the median triangulation
    edge length.  Prior std: SIGMA_F_STD_FACTOR times the sample std of
    elevations after removing a best-fit plane.  Noise std: the cloud's
    sigma_eps.
    """
    if tri is None:
        tri = delaunay_triangulate(cloud)
    ell = LENGTH_SCALE_EDGE_FACTOR * float(np.median(tri.edge_lengths()))
    A = np.column_stack([cloud.x, cloud.y, np.ones(len(cloud))])
    coef, *_ = np.linalg.lstsq(A, cloud.z, rcond=None)
    resid = cloud.z - A @ coef
    sigma_f = SIGMA_F_STD_FACTOR * float(np.std(resid))
    return GrfHyper(sigma_f=sigma_f, length_scale=max(ell, 1e-9), sigma_eps=cloud.sigma_eps)


def build_gaussian_dem(
    cloud: PointCloud,
    origin: tuple[float, float],
    cell_size: float,
    dims: tuple[int, int],
    hyper: GrfHyper | None = None,
) -> GaussianGrid:
    """Construct a Gaussian DEM from a point cloud.

    Seeds densely sampled cells with the bilinear pass (variance =
    sigma_eps^2), triangulates the cloud, and fills the remaining in-hull
    cells per containing triangle with the local GRF prediction.
    """
    tri = delaunay_triangulate(cloud)
    if hyper is None:
        hyper = default_hyper(cloud, tri)
    nrows, ncols = dims
    ox, oy = origin
    dem, W = build_dem_bilinear(cloud, origin, cell_size, dims, return_weights=True)
    seeded = (W > 0).astype(np.uint8)
    mean = dem.values.copy()
    var = np.where(seeded, hyper.sigma_eps**2, np.nan)

    owner, _ = _kernels.rasterize_triangulation(
        np.ascontiguousarray(tri.points[:, 0]),
        np.ascontiguousarray(tri.points[:, 1]),
        tri.triangles,
        tri.neighbors,
        ox,
        oy,
        cell_size,
        ncols,
        nrows,
    )
    # Degenerate boundary cases (a cell center exactly on a shared vertex)
    # can slip through the ownership rule; claim them by point location.
    unclaimed = (owner < 0) & ~seeded.astype(bool)
    if np.any(unclaimed):
        vs, us = np.nonzero(unclaimed)
        xy = np.column_stack([ox + (us + 0.5) * cell_size, oy + (vs + 0.5) * cell_size])
        t = tri.find_triangle(xy)
        inside = t >= 0
        owner[vs[inside], us[inside]] = t[inside]

    _kernels.grf_fill_cells(
        np.ascontiguousarray(tri.points[:, 0]),
        np.ascontiguousarray(tri.points[:, 1]),
        np.ascontiguousarray(cloud.z),
        tri.triangles,
        owner,
        seeded,
        ox,
        oy,
        cell_size,
        hyper.sigma_f,
        hyper.length_scale,
        hyper.sigma_eps,
        hyper.center_mean,
        mean,
        var,
    )
    mean_grid = GeoGrid(ox, oy, cell_size, mean)
    var_grid = GeoGrid(ox, oy, cell_size, var)
    return GaussianGrid(mean_grid, var_grid)
