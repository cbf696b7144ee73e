"""Conventional DEM construction: bilinear accumulation and hole filling.

Each point-cloud sample spreads its elevation over the four enclosing grid
nodes with bilinear weights; the DEM is the weighted average per node.
Remaining holes are filled by repeated synchronous sweeps that assign each
empty cell the mean of its valid 8-neighbors.
"""

from __future__ import annotations

import numpy as np

from .grid import GeoGrid, PointCloud


def bilinear_weights(p: float, q: float) -> tuple[float, float, float, float]:
    """Weights at nodes (i,j), (i+1,j), (i,j+1), (i+1,j+1) for fractional
    offsets p = u - u_i, q = v - v_i."""
    return (1 - p) * (1 - q), p * (1 - q), (1 - p) * q, p * q


def build_dem_bilinear(
    cloud: PointCloud,
    origin: tuple[float, float],
    cell_size: float,
    dims: tuple[int, int],
    return_weights: bool = False,
):
    """Accumulate a point cloud into a DEM with bilinear node weights.

    ``dims`` is (nrows, ncols).  Nodes that receive no weight are nodata.
    With ``return_weights`` the raw weight accumulator is returned as well.
    """
    if not cell_size > 0:
        raise ValueError("cell_size must be positive")
    nrows, ncols = dims
    ox, oy = origin
    E = np.zeros((nrows, ncols))
    W = np.zeros((nrows, ncols))
    if len(cloud) > 0:
        # Continuous node coordinates: node (u, v) sits at the cell center.
        gu = (cloud.x - ox) / cell_size - 0.5
        gv = (cloud.y - oy) / cell_size - 0.5
        u0 = np.floor(gu).astype(np.int64)
        v0 = np.floor(gv).astype(np.int64)
        p = gu - u0
        q = gv - v0
        z = cloud.z
        for du, dv, w in (
            (0, 0, (1 - p) * (1 - q)),
            (1, 0, p * (1 - q)),
            (0, 1, (1 - p) * q),
            (1, 1, p * q),
        ):
            uu = u0 + du
            vv = v0 + dv
            ok = (uu >= 0) & (uu < ncols) & (vv >= 0) & (vv < nrows)
            np.add.at(E, (vv[ok], uu[ok]), w[ok] * z[ok])
            np.add.at(W, (vv[ok], uu[ok]), w[ok])
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = np.where(W > 0, E / np.where(W > 0, W, 1.0), np.nan)
    dem = GeoGrid(ox, oy, cell_size, vals)
    if return_weights:
        return dem, W
    return dem


def fill_holes(dem: GeoGrid, max_sweeps: int | None = None) -> GeoGrid:
    """Fill nodata cells with the mean of their valid 8-neighbors.

    Sweeps are synchronous: cells filled in one sweep only become donors in
    the next, so the result is independent of traversal order.  Raises on an
    all-nodata grid.
    """
    vals = dem.values.copy()
    valid = np.isfinite(vals)
    if not valid.any():
        raise ValueError("cannot fill an all-nodata grid")
    if max_sweeps is None:
        max_sweeps = max(dem.ncols, dem.nrows) + 1
    shifts = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    for _ in range(max_sweeps):
        if valid.all():
            break
        padded = np.pad(np.where(valid, vals, 0.0), 1)
        padded_n = np.pad(valid.astype(np.float64), 1)
        s = np.zeros_like(vals)
        n = np.zeros_like(vals)
        for dv, du in shifts:
            s += padded[1 + dv : 1 + dv + vals.shape[0], 1 + du : 1 + du + vals.shape[1]]
            n += padded_n[1 + dv : 1 + dv + vals.shape[0], 1 + du : 1 + du + vals.shape[1]]
        fill = ~valid & (n > 0)
        vals[fill] = s[fill] / n[fill]
        valid |= fill
    if not valid.all():
        raise RuntimeError("holes remain after the sweep budget (disconnected valid set)")
    return GeoGrid(dem.origin_x, dem.origin_y, dem.cell_size, vals, dem.nodata)


def baseline_resolution(cloud: PointCloud) -> float:
    """Average ground sample distance: mean nearest-neighbor spacing of the
    horizontal coordinates."""
    if len(cloud) < 2:
        raise ValueError("need at least two points to estimate the GSD")
    from scipy.spatial import cKDTree

    tree = cKDTree(cloud.xyz[:, :2])
    dist, _ = tree.query(cloud.xyz[:, :2], k=2)
    nn = dist[:, 1]
    gsd = float(np.mean(nn))
    if gsd == 0:
        raise ValueError("degenerate cloud: all points coincide")
    return gsd


def dem_from_cloud_auto(cloud: PointCloud, cell_size: float | None = None, snap_origin: float | None = None) -> GeoGrid:
    """Baseline pipeline: GSD-resolution bilinear DEM with holes filled.

    The grid covers the cloud's bounding box.  With ``snap_origin`` the
    origin is snapped down onto that grid's lattice (useful to align
    constructed DEMs with a ground-truth raster).
    """
    if cell_size is None:
        cell_size = baseline_resolution(cloud)
    xmin, ymin = cloud.x.min(), cloud.y.min()
    xmax, ymax = cloud.x.max(), cloud.y.max()
    if snap_origin is not None:
        ox = snap_origin + np.floor((xmin - snap_origin) / cell_size) * cell_size
        oy = snap_origin + np.floor((ymin - snap_origin) / cell_size) * cell_size
    else:
        ox, oy = xmin, ymin
    ncols = max(1, int(np.ceil((xmax - ox) / cell_size)))
    nrows = max(1, int(np.ceil((ymax - oy) / cell_size)))
    dem = build_dem_bilinear(cloud, (ox, oy), cell_size, (nrows, ncols))
    return fill_holes(dem)
