"""Raster and point-cloud data model shared by every stage of the pipeline.

A :class:`GeoGrid` is a uniform, north-up raster of elevations with a
georeferenced lower-left corner and square cells.  Values are stored
row-major as float64 with NaN marking invalid (nodata) cells; on disk the
nodata sentinel from the header is used instead.  Pixel ``(u, v)`` has its
center at ``(origin_x + (u + 0.5) * cell_size, origin_y + (v + 0.5) *
cell_size)``, so rows run south to north (v increases with y).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

DEFAULT_NODATA = -9999.0

_BIN_HEADER = struct.Struct("<qqdddd")  # ncols, nrows, xllcorner, yllcorner, cellsize, nodata


class GridFormatError(ValueError):
    """Raised for malformed grid or point-cloud files."""


@dataclass
class GeoGrid:
    """Uniform elevation raster with georeferenced origin.

    Attributes:
        origin_x, origin_y: world coordinates of the lower-left corner (m).
        cell_size: cell edge length (m/pixel), > 0.
        values: (nrows, ncols) float64 array, NaN where nodata.
        nodata: sentinel written to files in place of NaN.
    """

    origin_x: float
    origin_y: float
    cell_size: float
    values: np.ndarray
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise ValueError("grid values must be a 2-D array with at least one cell")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be positive")

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    @property
    def valid(self) -> np.ndarray:
        """Boolean validity mask (True where the cell holds a real elevation)."""
        return np.isfinite(self.values)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the covered area."""
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.ncols * self.cell_size,
            self.origin_y + self.nrows * self.cell_size,
        )

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World coordinates of all cell centers as (xs[ncols], ys[nrows])."""
        xs = self.origin_x + (np.arange(self.ncols) + 0.5) * self.cell_size
        ys = self.origin_y + (np.arange(self.nrows) + 0.5) * self.cell_size
        return xs, ys

    def pixel_of(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """Pixel indices (u, v) of the cells containing world points (x, y)."""
        u = np.floor((np.asarray(x) - self.origin_x) / self.cell_size).astype(np.int64)
        v = np.floor((np.asarray(y) - self.origin_y) / self.cell_size).astype(np.int64)
        return u, v

    def same_geometry(self, other: "GeoGrid", tol: float = 0.0) -> bool:
        return (
            self.values.shape == other.values.shape
            and abs(self.origin_x - other.origin_x) <= tol
            and abs(self.origin_y - other.origin_y) <= tol
            and abs(self.cell_size - other.cell_size) <= tol
        )

    def copy(self) -> "GeoGrid":
        return GeoGrid(self.origin_x, self.origin_y, self.cell_size, self.values.copy(), self.nodata)


@dataclass
class GaussianGrid:
    """Stochastic elevation raster: per-cell mean and variance grids.

    Both grids must share origin, cell size, and dimensions.  Variance is
    non-negative wherever valid.
    """

    mean: GeoGrid
    variance: GeoGrid

    def __post_init__(self):
        if not self.mean.same_geometry(self.variance):
            raise ValueError("mean and variance grids must share geometry")
        var = self.variance.values
        if np.any(var[np.isfinite(var)] < 0):
            raise ValueError("variance must be non-negative")

    @property
    def valid(self) -> np.ndarray:
        return self.mean.valid & self.variance.valid


@dataclass
class PointCloud:
    """Terrain surface samples (x, y, z) with a per-sample elevation noise std.

    ``xyz`` is an (n, 3) float64 array; ``sigma_eps`` is the standard
    deviation of the vertical measurement noise common to all samples.
    """

    xyz: np.ndarray
    sigma_eps: float = 0.0

    def __post_init__(self):
        self.xyz = np.ascontiguousarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.xyz)):
            raise ValueError("point cloud coordinates must be finite")
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be non-negative")

    def __len__(self) -> int:
        return self.xyz.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.xyz[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.xyz[:, 1]

    @property
    def z(self) -> np.ndarray:
        return self.xyz[:, 2]


# ---------------------------------------------------------------------------
# Grid file I/O
#
# ascii format: 6 header lines (ncols, nrows, xllcorner, yllcorner, cellsize,
# nodata_value) followed by whitespace-separated rows, row v=0 first.
# binary format: the same header packed as "<qqdddd", then row-major
# little-endian float64 values.
# ---------------------------------------------------------------------------


def grid_write(grid: GeoGrid, path, fmt: str = "binary") -> None:
    """Write a grid to ``path`` in 'ascii' or 'binary' format."""
    vals = grid.values
    invalid = ~np.isfinite(vals)
    if np.any(vals[~invalid] == grid.nodata):
        raise ValueError("a valid cell equals the nodata sentinel; pick a different sentinel")
    out = np.where(invalid, grid.nodata, vals)
    if fmt == "ascii":
        with open(path, "w") as f:
            f.write(f"ncols {grid.ncols}\n")
            f.write(f"nrows {grid.nrows}\n")
            f.write(f"xllcorner {grid.origin_x!r}\n")
            f.write(f"yllcorner {grid.origin_y!r}\n")
            f.write(f"cellsize {grid.cell_size!r}\n")
            f.write(f"nodata_value {grid.nodata!r}\n")
            for row in out:
                f.write(" ".join(repr(float(x)) for x in row))
                f.write("\n")
    elif fmt == "binary":
        with open(path, "wb") as f:
            f.write(_BIN_HEADER.pack(grid.ncols, grid.nrows, grid.origin_x, grid.origin_y, grid.cell_size, grid.nodata))
            f.write(np.ascontiguousarray(out, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown grid format {fmt!r}")


def grid_read(path) -> GeoGrid:
    """Read a grid written by :func:`grid_write` (format auto-detected)."""
    with open(path, "rb") as f:
        head = f.read(5)
    if head == b"ncols":
        return _read_ascii(path)
    return _read_binary(path)


def _read_ascii(path) -> GeoGrid:
    with open(path) as f:
        header = {}
        for _ in range(6):
            line = f.readline()
            if not line:
                raise GridFormatError("truncated ascii grid header")
            key, _, val = line.partition(" ")
            header[key.strip()] = val.strip()
        try:
            ncols = int(header["ncols"])
            nrows = int(header["nrows"])
            ox = float(header["xllcorner"])
            oy = float(header["yllcorner"])
            cs = float(header["cellsize"])
            nodata = float(header["nodata_value"])
        except (KeyError, ValueError) as e:
            raise GridFormatError(f"malformed ascii grid header: {e}") from e
        data = np.loadtxt(io.StringIO(f.read()), dtype=np.float64, ndmin=2)
    if data.shape != (nrows, ncols):
        raise GridFormatError(f"payload shape {data.shape} does not match header ({nrows}, {ncols})")
    data[data == nodata] = np.nan
    return GeoGrid(ox, oy, cs, data, nodata)


def _read_binary(path) -> GeoGrid:
    with open(path, "rb") as f:
        raw = f.read(_BIN_HEADER.size)
        if len(raw) != _BIN_HEADER.size:
            raise GridFormatError("truncated binary grid header")
        ncols, nrows, ox, oy, cs, nodata = _BIN_HEADER.unpack(raw)
        if ncols < 1 or nrows < 1 or not cs > 0:
            raise GridFormatError("invalid binary grid header")
        payload = f.read()
    vals = np.frombuffer(payload, dtype="<f8")
    if vals.size != ncols * nrows:
        raise GridFormatError(f"payload has {vals.size} values, expected {ncols * nrows}")
    data = vals.reshape(nrows, ncols).astype(np.float64)
    data[data == nodata] = np.nan
    return GeoGrid(ox, oy, cs, data, nodata)


# ---------------------------------------------------------------------------
# Point cloud I/O: CSV with an "x,y,z" header line, or a binary stream of
# little-endian float64 triples prefixed with an int64 count.
# ---------------------------------------------------------------------------


def cloud_write(cloud: PointCloud, path, fmt: str = "csv") -> None:
    if fmt == "csv":
        with open(path, "w") as f:
            f.write("x,y,z\n")
            for x, y, z in cloud.xyz:
                f.write(f"{float(x)!r},{float(y)!r},{float(z)!r}\n")
    elif fmt == "binary":
        with open(path, "wb") as f:
            f.write(struct.pack("<q", len(cloud)))
            f.write(np.ascontiguousarray(cloud.xyz, dtype="<f8").tobytes())
    else:
        raise ValueError(f"unknown cloud format {fmt!r}")


def cloud_read(path, sigma_eps: float = 0.0) -> PointCloud:
    with open(path, "rb") as f:
        head = f.read(5)
    if head.startswith(b"x,y,z"):
        xyz = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
        if xyz.shape[1] != 3:
            raise GridFormatError("point cloud CSV must have three columns")
    else:
        with open(path, "rb") as f:
            (n,) = struct.unpack("<q", f.read(8))
            xyz = np.frombuffer(f.read(), dtype="<f8")
        if xyz.size != 3 * n:
            raise GridFormatError(f"binary cloud has {xyz.size} values, expected {3 * n}")
        xyz = xyz.reshape(n, 3).astype(np.float64)
    return PointCloud(xyz, sigma_eps)


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------


def nearest_resample(src: GeoGrid, target_origin: tuple[float, float], target_cell_size: float, target_dims: tuple[int, int]) -> GeoGrid:
    """Resample ``src`` onto a new geometry by nearest source cell center.

    ``target_dims`` is (nrows, ncols).  Target cells whose centers fall
    outside the source extent become nodata.
    """
    nrows, ncols = target_dims
    ox, oy = target_origin
    xs = ox + (np.arange(ncols) + 0.5) * target_cell_size
    ys = oy + (np.arange(nrows) + 0.5) * target_cell_size
    u = np.floor((xs - src.origin_x) / src.cell_size).astype(np.int64)
    v = np.floor((ys - src.origin_y) / src.cell_size).astype(np.int64)
    in_u = (u >= 0) & (u < src.ncols)
    in_v = (v >= 0) & (v < src.nrows)
    out = np.full((nrows, ncols), np.nan)
    uu = np.clip(u, 0, src.ncols - 1)
    vv = np.clip(v, 0, src.nrows - 1)
    out[:, :] = src.values[np.ix_(vv, uu)]
    out[~in_v, :] = np.nan
    out[:, ~in_u] = np.nan
    return GeoGrid(ox, oy, target_cell_size, out, src.nodata)


def bilinear_upsample(src: GeoGrid, factor: int) -> GeoGrid:
    """Refine a grid by an integer factor with bilinear interpolation.

    The output covers the same extent at cell size ``src.cell_size / factor``.
    Interpolation is between source cell centers, with linear extrapolation
    in the half-cell fringe, so affine surfaces are reproduced exactly.
    """
    if factor < 1 or int(factor) != factor:
        raise ValueError("factor must be an integer >= 1")
    factor = int(factor)
    if factor == 1:
        return src.copy()
    from scipy.interpolate import RegularGridInterpolator

    xs, ys = src.cell_centers()
    cs = src.cell_size / factor
    nx = src.ncols * factor
    ny = src.nrows * factor
    tx = src.origin_x + (np.arange(nx) + 0.5) * cs
    ty = src.origin_y + (np.arange(ny) + 0.5) * cs
    if src.ncols == 1 or src.nrows == 1:
        # RegularGridInterpolator needs >= 2 samples per axis; a single
        # row/column is constant along the degenerate axis.
        out = np.repeat(np.repeat(src.values, factor, axis=0), factor, axis=1)
        return GeoGrid(src.origin_x, src.origin_y, cs, out, src.nodata)
    interp = RegularGridInterpolator((ys, xs), src.values, method="linear", bounds_error=False, fill_value=None)
    ty_g, tx_g = np.meshgrid(ty, tx, indexing="ij")
    out = interp(np.stack([ty_g.ravel(), tx_g.ravel()], axis=1)).reshape(ny, nx)
    return GeoGrid(src.origin_x, src.origin_y, cs, out, src.nodata)
