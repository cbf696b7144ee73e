"""Ground-truth testbed terrains: rock fields, fractal bases, superposition.

Rocks are hemi-ellipsoids on a flat plane, placed by rejection sampling so
that their bounding circles (radius = semi-major axis) never overlap.  A
complexity-scaled base terrain can be superposed on the rock field to sweep
scene difficulty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GeoGrid

PACKING_FRACTION = 0.3


class PlacementError(RuntimeError):
    """Raised when a rock field is too dense to place without overlap."""


@dataclass
class RockSpec:
    """One hemi-ellipsoidal rock: center, semi-axes, height, yaw (radians)."""

    center_x: float
    center_y: float
    semi_major: float
    semi_minor: float
    height: float
    yaw: float = 0.0

    def __post_init__(self):
        if not (self.semi_major >= self.semi_minor > 0):
            raise ValueError("need semi_major >= semi_minor > 0")
        if not self.height > 0:
            raise ValueError("rock height must be positive")


@dataclass
class TerrainConfig:
    """Rock-field generation parameters.

    ``height_mode`` resolves the rock height convention: 'half_diameter'
    makes a rock of diameter d stand d/2 tall (default), 'half_semi_major'
    makes it d/4 tall.
    """

    extent: tuple[float, float] = (200.0, 200.0)
    resolution: float = 0.1
    n_rocks: int = 500
    rock_diameter: float = 1.0
    seed: int = 0
    height_mode: str = "half_diameter"
    max_attempts_per_rock: int = 100

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.n_rocks < 0:
            raise ValueError("n_rocks must be non-negative")
        if self.height_mode not in ("half_diameter", "half_semi_major"):
            raise ValueError(f"unknown height_mode {self.height_mode!r}")

    def rock_height(self) -> float:
        a = self.rock_diameter / 2.0
        return a if self.height_mode == "half_diameter" else a / 2.0


def _rock_rng(seed: int, rock_index: int) -> np.random.Generator:
    # Counter-based stream keyed by (seed, rock index) so placement is
    # reproducible regardless of evaluation order.
    key = [seed & 0xFFFFFFFFFFFFFFFF, rock_index]
    return np.random.Generator(np.random.Philox(key=key))


def empty_grid(extent: tuple[float, float], resolution: float, centered: bool = True) -> GeoGrid:
    """Flat zero grid covering ``extent`` at ``resolution`` m/pix."""
    ex, ey = extent
    ncols = int(round(ex / resolution))
    nrows = int(round(ey / resolution))
    ox = -ex / 2.0 if centered else 0.0
    oy = -ey / 2.0 if centered else 0.0
    return GeoGrid(ox, oy, resolution, np.zeros((nrows, ncols)))


def rasterize_rock(grid: GeoGrid, rock: RockSpec) -> None:
    """Add a rock to ``grid`` in place: z = h * sqrt(1 - (x'/a)^2 - (y'/b)^2)."""
    a, b = rock.semi_major, rock.semi_minor
    xs, ys = grid.cell_centers()
    u0 = max(0, int(np.floor((rock.center_x - a - grid.origin_x) / grid.cell_size)) - 1)
    u1 = min(grid.ncols, int(np.ceil((rock.center_x + a - grid.origin_x) / grid.cell_size)) + 1)
    v0 = max(0, int(np.floor((rock.center_y - a - grid.origin_y) / grid.cell_size)) - 1)
    v1 = min(grid.nrows, int(np.ceil((rock.center_y + a - grid.origin_y) / grid.cell_size)) + 1)
    if u0 >= u1 or v0 >= v1:
        return
    dx = xs[u0:u1][None, :] - rock.center_x
    dy = ys[v0:v1][:, None] - rock.center_y
    c, s = np.cos(rock.yaw), np.sin(rock.yaw)
    xl = c * dx + s * dy
    yl = -s * dx + c * dy
    q = 1.0 - (xl / a) ** 2 - (yl / b) ** 2
    z = rock.height * np.sqrt(np.maximum(q, 0.0))
    patch = grid.values[v0:v1, u0:u1]
    np.maximum(patch, z, out=patch)


def gen_rock_field(cfg: TerrainConfig) -> tuple[GeoGrid, list[RockSpec]]:
    """Generate a random non-overlapping rock field on a flat plane.

    Deterministic for a fixed seed.  Raises :class:`PlacementError` when a
    rock cannot be placed within the retry budget (over-dense config).
    """
    ex, ey = cfg.extent
    a = cfg.rock_diameter / 2.0
    if cfg.n_rocks * np.pi * a * a >= PACKING_FRACTION * ex * ey:
        raise PlacementError(
            f"{cfg.n_rocks} rocks of diameter {cfg.rock_diameter} exceed packing fraction {PACKING_FRACTION} on {ex}x{ey} m"
        )
    grid = empty_grid(cfg.extent, cfg.resolution)
    xmin, ymin, xmax, ymax = grid.extent
    rocks: list[RockSpec] = []
    centers = np.empty((cfg.n_rocks, 2))
    h = cfg.rock_height()
    for i in range(cfg.n_rocks):
        rng = _rock_rng(cfg.seed, i)
        for _ in range(cfg.max_attempts_per_rock):
            cx = rng.uniform(xmin + a, xmax - a)
            cy = rng.uniform(ymin + a, ymax - a)
            if i == 0 or np.all(np.hypot(centers[:i, 0] - cx, centers[:i, 1] - cy) >= 2 * a):
                break
        else:
            raise PlacementError(f"could not place rock {i} after {cfg.max_attempts_per_rock} attempts")
        centers[i] = (cx, cy)
        rocks.append(RockSpec(cx, cy, a, a, h))
    for rock in rocks:
        rasterize_rock(grid, rock)
    return grid, rocks


def superpose_complexity(rock: GeoGrid, base: GeoGrid, c: float) -> GeoGrid:
    """Cellwise superposition: rock + c * base (grids must share geometry)."""
    if c < 0:
        raise ValueError("complexity factor must be non-negative")
    if not rock.same_geometry(base, tol=1e-9):
        raise ValueError("rock and base grids must share geometry")
    return GeoGrid(rock.origin_x, rock.origin_y, rock.cell_size, rock.values + c * base.values, rock.nodata)


def gen_fractal_base(
    extent: tuple[float, float],
    resolution: float,
    hurst: float = 0.8,
    amplitude: float = 1.0,
    seed: int = 0,
    centered: bool = True,
) -> GeoGrid:
    """Seeded fractional-Brownian surface, spectrally synthesized.

    The power spectrum falls off as |k|^(-2(hurst+1)); the sample is rescaled
    so its RMS about the mean equals ``amplitude``.
    """
    if not 0 < hurst < 1:
        raise ValueError("hurst must be in (0, 1)")
    grid = empty_grid(extent, resolution, centered)
    if amplitude == 0:
        return grid
    ny, nx = grid.values.shape
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    phase = rng.standard_normal((ny, nx)) + 1j * rng.standard_normal((ny, nx))
    ky = np.fft.fftfreq(ny)[:, None]
    kx = np.fft.fftfreq(nx)[None, :]
    k = np.hypot(kx, ky)
    k[0, 0] = np.inf  # zero the DC component
    spectrum = phase * k ** (-(hurst + 1.0))
    field = np.fft.ifft2(spectrum).real
    field -= field.mean()
    rms = np.sqrt(np.mean(field**2))
    if rms > 0:
        field *= amplitude / rms
    grid.values[:, :] = field
    return grid


def rocks_write(rocks: list[RockSpec], path) -> None:
    with open(path, "w") as f:
        f.write("cx,cy,a,b,h,yaw\n")
        for r in rocks:
            fields = (r.center_x, r.center_y, r.semi_major, r.semi_minor, r.height, r.yaw)
            f.write(",".join(repr(float(x)) for x in fields) + "\n")


def rocks_read(path) -> list[RockSpec]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        return []
    return [RockSpec(*row) for row in data]
