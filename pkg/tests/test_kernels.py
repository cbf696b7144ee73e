"""Kernel backend equivalence and rasterization partition properties."""

import math

import numpy as np
import pytest

from stmap._kernels import _py
from stmap.gdem import delaunay_triangulate
from stmap.hazard import _orientation_tables
from stmap.lander import LanderGeom, detector_masks, leg_triples, mask_offsets

try:
    from stmap._kernels import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled kernels unavailable")

BACKENDS = [_py] + ([_core] if _core is not None else [])


def random_field(rng, n=48, nan_frac=0.0):
    vals = rng.normal(0, 0.2, (n, n))
    if nan_frac:
        vals[rng.random((n, n)) < nan_frac] = np.nan
    return vals


@needs_core
class TestBackendEquivalence:
    def setup_method(self):
        self.rng = np.random.default_rng(77)
        self.geom = LanderGeom()
        self.cs = 0.1

    def test_footpad_max(self):
        du, dv, _, _ = mask_offsets(0.0, self.geom.pad_radius, self.cs)
        for nan_frac in (0.0, 0.1):
            vals = random_field(self.rng, nan_frac=nan_frac)
            a = _py.footpad_max(vals, du, dv)
            b = _core.footpad_max(vals, du, dv)
            assert np.array_equal(a, b, equal_nan=True)

    def test_mask_extremes(self):
        (l_du, l_dv, _, _), _ = detector_masks(self.geom, self.cs)
        for nan_frac in (0.0, 0.05):
            vals = random_field(self.rng, n=64, nan_frac=nan_frac)
            a = _py.mask_extremes(vals, l_du, l_dv)
            b = _core.mask_extremes(vals, l_du, l_dv)
            for x, y in zip(a, b):
                assert np.array_equal(x, y, equal_nan=True)

    def test_mask_extremes_gauss3(self):
        _, (u_du, u_dv, _, _) = detector_masks(self.geom, self.cs)
        mean = random_field(self.rng, n=64)
        sd = np.abs(random_field(self.rng, n=64)) * 0.1
        a = _py.mask_extremes_gauss3(mean, sd, u_du, u_dv)
        b = _core.mask_extremes_gauss3(mean, sd, u_du, u_dv)
        for x, y in zip(a, b):
            assert np.array_equal(x, y, equal_nan=True)

    def test_disk_max_arg(self):
        du, dv, dx, dy = mask_offsets(0.0, self.geom.body_radius, self.cs)
        vals = random_field(self.rng, n=64)
        a = _py.disk_max_arg(vals, du, dv, dx, dy)
        b = _core.disk_max_arg(vals, du, dv, dx, dy)
        for x, y in zip(a, b):
            assert np.array_equal(x, y, equal_nan=True)

    @pytest.mark.parametrize("safety_only,use_bounds", [(False, False), (False, True), (True, True)])
    def test_exact_scan(self, safety_only, use_bounds):
        vals = random_field(self.rng, n=72)
        pad_du, pad_dv, _, _ = mask_offsets(0.0, self.geom.pad_radius, self.cs)
        pad = _py.footpad_max(vals, pad_du, pad_dv)
        _, leg_x, leg_y, leg_du, leg_dv = _orientation_tables(self.geom, self.cs, 12.0)
        disk = mask_offsets(0.0, self.geom.body_radius, self.cs)
        args = (
            vals, pad, self.cs, leg_du, leg_dv, leg_x, leg_y, leg_triples(3),
            disk[0], disk[1], disk[2], disk[3],
            self.geom.slope_threshold, self.geom.rough_threshold, safety_only, use_bounds,
        )
        a = _py.exact_scan(*args)
        b = _core.exact_scan(*args)
        # Safe flags and validity are exact in every mode.
        for i in (2, 3, 4):
            assert np.array_equal(a[i], b[i])
        if not safety_only:
            # Metric rasters are exact too (same arithmetic, same order) up
            # to transcendental rounding differences between libm and numpy.
            assert np.allclose(a[0], b[0], atol=1e-11, equal_nan=True)
            assert np.allclose(a[1], b[1], atol=1e-12, equal_nan=True)

    def test_rasterize_triangulation(self):
        pts = self.rng.uniform(0, 4.8, (40, 2))
        tri = delaunay_triangulate(pts)
        px = np.ascontiguousarray(tri.points[:, 0])
        py = np.ascontiguousarray(tri.points[:, 1])
        a = _py.rasterize_triangulation(px, py, tri.triangles, tri.neighbors, 0.0, 0.0, self.cs, 48, 48)
        b = _core.rasterize_triangulation(px, py, tri.triangles, tri.neighbors, 0.0, 0.0, self.cs, 48, 48)
        assert np.array_equal(a[0], b[0])
        assert np.array_equal(a[1], b[1])

    def test_grf_fill_cells(self):
        pts = self.rng.uniform(0, 4.8, (25, 2))
        pz = self.rng.normal(0, 0.3, 25)
        tri = delaunay_triangulate(pts)
        px = np.ascontiguousarray(tri.points[:, 0])
        py = np.ascontiguousarray(tri.points[:, 1])
        owner, _ = _py.rasterize_triangulation(px, py, tri.triangles, tri.neighbors, 0.0, 0.0, self.cs, 48, 48)
        seeded = np.zeros((48, 48), dtype=np.uint8)
        outs = []
        for impl in (_py, _core):
            mean = np.full((48, 48), np.nan)
            var = np.full((48, 48), np.nan)
            impl.grf_fill_cells(px, py, pz, tri.triangles, owner, seeded, 0.0, 0.0, self.cs, 0.4, 2.0, 0.02, True, mean, var)
            outs.append((mean, var))
        assert np.allclose(outs[0][0], outs[1][0], rtol=1e-12, atol=1e-14, equal_nan=True)
        assert np.allclose(outs[0][1], outs[1][1], rtol=1e-12, atol=1e-14, equal_nan=True)


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.BACKEND)
class TestRasterizationPartition:
    def test_partition_property_random(self, impl):
        # No gaps, no double claims; claimed set equals the closed-hull
        # membership oracle (strict interior cells always, boundary cells by
        # the ownership rule, here checked as "member of some triangle").
        rng = np.random.default_rng(5)
        ncols = nrows = 22
        cs = 1.0
        for case in range(300):
            npts = int(rng.integers(4, 16))
            pts = rng.uniform(0.0, 22.0, (npts, 2))
            try:
                tri = delaunay_triangulate(pts)
            except ValueError:
                continue
            px = np.ascontiguousarray(tri.points[:, 0])
            py = np.ascontiguousarray(tri.points[:, 1])
            owner, claims = impl.rasterize_triangulation(px, py, tri.triangles, tri.neighbors, 0.0, 0.0, cs, ncols, nrows)
            assert claims.max() <= 1
            in_hull = np.asarray(tri.find_triangle(_centers(ncols, nrows, cs)) >= 0).reshape(nrows, ncols)
            claimed = owner >= 0
            # find_simplex uses a tolerance at the hull; compare away from it.
            disagreement = claimed != in_hull
            if disagreement.any():
                vs, us = np.nonzero(disagreement)
                for v, u in zip(vs, us):
                    d = _hull_distance(tri, u + 0.5, v + 0.5)
                    assert d < 1e-7, f"cell ({u},{v}) mismatched {d} inside hull"

    def test_partition_lattice_adversarial(self, impl):
        # Vertices exactly on cell centers: boundary ownership still yields
        # a disjoint cover of the hull.
        pts = np.array(
            [[0.5, 0.5], [6.5, 0.5], [6.5, 6.5], [0.5, 6.5], [3.5, 3.5], [3.5, 0.5], [0.5, 3.5]]
        )
        tri = delaunay_triangulate(pts)
        px = np.ascontiguousarray(tri.points[:, 0])
        py = np.ascontiguousarray(tri.points[:, 1])
        owner, claims = impl.rasterize_triangulation(px, py, tri.triangles, tri.neighbors, 0.0, 0.0, 1.0, 7, 7)
        assert claims.max() <= 1
        claimed = owner >= 0
        assert claimed[0:7, 0:7].all()  # the hull is the full square

    def test_per_triangle_counts_sum(self, impl):
        rng = np.random.default_rng(6)
        pts = rng.uniform(0.2, 29.8, (60, 2))
        tri = delaunay_triangulate(pts)
        px = np.ascontiguousarray(tri.points[:, 0])
        py = np.ascontiguousarray(tri.points[:, 1])
        owner, claims = impl.rasterize_triangulation(px, py, tri.triangles, tri.neighbors, 0.0, 0.0, 1.0, 30, 30)
        counts = np.bincount(owner[owner >= 0].ravel(), minlength=len(tri.triangles))
        assert counts.sum() == np.count_nonzero(owner >= 0) == claims.sum()


def _centers(ncols, nrows, cs):
    xs = (np.arange(ncols) + 0.5) * cs
    ys = (np.arange(nrows) + 0.5) * cs
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def _hull_distance(tri, x, y):
    """Distance from (x, y) to the convex hull boundary."""
    from scipy.spatial import ConvexHull

    hull = ConvexHull(tri.points)
    best = math.inf
    verts = tri.points[hull.vertices]
    n = len(verts)
    p = np.array([x, y])
    for i in range(n):
        a, b = verts[i], verts[(i + 1) % n]
        ab = b - a
        t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0, 1)
        best = min(best, float(np.linalg.norm(p - (a + t * ab))))
    return best
