"""Lander geometry, slope/roughness primitives, footprint masks."""

import itertools
import math

import numpy as np
import pytest

from stmap.lander import (
    LanderGeom,
    compute_h0,
    detector_masks,
    leg_offsets,
    mask_offsets,
    plane_normal,
    plane_through,
    roughness_at,
    slope_of,
)


class TestLanderGeom:
    def test_reference_lander(self):
        g = LanderGeom()
        assert g.h0 == pytest.approx(3.75)
        assert g.body_radius == pytest.approx(1.25)
        assert g.footprint_radius == pytest.approx(2.65)

    def test_inscribed_footprint_enforced(self):
        with pytest.raises(ValueError):
            LanderGeom(body_radius=2.0)  # 3-leg inradius is 1.25

    def test_needs_three_legs(self):
        with pytest.raises(ValueError):
            LanderGeom(n_legs=2)


class TestLegOffsets:
    def test_identity_at_zero(self):
        legs = leg_offsets(LanderGeom(), 0.0)
        assert legs[0] == pytest.approx([2.5, 0.0])

    def test_rotation_cyclic_permutation(self):
        g = LanderGeom()
        a = leg_offsets(g, 0.3)
        b = leg_offsets(g, 0.3 + 2 * math.pi / 3)
        assert np.allclose(np.roll(a, -1, axis=0), b, atol=1e-12)

    def test_on_circle(self):
        legs = leg_offsets(LanderGeom(n_legs=5), 1.234)
        assert np.allclose(np.hypot(legs[:, 0], legs[:, 1]), 2.5, atol=1e-12)


class TestComputeH0:
    def test_three_legs_equilateral(self):
        # Side 2.5*sqrt(3), height = 1.5 * R = 3.75.
        assert compute_h0(LanderGeom(n_legs=3, leg_circle_radius=2.5)) == pytest.approx(3.75)

    def test_four_legs_brute_force(self):
        R = 1.7
        g = LanderGeom(n_legs=4, leg_circle_radius=R, body_radius=0.5)
        legs = leg_offsets(g, 0.0)
        best = math.inf
        for i, j, k in itertools.combinations(range(4), 3):
            p1, p2, p3 = legs[i], legs[j], legs[k]
            area2 = abs((p2[0] - p1[0]) * (p3[1] - p1[1]) - (p2[1] - p1[1]) * (p3[0] - p1[0]))
            for a, b in ((p1, p2), (p2, p3), (p3, p1)):
                best = min(best, area2 / math.dist(a, b))
        assert compute_h0(g) == pytest.approx(best)
        assert compute_h0(g) == pytest.approx(R)  # right isoceles triples

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            LanderGeom(n_legs=3, leg_circle_radius=1e-300)


class TestPlaneSlopeRoughness:
    def test_flat_triangle_normal(self):
        n = plane_normal((0, 0, 0), (1, 0, 0), (0, 1, 0))
        assert np.allclose(n, [0, 0, 1])

    def test_hand_cross_product(self):
        n = plane_normal((0, 0, 0), (1, 0, 0), (0, 1, 1))
        assert np.allclose(n, [0, -1, 1])

    def test_normal_orthogonality(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            p1, p2, p3 = rng.normal(0, 5, (3, 3))
            n = plane_normal(p1, p2, p3)
            assert abs(np.dot(n, p2 - p1)) < 1e-9 * max(1, np.linalg.norm(n))
            assert abs(np.dot(n, p3 - p1)) < 1e-9 * max(1, np.linalg.norm(n))

    def test_collinear_raises(self):
        with pytest.raises(ValueError):
            plane_normal((0, 0, 0), (1, 1, 1), (2, 2, 2))

    def test_slope_vertical(self):
        assert slope_of((0, 0, 1)) == 0.0

    def test_slope_45(self):
        assert slope_of((1, 0, 1)) == pytest.approx(45.0)

    def test_slope_scale_invariant(self):
        n = np.array([0.0, math.tan(math.radians(10.0)), 1.0])
        for k in (0.1, 1.0, 7.3):
            assert slope_of(k * n) == pytest.approx(10.0, abs=1e-10)

    def test_roughness_on_plane(self):
        plane = plane_through((0, 0, 0), (1, 0, 0.2), (0, 1, 0.1))
        assert roughness_at(plane, (0.3, 0.4), 0.3 * 0.2 + 0.4 * 0.1) == pytest.approx(0.0, abs=1e-12)

    def test_roughness_above_flat_plane(self):
        plane = plane_through((0, 0, 0), (1, 0, 0), (0, 1, 0))
        assert roughness_at(plane, (5.0, 5.0), 0.3) == pytest.approx(0.3)

    def test_higher_rock_can_have_smaller_roughness(self):
        # Landing plane tilted down toward +x: rock A is taller in absolute
        # elevation, yet rock B (downhill) sticks out farther from the plane.
        plane = plane_through((0, 0, 0), (1, 0, -0.2), (0, 1, -0.0))
        z_a, z_b = 0.7, 0.4
        r_a = roughness_at(plane, (-1.0, 0.0), z_a)
        r_b = roughness_at(plane, (1.0, 0.0), z_b)
        assert z_a > z_b
        assert r_a < r_b
        assert r_a == pytest.approx((0.2 * -1.0 + z_a) / math.sqrt(1.04))


class TestMasks:
    def test_distance_audit_margin_zero(self):
        geom = LanderGeom()
        cs = 0.1
        (l_du, l_dv, l_dx, l_dy), (u_du, u_dv, _, _) = detector_masks(geom, cs, margin=0.0)
        lo = geom.leg_circle_radius - geom.pad_radius
        hi = geom.leg_circle_radius + geom.pad_radius
        got_l = set(zip(l_du.tolist(), l_dv.tolist()))
        got_u = set(zip(u_du.tolist(), u_dv.tolist()))
        m = int(math.ceil(hi / cs)) + 2
        for dv in range(-m, m + 1):
            for du in range(-m, m + 1):
                dist = math.hypot(du * cs, dv * cs)
                assert ((du, dv) in got_l) == (lo <= dist <= hi)
                assert ((du, dv) in got_u) == (dist <= hi)

    def test_exact_offsets_consistent(self):
        du, dv, dx, dy = mask_offsets(0.0, 1.0, 0.25)
        assert np.allclose(dx, du * 0.25)
        assert np.allclose(dy, dv * 0.25)

    def test_default_margin_inflates(self):
        geom = LanderGeom()
        (l0, *_), _ = detector_masks(geom, 0.1, margin=0.0)
        (l1, *_), _ = detector_masks(geom, 0.1)
        assert len(l1) > len(l0)
