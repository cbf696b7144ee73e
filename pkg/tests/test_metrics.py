"""RMSE, NLPD, precision/recall, hazard-missing map."""

import math

import numpy as np
import pytest

from stmap.grid import GaussianGrid, GeoGrid
from stmap.metrics import evaluation_mask, hazard_missing_map, nlpd, precision_recall, rmse


def grid(vals, cell=1.0):
    return GeoGrid(0.0, 0.0, cell, np.asarray(vals, dtype=np.float64))


class TestRmse:
    def test_identical_zero(self):
        g = grid(np.random.default_rng(0).normal(0, 1, (5, 5)))
        assert rmse(g, g.copy()) == 0.0

    def test_constant_bias(self):
        g = grid(np.zeros((4, 4)))
        h = grid(np.full((4, 4), 0.03))
        assert rmse(g, h) == pytest.approx(0.03)

    def test_masked_overlap_only(self):
        truth = grid([[0.0, 0.0], [0.0, 0.0]])
        est = grid([[1.0, np.nan], [np.nan, np.nan]])
        assert rmse(truth, est) == pytest.approx(1.0)

    def test_no_overlap_raises(self):
        with pytest.raises(ValueError):
            rmse(grid([[1.0]]), grid([[np.nan]]))

    def test_geometry_mismatch(self):
        with pytest.raises(ValueError):
            rmse(grid(np.zeros((2, 2))), grid(np.zeros((2, 2)), cell=2.0))


class TestNlpd:
    def test_perfect_mean_unit_sigma(self):
        z = grid(np.zeros((6, 6)))
        est = GaussianGrid(grid(np.zeros((6, 6))), grid(np.ones((6, 6))))
        assert nlpd(z, est) == pytest.approx(0.5 * math.log(2 * math.pi), rel=1e-12)

    def test_minimum_entropy_sigma(self):
        sigma2 = 1.0 / (2 * math.pi * math.e)
        z = grid(np.zeros((3, 3)))
        est = GaussianGrid(grid(np.zeros((3, 3))), grid(np.full((3, 3), sigma2)))
        assert nlpd(z, est) == pytest.approx(0.5 * math.log(2 * math.pi * sigma2), rel=1e-12)

    def test_overconfidence_penalized(self):
        z = grid(np.zeros((4, 4)))
        resid = grid(np.full((4, 4), 0.5))
        tight = GaussianGrid(resid, grid(np.full((4, 4), 1e-4)))
        calib = GaussianGrid(resid.copy(), grid(np.full((4, 4), 0.25)))
        assert nlpd(z, tight) > nlpd(z, calib)

    def test_zero_sigma_rejected(self):
        z = grid(np.zeros((2, 2)))
        est = GaussianGrid(grid(np.zeros((2, 2))), grid(np.zeros((2, 2))))
        with pytest.raises(ValueError):
            nlpd(z, est)

    def test_per_cell_minimum_at_residual_squared(self):
        # 1-D scan over sigma: the per-cell NLPD bottoms out at
        # sigma^2 = residual^2 with value 0.5 * (1 + log(2 pi r^2)).
        r = 0.37
        z = grid([[0.0]])
        sigmas2 = np.linspace(0.5, 1.5, 2001) ** 2 * r**2
        vals = [
            nlpd(z, GaussianGrid(grid([[r]]), grid([[s2]])))
            for s2 in sigmas2
        ]
        best = float(np.min(vals))
        assert best == pytest.approx(0.5 * (1 + math.log(2 * math.pi * r**2)), abs=1e-6)
        assert sigmas2[int(np.argmin(vals))] == pytest.approx(r**2, rel=1e-2)


class TestPrecisionRecall:
    def test_perfect_prediction(self):
        truth = np.array([[True, False], [True, True]])
        pr = precision_recall(truth.copy(), truth)
        assert (pr.precision, pr.recall) == (1.0, 1.0)

    def test_all_unsafe_prediction(self):
        truth = np.array([[True, False], [True, True]])
        pred = np.zeros((2, 2), dtype=bool)
        pr = precision_recall(pred, truth)
        assert math.isnan(pr.precision)
        assert pr.recall == 0.0
        assert pr.true_safe == 0 and pr.false_unsafe == 3

    def test_probability_threshold(self):
        truth = np.array([[True, True, False]])
        pred = np.array([[0.9, 0.4, 0.8]])
        pr = precision_recall(pred, truth, threshold=0.5)
        assert pr.true_safe == 1 and pr.false_safe == 1 and pr.false_unsafe == 1
        assert pr.precision == pytest.approx(0.5)
        assert pr.recall == pytest.approx(0.5)

    def test_bounds_property(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            truth = rng.random((6, 6)) < 0.5
            pred = rng.random((6, 6))
            pr = precision_recall(pred, truth)
            for val in (pr.precision, pr.recall):
                assert math.isnan(val) or 0.0 <= val <= 1.0

    def test_mask_restriction(self):
        truth = np.array([[True, False]])
        pred = np.array([[True, True]])
        mask = np.array([[True, False]])
        pr = precision_recall(pred, truth, mask=mask)
        assert pr.precision == 1.0 and pr.false_safe == 0


class TestHazardMissing:
    def test_verbatim_formula(self):
        assert hazard_missing_map(np.array([1.0]), np.array([1.0]))[0] == 0.0
        assert hazard_missing_map(np.array([0.0]), np.array([1.0]))[0] == -1.0
        assert hazard_missing_map(np.array([1.0]), np.array([0.0]))[0] == 1.0

    def test_range(self):
        rng = np.random.default_rng(2)
        truth = (rng.random(100) < 0.5).astype(float)
        pred = rng.random(100)
        out = hazard_missing_map(truth, pred)
        assert np.all(out >= -1.0) and np.all(out <= 1.0)


class TestEvaluationMask:
    def test_border_excluded(self):
        mask = evaluation_mask((10, 10), 1.0, 2.0)
        assert not mask[0, 5] and not mask[1, 5]
        assert mask[2, 5] and mask[5, 5]

    def test_extra_validity(self):
        extra = np.zeros((10, 10), dtype=bool)
        extra[5, 5] = True
        mask = evaluation_mask((10, 10), 1.0, 1.0, extra)
        assert mask.sum() == 1 and mask[5, 5]
