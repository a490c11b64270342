"""Box reparameterization, losses, and the ground-truth noiser."""

import numpy as np
import pytest

from foveakit import (
    EuclideanBox,
    FoveationParams,
    RiemannianBox,
    area_amplification,
    boxes_to_euclidean,
    boxes_to_riemannian,
    giou,
    iou,
    l1_loss,
    noise_box,
    to_euclidean,
    to_riemannian,
)

from conftest import random_invertible_params


def random_box(rng) -> EuclideanBox:
    return EuclideanBox(cx=float(rng.uniform(-0.8, 0.8)),
                        cy=float(rng.uniform(-0.8, 0.8)),
                        w=float(rng.uniform(0.01, 0.4)),
                        h=float(rng.uniform(0.01, 0.4)))


class TestEuclideanBox:
    def test_corners(self):
        b = EuclideanBox(0.5, -0.25, 0.2, 0.1)
        assert b.corners == (0.4, -0.3, 0.6, -0.2)

    def test_rejects_degenerate(self):
        for w, h in ((0.0, 0.1), (0.1, 0.0), (-0.1, 0.1)):
            with pytest.raises(ValueError):
                EuclideanBox(0, 0, w, h)


class TestToRiemannian:
    def test_box_at_origin_scales_by_alpha(self, std_params):
        rb = to_riemannian(EuclideanBox(0, 0, 0.1, 0.1), std_params)
        assert (rb.cx, rb.cy) == (0.0, 0.0)
        assert rb.tx_mag == pytest.approx(0.2, abs=1e-15)
        assert rb.ty_mag == pytest.approx(0.2, abs=1e-15)

    def test_identity_sentinel_passthrough(self):
        params = FoveationParams(0, 0, 0.0, 2.0)
        b = EuclideanBox(0.3, -0.4, 0.12, 0.34)
        rb = to_riemannian(b, params)
        assert (rb.cx, rb.cy, rb.tx_mag, rb.ty_mag) == (0.3, -0.4, 0.12, 0.34)

    def test_identity_region_passthrough(self, std_params):
        b = EuclideanBox(0.9, 0.9, 0.05, 0.07)
        rb = to_riemannian(b, std_params)
        assert (rb.cx, rb.cy, rb.tx_mag, rb.ty_mag) == (0.9, 0.9, 0.05, 0.07)

    def test_tangent_magnitude_linear_in_extent(self, std_params):
        rng = np.random.default_rng(2)
        for _ in range(100):
            b = random_box(rng)
            doubled = EuclideanBox(b.cx, b.cy, 2 * b.w, b.h)
            r1 = to_riemannian(b, std_params)
            r2 = to_riemannian(doubled, std_params)
            assert r2.tx_mag == pytest.approx(2 * r1.tx_mag, rel=1e-12)
            assert r2.ty_mag == r1.ty_mag

    def test_amplification_sign(self, std_params):
        near = np.array([[0.05, -0.03, 0.1, 0.1]])
        far = np.array([[0.95, 0.95, 0.05, 0.05]])
        assert area_amplification(near, std_params)[0] > 1.0
        assert area_amplification(far, std_params)[0] == 1.0


class TestToEuclidean:
    def test_worked_inverse(self, std_params):
        b = to_euclidean(RiemannianBox(0.0, 0.0, 0.2, 0.2), std_params)
        assert b.cx == pytest.approx(0.0, abs=1e-12)
        assert b.w == pytest.approx(0.1, abs=1e-12)
        assert b.h == pytest.approx(0.1, abs=1e-12)

    def test_identity_sentinel_passthrough(self):
        params = FoveationParams(0, 0, 0.0, 2.0)
        b = to_euclidean(RiemannianBox(0.2, 0.3, 0.4, 0.5), params)
        assert (b.cx, b.cy, b.w, b.h) == (0.2, 0.3, 0.4, 0.5)

    def test_round_trip_random(self):
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(300):
            params = random_invertible_params(rng)
            b = random_box(rng)
            back = to_euclidean(to_riemannian(b, params), params, tol=1e-10)
            worst = max(worst, np.max(np.abs(back.as_array() - b.as_array())))
        assert worst <= 1e-6

    def test_batch_round_trip(self, std_params):
        rng = np.random.default_rng(5)
        arr = np.column_stack([
            rng.uniform(-0.9, 0.9, 400), rng.uniform(-0.9, 0.9, 400),
            rng.uniform(0.01, 0.4, 400), rng.uniform(0.01, 0.4, 400)])
        proj = boxes_to_riemannian(arr, std_params)
        back, iters, converged = boxes_to_euclidean(proj, std_params,
                                                    tol=1e-10)
        assert np.all(converged)
        assert np.all(iters >= 1)
        assert np.max(np.abs(back - arr)) <= 1e-6

    def test_empty(self, std_params):
        out, iters, conv = boxes_to_euclidean(np.zeros((0, 4)), std_params)
        assert out.shape == (0, 4) and iters.size == 0 and conv.size == 0


class TestLosses:
    def test_iou_identical(self):
        b = EuclideanBox(0, 0, 1, 1)
        assert iou(b, b) == 1.0
        assert giou(b, b) == 1.0

    def test_giou_disjoint_worked_value(self):
        # unit boxes 10 apart: IoU 0, hull 11x1, union 2 -> -(11-2)/11
        a = EuclideanBox(0, 0, 1, 1)
        b = EuclideanBox(10, 0, 1, 1)
        assert giou(a, b) == pytest.approx(-9 / 11, abs=1e-12)
        assert iou(a, b) == 0.0

    def test_giou_gradient_when_disjoint(self):
        a = EuclideanBox(0, 0, 1, 1)
        step = 1e-6
        plus = giou(a, EuclideanBox(10 + step, 0, 1, 1))
        minus = giou(a, EuclideanBox(10 - step, 0, 1, 1))
        grad = (plus - minus) / (2 * step)
        assert abs(grad) > 0
        # moving b toward a must increase the score
        assert grad < 0

    def test_giou_bounds_and_dominance(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            a, b = random_box(rng), random_box(rng)
            g = giou(a, b)
            assert -1.0 < g <= 1.0
            assert g <= iou(a, b) + 1e-15

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            a, b = random_box(rng), random_box(rng)
            assert giou(a, b) == giou(b, a)
            assert l1_loss(a, b) == l1_loss(b, a)

    def test_l1(self):
        a = EuclideanBox(0.1, 0.2, 0.3, 0.4)
        assert l1_loss(a, a) == 0.0
        b = EuclideanBox(0.2, 0.2, 0.3, 0.4)
        assert l1_loss(a, b) == pytest.approx(0.1, abs=1e-15)

    def test_l1_matches_componentwise_sum(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            a, b = random_box(rng), random_box(rng)
            expected = (abs(a.cx - b.cx) + abs(a.cy - b.cy)
                        + abs(a.w - b.w) + abs(a.h - b.h))
            assert l1_loss(a, b) == pytest.approx(expected, rel=1e-15)


class TestNoiseBox:
    def test_zero_scales_identity(self):
        b = EuclideanBox(0.1, 0.2, 0.3, 0.4)
        assert noise_box(b, 0.0, 0.0, rng=42) == b

    def test_deterministic_given_seed(self):
        b = EuclideanBox(0.1, 0.2, 0.3, 0.4)
        assert noise_box(b, 0.4, 0.4, rng=123) == noise_box(b, 0.4, 0.4, rng=123)
        assert noise_box(b, 0.4, 0.4, rng=123) != noise_box(b, 0.4, 0.4, rng=124)

    def test_offset_and_scale_bounds(self):
        b = EuclideanBox(0.0, 0.0, 0.5, 0.25)
        gen = np.random.default_rng(99)
        for _ in range(10_000):
            n = noise_box(b, 0.4, 0.4, rng=gen)
            assert abs(n.cx - b.cx) <= 0.2 * b.w
            assert abs(n.cy - b.cy) <= 0.2 * b.h
            assert 0.6 * b.w <= n.w <= 1.4 * b.w
            assert 0.6 * b.h <= n.h <= 1.4 * b.h

    def test_rejects_negative_scales(self):
        with pytest.raises(ValueError):
            noise_box(EuclideanBox(0, 0, 1, 1), -0.1, 0.0, rng=1)
