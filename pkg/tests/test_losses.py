import math
import warnings

import numpy as np
import pytest

from src.core.errors import ContractViolation
from src.core.gradcheck import finite_difference_check
from src.core.tensor import Graph, Tensor, backprop
from src.services.losses.schemas.losses import LossWeights, SsimConfig
from src.services.losses.segmentation import ConfusionMatrix, mean_iou, pixel_accuracy, summarize
from src.services.losses.service import (
    PSNR_INFINITE,
    combined_loss,
    combined_loss_with_parts,
    mse,
    psnr,
    psnr_from_mse,
    ssim_mean,
    ssim_window,
    ssim_with_gradient,
)


def naive_ssim(a: np.ndarray, b: np.ndarray, cfg: SsimConfig) -> float:
    """Direct per-window SSIM over valid centers of every channel."""
    g = ssim_window(cfg)
    w = np.outer(g, g)
    n = cfg.radius
    values = []
    for x, y in zip(a.reshape(-1, *a.shape[-2:]), b.reshape(-1, *b.shape[-2:])):
        h, wd = x.shape
        for i in range(n, h - n):
            for j in range(n, wd - n):
                px = x[i - n:i + n + 1, j - n:j + n + 1]
                py = y[i - n:i + n + 1, j - n:j + n + 1]
                mx, my = (w * px).sum(), (w * py).sum()
                vx = (w * (px - mx) ** 2).sum()
                vy = (w * (py - my) ** 2).sum()
                cxy = (w * (px - mx) * (py - my)).sum()
                values.append(
                    (2 * mx * my + cfg.c1) * (2 * cxy + cfg.c2) / ((mx * mx + my * my + cfg.c1) * (vx + vy + cfg.c2))
                )
    return float(np.mean(values))


class TestMse:
    def test_identical_is_zero(self):
        img = np.random.default_rng(0).uniform(size=(3, 8, 8))
        assert mse(img, img) == 0.0

    def test_constant_case(self):
        assert mse(np.zeros((3, 4, 4)), np.full((3, 4, 4), 0.5)) == pytest.approx(0.25)

    def test_summation_oracle(self):
        rng = np.random.default_rng(1)
        a, b = rng.uniform(size=(3, 4, 4)), rng.uniform(size=(3, 4, 4))
        total = 0.0
        for value_a, value_b in zip(a.reshape(-1), b.reshape(-1)):
            total += (value_a - value_b) ** 2
        assert abs(mse(a, b) - total / 48) < 1e-7

    def test_shape_mismatch(self):
        with pytest.raises(ContractViolation):
            mse(np.zeros((3, 4, 4)), np.zeros((3, 4, 5)))


class TestPsnr:
    def test_known_values(self):
        assert psnr_from_mse(0.01) == 20.0
        assert psnr_from_mse(1.0) == 0.0

    def test_identical_is_infinite(self):
        img = np.ones((1, 4, 4)) * 0.3
        assert psnr(img, img) == PSNR_INFINITE

    def test_strictly_decreasing_in_mse(self):
        values = [psnr_from_mse(e) for e in (1e-4, 1e-3, 1e-2, 1e-1)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_max_value_must_be_positive(self):
        with pytest.raises(ContractViolation):
            psnr(np.zeros((1, 2, 2)), np.ones((1, 2, 2)), max_value=0)


class TestSsim:
    def test_identical_is_one(self):
        img = np.random.default_rng(2).uniform(size=(3, 16, 16))
        assert abs(ssim_mean(img, img) - 1.0) < 1e-6

    def test_constant_closed_form(self):
        a, b = np.full((1, 16, 16), 0.5), np.full((1, 16, 16), 0.25)
        assert ssim_mean(a, b) == pytest.approx(0.80006, abs=1e-4)

    @pytest.mark.parametrize("window", ["gaussian", "uniform"])
    def test_matches_naive_windows(self, window):
        cfg = SsimConfig(window=window)
        rng = np.random.default_rng(3)
        for _ in range(25):
            a, b = rng.uniform(size=(32, 32)), rng.uniform(size=(32, 32))
            assert abs(ssim_mean(a, b, cfg) - naive_ssim(a, b, cfg)) < 1e-5

    def test_symmetric(self):
        rng = np.random.default_rng(4)
        a, b = rng.uniform(size=(3, 20, 20)), rng.uniform(size=(3, 20, 20))
        assert abs(ssim_mean(a, b) - ssim_mean(b, a)) < 1e-6

    def test_window_larger_than_image(self):
        with pytest.raises(ContractViolation):
            ssim_mean(np.zeros((1, 8, 8)), np.zeros((1, 8, 8)))

    def test_constants(self):
        cfg = SsimConfig()
        assert cfg.size == 11
        assert cfg.c1 == pytest.approx(1e-4)
        assert cfg.c2 == pytest.approx(9e-4)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(5)
        pred = Tensor(rng.uniform(0.05, 0.95, size=(1, 1, 32, 32)), dtype=np.float64)
        target = rng.uniform(size=(1, 1, 32, 32))
        weights = LossWeights(mse=0.0, ssim=1.0)
        error = finite_difference_check(lambda t: combined_loss(t, target, weights), pred)
        assert error < 5e-3


class TestCombinedLoss:
    def test_zero_at_target(self):
        img = np.random.default_rng(6).uniform(size=(2, 3, 16, 16))
        loss = combined_loss(Tensor(img, dtype=np.float64), img)
        assert abs(loss.item()) < 1e-6

    def test_mse_only_equals_weighted_mse(self):
        rng = np.random.default_rng(7)
        a, b = rng.uniform(size=(1, 3, 16, 16)), rng.uniform(size=(1, 3, 16, 16))
        loss = combined_loss(Tensor(a, dtype=np.float64), b, LossWeights(mse=2.0, ssim=0.0))
        assert loss.item() == pytest.approx(2.0 * mse(a, b), rel=1e-12)

    def test_defaults_are_component_sum(self):
        rng = np.random.default_rng(8)
        a, b = rng.uniform(size=(1, 3, 16, 16)), rng.uniform(size=(1, 3, 16, 16))
        loss, parts = combined_loss_with_parts(Tensor(a, dtype=np.float64), b)
        expected = 1.0 * mse(a, b) + 0.1 * (1.0 - ssim_mean(a, b))
        assert loss.item() == pytest.approx(expected, rel=1e-9)
        assert parts["mse"] == pytest.approx(mse(a, b))
        assert parts["ssim"] == pytest.approx(ssim_mean(a, b))

    def test_mse_gradient(self):
        rng = np.random.default_rng(9)
        a, b = rng.uniform(size=(1, 1, 12, 12)), rng.uniform(size=(1, 1, 12, 12))
        pred = Tensor(a, requires_grad=True, dtype=np.float64)
        with Graph() as graph:
            loss = combined_loss(pred, b, LossWeights(mse=1.0, ssim=0.0))
        grads = backprop(graph, output=loss)
        np.testing.assert_allclose(grads[pred], 2.0 * (a - b) / a.size, rtol=1e-12)

    @pytest.mark.parametrize("mode", ["mse", "ssim", "combined"])
    def test_gradient_per_loss_mode(self, mode):
        rng = np.random.default_rng(12)
        a, b = rng.uniform(size=(2, 3, 16, 16)), rng.uniform(size=(2, 3, 16, 16))
        weights = LossWeights.for_mode(mode)
        pred = Tensor(a, requires_grad=True, dtype=np.float64)
        with Graph() as graph:
            loss = combined_loss(pred, b, weights)
        grads = backprop(graph, output=loss)
        _, ssim_grad = ssim_with_gradient(a, b, SsimConfig())
        expected = weights.mse * 2.0 * (a - b) / a.size - weights.ssim * ssim_grad
        np.testing.assert_allclose(grads[pred], expected, rtol=1e-10, atol=1e-15)

    def test_backward_on_single_element_gradient(self):
        rng = np.random.default_rng(13)
        a, b = rng.uniform(size=(1, 3, 16, 16)), rng.uniform(size=(1, 3, 16, 16))
        pred = Tensor(a, requires_grad=True, dtype=np.float64)
        with Graph() as graph:
            loss = combined_loss(pred, b)
        assert loss.shape == (1,)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            grads = backprop(graph, loss_gradient=np.full(loss.shape, 2.0), output=loss)
        assert np.isfinite(grads[pred]).all()

    def test_gradient_zero_at_optimum(self):
        img = np.random.default_rng(10).uniform(size=(1, 1, 16, 16))
        pred = Tensor(img, requires_grad=True, dtype=np.float64)
        with Graph() as graph:
            loss = combined_loss(pred, img)
        grads = backprop(graph, output=loss)
        np.testing.assert_allclose(grads[pred], 0.0, atol=1e-12)

    @pytest.mark.parametrize(
        "mode,expected",
        [("mse", (1.0, 0.0)), ("ssim", (0.0, 1.0)), ("combined", (1.0, 0.1))],
    )
    def test_weights_per_mode(self, mode, expected):
        w = LossWeights.for_mode(mode)
        assert (w.mse, w.ssim) == expected

    def test_weights_validation(self):
        with pytest.raises(ContractViolation):
            LossWeights(mse=0.0, ssim=0.0)
        with pytest.raises(ContractViolation):
            LossWeights(mse=-1.0)
        with pytest.raises(ContractViolation):
            LossWeights.for_mode("l1")


class TestSegmentationMetrics:
    def test_pixel_accuracy(self):
        gt = np.array([[0, 1], [2, 3]])
        assert pixel_accuracy(gt, gt) == 1.0
        assert pixel_accuracy((gt + 1) % 4, gt) == 0.0
        assert pixel_accuracy(np.array([[0, 1], [2, 0]]), gt) == 0.75

    def test_mean_iou_enumeration(self):
        pred = np.array([[0, 0], [1, 1]])
        gt = np.array([[0, 1], [1, 1]])
        assert mean_iou(pred, gt, 2) == pytest.approx(7 / 12, rel=1e-15)

    def test_mean_iou_edges(self):
        gt = np.zeros((2, 2), dtype=np.int64)
        assert mean_iou(gt, gt, 6) == 1.0
        assert mean_iou(np.ones_like(gt), gt, 6) == 0.0

    def test_out_of_range_class(self):
        with pytest.raises(ContractViolation):
            mean_iou(np.array([[0, 7]]), np.array([[0, 1]]), 6)

    def test_confusion_accumulates_globally(self):
        matrix = ConfusionMatrix(3)
        matrix.add(np.array([[0, 0], [1, 1]]), np.array([[0, 1], [1, 1]]))
        other = ConfusionMatrix(3)
        other.add(np.array([[2, 2]]), np.array([[2, 0]]))
        matrix.merge(other)
        assert matrix.total == 6
        assert matrix.pixel_accuracy() == pytest.approx(4 / 6)
        iou = matrix.class_iou()
        assert iou[0] == pytest.approx(1 / 3)
        assert iou[1] == pytest.approx(2 / 3)
        assert iou[2] == pytest.approx(1 / 2)

    def test_absent_class_is_excluded(self):
        matrix = ConfusionMatrix(6)
        matrix.add(np.array([[0, 1]]), np.array([[0, 1]]))
        assert math.isnan(matrix.class_iou()[4])
        assert matrix.mean_iou() == 1.0

    def test_summarize_empty(self):
        values = summarize(None)
        assert math.isnan(values["pixel_acc"]) and math.isnan(values["mean_iou"])
        assert math.isnan(summarize(ConfusionMatrix(2))["mean_iou"])
