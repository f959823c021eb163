"""SSIM / MS-SSIM behavior: closed forms, invariants, and gradients."""

import numpy as np
import pytest

from thermocae import tensor as T
from thermocae.msssim import SsimParams, gaussian_window, ms_ssim, msssim_loss, ssim
from thermocae.tensor import Tensor


def _image(seed, n=1, side=128):
    rng = np.random.default_rng(seed)
    return Tensor(rng.uniform(0.0, 1.0, size=(n, 1, side, side)))


class TestParams:
    def test_weights_positive_sum_to_one(self):
        w = SsimParams().scale_weights
        assert all(v > 0 for v in w)
        assert abs(sum(w) - 1.0) < 1e-12

    def test_window_sums_to_one(self):
        g = gaussian_window(11, 1.5)
        window_2d = np.outer(g, g)
        assert abs(window_2d.sum() - 1.0) < 1e-12

    def test_min_side(self):
        assert SsimParams().min_side == 81


class TestSsim:
    def test_self_similarity(self):
        x = _image(0, side=64)
        assert abs(ssim(x, x).data[0] - 1.0) < 1e-9

    def test_constant_images_closed_form(self):
        # zero variance: the index reduces to the scalar luminance formula
        p = SsimParams()
        x = Tensor(np.zeros((1, 1, 32, 32)))
        y = Tensor(np.ones((1, 1, 32, 32)))
        mu_x, mu_y = 0.0, 1.0
        expected = ((2 * mu_x * mu_y + p.c1) * (0.0 + p.c2)) / (
            (mu_x**2 + mu_y**2 + p.c1) * (0.0 + p.c2)
        )
        assert ssim(x, y).data[0] == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(p.c1 / (1.0 + p.c1), rel=1e-12)

    def test_symmetry(self):
        x, y = _image(1, side=48), _image(2, side=48)
        assert abs(ssim(x, y).data[0] - ssim(y, x).data[0]) < 1e-12

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            ssim(_image(0, side=32), _image(0, side=48))

    def test_too_small_raises(self):
        with pytest.raises(ValueError, match="window"):
            ssim(_image(0, side=8), _image(1, side=8))


class TestMsSsim:
    def test_self_similarity(self):
        x = _image(3)
        assert abs(ms_ssim(x, x).data[0] - 1.0) < 1e-9

    def test_monotone_in_noise(self):
        rng = np.random.default_rng(4)
        x = Tensor(rng.uniform(0.2, 0.8, size=(1, 1, 96, 96)))
        noise = rng.normal(size=x.shape)
        vals = []
        for eps in (0.01, 0.05, 0.1):
            y = Tensor(np.clip(x.data + eps * noise, 0.0, 1.0))
            vals.append(ms_ssim(x, y).data[0])
        assert vals[0] > vals[1] > vals[2]

    def test_too_small_names_minimum(self):
        with pytest.raises(ValueError, match="81"):
            ms_ssim(_image(0, side=64), _image(1, side=64))

    def test_batch_shape(self):
        x, y = _image(5, n=3, side=96), _image(6, n=3, side=96)
        assert ms_ssim(x, y).shape == (3,)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        x0 = rng.uniform(0.2, 0.8, size=(1, 1, 96, 96))
        y = Tensor(np.clip(x0 + 0.05 * rng.normal(size=x0.shape), 0.0, 1.0))

        def f(x):
            return ms_ssim(x, y).sum()

        assert T.grad_check(f, Tensor(x0), h=1e-5, n_samples=8) < 1e-4


class TestLoss:
    def test_identical_images_zero_loss(self):
        x = _image(8)
        assert abs(msssim_loss(x, x).item()) < 1e-9

    def test_loss_in_unit_interval(self):
        for seed in range(20):
            x, y = _image(seed, side=96), _image(seed + 100, side=96)
            v = msssim_loss(x, y).item()
            assert 0.0 <= v <= 1.0

    def test_inverted_worse_than_perturbed(self):
        x = _image(9, side=96)
        inverted = Tensor(1.0 - x.data)
        perturbed = Tensor(np.clip(x.data + 0.01, 0.0, 1.0))
        assert msssim_loss(x, inverted).item() > msssim_loss(x, perturbed).item()

    def test_batch_mean(self):
        x, y = _image(10, n=4, side=96), _image(11, n=4, side=96)
        per_image = ms_ssim(x, y).data
        assert msssim_loss(x, y).item() == pytest.approx(1.0 - per_image.mean(), abs=1e-12)

    def test_loss_gradient_for_training_like_pair(self):
        rng = np.random.default_rng(12)
        x = Tensor(rng.uniform(0.1, 0.9, size=(1, 1, 96, 96)))

        def f(xh):
            return msssim_loss(x, xh)

        xh0 = np.clip(x.data + 0.1 * rng.normal(size=x.shape), 0.05, 0.95)
        assert T.grad_check(f, Tensor(xh0), h=1e-5, n_samples=8) < 1e-4
