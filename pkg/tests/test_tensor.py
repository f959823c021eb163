"""Core tensor engine tests against independent naive oracles."""

import numpy as np
import pytest

from thermocae import tensor as T
from thermocae.rng import Rng
from thermocae.tensor import ConvSpec, Graph, Tensor


# ---------------------------------------------------------------------------
# oracles: written independently of the optimized kernels


def conv2d_loops(x, w, b, stride, pad):
    """Quadruple-nested-loop cross-correlation."""
    n, ci, h, wd = x.shape
    co, _, kh, kw = w.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((n, co, ho, wo))
    for ni in range(n):
        for c in range(co):
            for oh in range(ho):
                for ow in range(wo):
                    acc = b[c]
                    for ic in range(ci):
                        for ki in range(kh):
                            for kj in range(kw):
                                ih = oh * stride - pad + ki
                                iw = ow * stride - pad + kj
                                if 0 <= ih < h and 0 <= iw < wd:
                                    acc += x[ni, ic, ih, iw] * w[c, ic, ki, kj]
                    out[ni, c, oh, ow] = acc
    return out


def conv_transpose2d_scatter(x, w, b, spec):
    """Scatter-add oracle: each input pixel sprays its kernel onto the canvas."""
    n, ci, h, wd = x.shape
    _, co, kh, kw = w.shape
    ho = spec.out_size_transposed(h)
    wo = spec.out_size_transposed(wd)
    out = np.zeros((n, co, ho, wo))
    out += b[None, :, None, None]
    for ni in range(n):
        for ic in range(ci):
            for ih in range(h):
                for iw in range(wd):
                    for oc in range(co):
                        for ki in range(kh):
                            for kj in range(kw):
                                oh = ih * spec.stride - spec.padding + ki
                                ow = iw * spec.stride - spec.padding + kj
                                if 0 <= oh < ho and 0 <= ow < wo:
                                    out[ni, oc, oh, ow] += x[ni, ic, ih, iw] * w[ic, oc, ki, kj]
    return out


def matmul_loops(x, w, b):
    n, f = x.shape
    g = w.shape[1]
    out = np.zeros((n, g))
    for i in range(n):
        for j in range(g):
            acc = b[j]
            for k in range(f):
                acc += x[i, k] * w[k, j]
            out[i, j] = acc
    return out


# ---------------------------------------------------------------------------
# conv2d


class TestConv2d:
    def test_zero_input_gives_bias(self):
        x = Tensor.zeros((2, 3, 8, 8))
        w = Tensor(np.random.default_rng(0).normal(size=(4, 3, 3, 3)))
        b = Tensor(np.array([1.0, -2.0, 0.5, 3.0]))
        out = T.conv2d(x, w, b)
        for c, bc in enumerate(b.data):
            assert np.all(out.data[:, c] == bc)

    def test_hand_summed_ones(self):
        # 4x4 ones, 3x3 ones kernel, pad 1 stride 2: corners see 2x2 windows,
        # edges 2x3, the center 3x3
        x = Tensor(np.ones((1, 1, 4, 4)))
        w = Tensor(np.ones((1, 1, 3, 3)))
        b = Tensor(np.zeros(1))
        out = T.conv2d(x, w, b)
        assert out.data.shape == (1, 1, 2, 2)
        np.testing.assert_array_equal(out.data[0, 0], [[4.0, 6.0], [6.0, 9.0]])

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(7)
        x = Tensor(rng.normal(size=(2, 3, 8, 8)))
        w = Tensor(rng.normal(size=(5, 3, 3, 3)))
        b = Tensor(rng.normal(size=5))
        out = T.conv2d(x, w, b)
        expected = conv2d_loops(x.data, w.data, b.data, 2, 1)
        np.testing.assert_allclose(out.data, expected, atol=1e-12, rtol=0)

    def test_random_instances_match_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            n, ci, co = rng.integers(1, 3), rng.integers(1, 4), rng.integers(1, 4)
            h = 2 * rng.integers(2, 5)
            x = Tensor(rng.normal(size=(n, ci, h, h)))
            w = Tensor(rng.normal(size=(co, ci, 3, 3)))
            b = Tensor(rng.normal(size=co))
            out = T.conv2d(x, w, b)
            np.testing.assert_allclose(
                out.data, conv2d_loops(x.data, w.data, b.data, 2, 1), atol=1e-12, rtol=0
            )

    def test_stride1_unpadded_matches_oracle(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.normal(size=(1, 2, 9, 7)))
        w = Tensor(rng.normal(size=(3, 2, 5, 3)))
        out = T.correlate2d(x, w, stride=1, padding=0)
        expected = conv2d_loops(x.data, w.data, np.zeros(3), 1, 0)
        np.testing.assert_allclose(out.data, expected, atol=1e-12, rtol=0)

    def test_shape_errors(self):
        x = Tensor.zeros((1, 3, 8, 8))
        w = Tensor.zeros((4, 2, 3, 3))  # channel mismatch
        b = Tensor.zeros((4,))
        with pytest.raises(ValueError, match="channels"):
            T.conv2d(x, w, b)
        with pytest.raises(ValueError, match="zero-sized"):
            T.correlate2d(Tensor(np.zeros((1, 1, 0, 4))), Tensor.zeros((1, 1, 3, 3)))


class TestConvTranspose2d:
    def test_single_pixel_scatter(self):
        v = 2.5
        x = Tensor(np.full((1, 1, 1, 1), v))
        w = Tensor(np.ones((1, 1, 3, 3)))
        b = Tensor(np.zeros(1))
        out = T.conv_transpose2d(x, w, b)
        assert out.data.shape == (1, 1, 2, 2)
        expected = conv_transpose2d_scatter(x.data, w.data, b.data, ConvSpec())
        np.testing.assert_allclose(out.data, expected, atol=1e-12, rtol=0)
        assert out.data.sum() == pytest.approx(4 * v)

    def test_zero_input_gives_bias(self):
        x = Tensor.zeros((2, 3, 4, 4))
        w = Tensor(np.random.default_rng(5).normal(size=(3, 2, 3, 3)))
        b = Tensor(np.array([0.5, -1.5]))
        out = T.conv_transpose2d(x, w, b)
        for c, bc in enumerate(b.data):
            assert np.all(out.data[:, c] == bc)

    def test_matches_scatter_oracle(self):
        rng = np.random.default_rng(11)
        x = Tensor(rng.normal(size=(2, 3, 4, 5)))
        w = Tensor(rng.normal(size=(3, 2, 3, 3)))
        b = Tensor(rng.normal(size=2))
        out = T.conv_transpose2d(x, w, b)
        expected = conv_transpose2d_scatter(x.data, w.data, b.data, ConvSpec())
        np.testing.assert_allclose(out.data, expected, atol=1e-12, rtol=0)
        assert out.data.shape == (2, 2, 8, 10)  # doubles spatial size

    def test_adjoint_identity(self):
        # <conv2d(x), y> == <x, conv_transpose2d(y)> with zero bias
        rng = np.random.default_rng(13)
        for _ in range(20):
            ci, co = rng.integers(1, 4), rng.integers(1, 4)
            h = 2 * rng.integers(2, 6)
            x = Tensor(rng.normal(size=(1, ci, h, h)))
            y = Tensor(rng.normal(size=(1, co, h // 2, h // 2)))
            w = Tensor(rng.normal(size=(co, ci, 3, 3)))
            lhs = float(np.sum(T.conv2d(x, w, Tensor.zeros((co,))).data * y.data))
            rhs = float(
                np.sum(x.data * T.conv_transpose2d(y, w, Tensor.zeros((ci,))).data)
            )
            assert abs(lhs - rhs) < 1e-10


# ---------------------------------------------------------------------------
# dense and pointwise ops


class TestDense:
    def test_identity_weight(self):
        x = Tensor(np.random.default_rng(0).normal(size=(3, 4)))
        out = T.dense(x, Tensor(np.eye(4)), Tensor.zeros((4,)))
        np.testing.assert_array_equal(out.data, x.data)

    def test_hand_arithmetic(self):
        x = Tensor([[1.0, 2.0]])
        w = Tensor(3.0 * np.eye(2))
        b = Tensor([1.0, 1.0])
        out = T.dense(x, w, b)
        np.testing.assert_array_equal(out.data, [[4.0, 7.0]])

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            n, f, g = rng.integers(1, 5), rng.integers(1, 7), rng.integers(1, 6)
            x = Tensor(rng.normal(size=(n, f)))
            w = Tensor(rng.normal(size=(f, g)))
            b = Tensor(rng.normal(size=g))
            np.testing.assert_allclose(
                T.dense(x, w, b).data, matmul_loops(x.data, w.data, b.data), atol=1e-12, rtol=0
            )

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dense"):
            T.dense(Tensor.zeros((2, 3)), Tensor.zeros((4, 5)), Tensor.zeros((5,)))


class TestActivations:
    def test_relu_values(self):
        out = T.activation(Tensor([-1.0, 0.0, 2.0]), "relu")
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])

    def test_sigmoid_at_zero(self):
        assert T.activation(Tensor([0.0]), "sigmoid").data[0] == 0.5

    def test_sigmoid_gradient_at_zero(self):
        err = T.grad_check(lambda x: T.sigmoid(x).sum(), Tensor([0.0]), h=1e-6)
        with Graph() as g:
            x = Tensor([0.0], requires_grad=True)
            loss = T.sigmoid(x).sum()
        g.backward(loss)
        assert x.grad[0] == pytest.approx(0.25, abs=1e-12)
        assert err < 1e-9

    def test_sigmoid_range_open_interval(self):
        # strict (0,1) holds wherever float64 can represent it: beyond
        # |x| ~ 36.7 the true value rounds to exactly 0.0 or 1.0
        x = Tensor(np.linspace(-36.0, 36.0, 1001))
        s = T.sigmoid(x).data
        assert np.all(s > 0.0) and np.all(s < 1.0)

    def test_relu_nonnegative(self):
        x = Tensor(np.random.default_rng(1).normal(size=1000))
        assert np.all(T.relu(x).data >= 0.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="activation"):
            T.activation(Tensor([0.0]), "tanh")


# ---------------------------------------------------------------------------
# backward pass


class TestBackward:
    def test_sum_gradient_is_ones(self):
        x = Tensor(np.random.default_rng(0).normal(size=(3, 4)), requires_grad=True)
        with Graph() as g:
            loss = x.sum()
        g.backward(loss)
        np.testing.assert_array_equal(x.grad, np.ones((3, 4)))

    def test_relu_subgradient(self):
        x = Tensor([-1.0, 2.0], requires_grad=True)
        with Graph() as g:
            loss = T.relu(x).sum()
        g.backward(loss)
        np.testing.assert_array_equal(x.grad, [0.0, 1.0])

    def test_non_scalar_loss_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Graph() as g:
            y = x * 2.0
        with pytest.raises(ValueError, match="scalar"):
            g.backward(y)

    def test_grads_overwritten_not_accumulated(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with Graph() as g:
            loss = (x * x).sum()
        g.backward(loss)
        first = x.grad.copy()
        g.backward(loss)
        np.testing.assert_array_equal(x.grad, first)

    def test_diamond_graph_accumulates_within_pass(self):
        # y = x*x + x*x: gradient must sum both paths within one backward
        x = Tensor([3.0], requires_grad=True)
        with Graph() as g:
            y = x * x
            loss = (y + y).sum()
        g.backward(loss)
        assert x.grad[0] == pytest.approx(12.0)

    def test_conv_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(4)
        w = Tensor(rng.normal(size=(2, 1, 3, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=2), requires_grad=True)
        x0 = rng.normal(size=(1, 1, 6, 6))

        def f(x):
            return (T.conv2d(x, w, b) * T.conv2d(x, w, b)).sum()

        assert T.grad_check(f, Tensor(x0), n_samples=36) < 1e-6

    def test_conv_transpose_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        w = Tensor(rng.normal(size=(2, 1, 3, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=1), requires_grad=True)

        def f(x):
            y = T.conv_transpose2d(x, w, b)
            return (y * y).sum()

        assert T.grad_check(f, Tensor(rng.normal(size=(1, 2, 3, 3))), n_samples=18) < 1e-6

    def test_weight_gradients_via_finite_differences(self):
        rng = np.random.default_rng(15)
        x = Tensor(rng.normal(size=(2, 2, 4, 4)))

        def f(w):
            y = T.conv2d(x, w, Tensor.zeros((3,)))
            return (y * y).sum()

        assert T.grad_check(f, Tensor(rng.normal(size=(3, 2, 3, 3))), n_samples=54) < 1e-6

    def test_div_and_pow_gradients(self):
        rng = np.random.default_rng(16)
        a0 = rng.uniform(0.5, 2.0, size=(3, 3))
        b0 = Tensor(rng.uniform(0.5, 2.0, size=(3, 3)))

        def f(a):
            return T.pos_pow(a / b0, 0.3).sum()

        assert T.grad_check(f, Tensor(a0), n_samples=9) < 1e-8

    def test_pos_pow_clamps_negative_base(self):
        x = Tensor([-1.0, 0.0, 4.0], requires_grad=True)
        with Graph() as g:
            y = T.pos_pow(x, 0.5)
            loss = y.sum()
        g.backward(loss)
        np.testing.assert_array_equal(y.data, [0.0, 0.0, 2.0])
        np.testing.assert_array_equal(x.grad, [0.0, 0.0, 0.25])

    def test_mean_and_pool_gradients(self):
        rng = np.random.default_rng(17)

        def f(x):
            return T.avg_pool2(x).mean(axis=(1, 2, 3)).sum()

        assert T.grad_check(f, Tensor(rng.normal(size=(2, 1, 6, 6))), n_samples=30) < 1e-8


class TestGradCheckItself:
    def test_sum_of_squares(self):
        x = Tensor(np.random.default_rng(9).normal(size=(4, 4)))
        assert T.grad_check(lambda t: (t * t).sum(), x, h=1e-5) < 1e-8

    def test_constant_function(self):
        x = Tensor(np.random.default_rng(10).normal(size=(3,)))
        err = T.grad_check(lambda t: (t * 0.0).sum(), x)
        assert err == 0.0


class TestDeterminism:
    def test_conv_bit_identical_across_runs(self):
        rng = np.random.default_rng(30)
        x = rng.normal(size=(2, 3, 16, 16))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        a = T.conv2d(Tensor(x), Tensor(w), Tensor(b)).data
        bb = T.conv2d(Tensor(x.copy()), Tensor(w.copy()), Tensor(b.copy())).data
        assert np.array_equal(a, bb)


class TestConvSpec:
    def test_size_arithmetic(self):
        spec = ConvSpec()
        assert spec.out_size(128) == 64
        assert spec.out_size_transposed(64) == 128
        for s in (4, 8, 16, 128):
            assert spec.out_size(s) == s // 2
            assert spec.out_size_transposed(s // 2) == s
