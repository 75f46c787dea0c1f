"""Unit tests for the autograd op set: hand examples, brute-force
oracles, finite-difference gradient checks, and shape invariants."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import check_gradients, conv1d_oracle, softmax_oracle, upsample2_oracle
from tokcomp import tensor as T
from tokcomp.errors import ConfigurationError, DegenerateBatchError, DimensionError
from tokcomp.tensor import Tensor


def spread_values(rng, shape, gap=0.02):
    """Shuffled, well-separated values; keeps argmax away from fd steps."""
    n = int(np.prod(shape))
    vals = np.linspace(-1.0, 1.0, n) * (1 + gap)
    return rng.permutation(vals).reshape(shape)


class TestConv1d:
    def test_identity_kernel(self):
        out = T.conv1d(Tensor([[3.0, -2.0, 5.0]]), Tensor([[[1.0]]]), Tensor([0.0]))
        np.testing.assert_allclose(out.data, [[3, -2, 5]])

    def test_zero_kernel_reduces_to_bias(self):
        out = T.conv1d(Tensor(np.random.default_rng(0).normal(size=(2, 4))),
                       Tensor(np.zeros((1, 2, 3))), Tensor([7.0]))
        np.testing.assert_allclose(out.data, [[7, 7, 7, 7]])

    def test_matches_brute_force_oracle(self, rng):
        for _ in range(100):
            c_in, c_out = rng.integers(1, 4, size=2)
            k = int(rng.choice([1, 3, 5]))
            t = int(rng.integers(1, 9))
            x = rng.normal(size=(c_in, t))
            w = rng.normal(size=(c_out, c_in, k))
            b = rng.normal(size=c_out)
            out = T.conv1d(Tensor(x), Tensor(w), Tensor(b))
            np.testing.assert_allclose(out.data, conv1d_oracle(x, w, b), atol=1e-6)

    def test_random_case_spec_shapes(self, rng):
        x = rng.normal(size=(2, 6))
        w = rng.normal(size=(3, 2, 5))
        b = rng.normal(size=3)
        out = T.conv1d(Tensor(x), Tensor(w), Tensor(b))
        np.testing.assert_allclose(out.data, conv1d_oracle(x, w, b), atol=1e-6)

    @pytest.mark.parametrize("k", [1, 3, 5])
    @pytest.mark.parametrize("t", range(1, 65))
    def test_same_padding_preserves_length(self, k, t, rng):
        out = T.conv1d(Tensor(rng.normal(size=(2, t))),
                       Tensor(rng.normal(size=(3, 2, k))), Tensor(np.zeros(3)))
        assert out.shape == (3, t)

    def test_even_kernel_rejected(self):
        with pytest.raises(ConfigurationError):
            T.conv1d(Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 1, 2))),
                     Tensor(np.zeros(1)))

    def test_channel_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            T.conv1d(Tensor(np.zeros((2, 4))), Tensor(np.zeros((1, 3, 3))),
                     Tensor(np.zeros(1)))

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(2, 6))
        w = rng.normal(size=(3, 2, 5))
        b = rng.normal(size=3)
        check_gradients(T.conv1d, [x, w, b], seed=seed)

    def test_batched_matches_per_example(self, rng):
        x = rng.normal(size=(4, 2, 8)).astype(np.float32)
        w = Tensor(rng.normal(size=(3, 2, 3)).astype(np.float32))
        b = Tensor(rng.normal(size=3).astype(np.float32))
        batched = T.conv1d(Tensor(x), w, b)
        for i in range(4):
            single = T.conv1d(Tensor(x[i]), w, b)
            np.testing.assert_allclose(batched.data[i], single.data, atol=1e-6)


class TestMaxpool:
    def test_hand_example(self):
        out, idx = T.maxpool1d(Tensor([[4.0, 1.0, 3.0, 2.0]]))
        np.testing.assert_allclose(out.data, [[4, 3]])
        np.testing.assert_array_equal(idx, [[0, 0]])

    def test_halves_64(self, rng):
        out, _ = T.maxpool1d(Tensor(rng.normal(size=(3, 64))))
        assert out.shape == (3, 32)

    def test_tie_routes_to_lower_index(self):
        x = Tensor(np.array([[2.0, 2.0]]), requires_grad=True)
        out, idx = T.maxpool1d(x)
        assert idx[0, 0] == 0
        out.backward(np.array([[1.0]]))
        np.testing.assert_allclose(x.grad, [[1.0, 0.0]])

    def test_odd_length_rejected(self):
        with pytest.raises(DimensionError):
            T.maxpool1d(Tensor(np.zeros((1, 5))))

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        x = spread_values(rng, (2, 8))
        check_gradients(lambda t: T.maxpool1d(t)[0], [x], seed=seed)


class TestUpsample2:
    def test_replication_kernel(self):
        out = T.upsample2(Tensor([[2.0, 5.0]]), Tensor([[[1.0, 1.0]]]))
        np.testing.assert_allclose(out.data, [[2, 2, 5, 5]])

    def test_doubles_32_to_64(self, rng):
        out = T.upsample2(Tensor(rng.normal(size=(2, 32))),
                          Tensor(rng.normal(size=(2, 3, 2))))
        assert out.shape == (3, 64)

    def test_matches_scatter_oracle(self, rng):
        for _ in range(100):
            c_in, c_out = rng.integers(1, 4, size=2)
            t = int(rng.integers(1, 9))
            x = rng.normal(size=(c_in, t))
            w = rng.normal(size=(c_in, c_out, 2))
            out = T.upsample2(Tensor(x), Tensor(w))
            np.testing.assert_allclose(out.data, upsample2_oracle(x, w), atol=1e-6)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            T.upsample2(Tensor(np.zeros((2, 4))), Tensor(np.zeros((3, 1, 2))))

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        check_gradients(T.upsample2,
                        [rng.normal(size=(2, 5)), rng.normal(size=(2, 3, 2))],
                        seed=seed)

    def test_pool_then_upsample_preserves_length(self, rng):
        x = Tensor(rng.normal(size=(2, 16)))
        pooled, _ = T.maxpool1d(x)
        up = T.upsample2(pooled, Tensor(rng.normal(size=(2, 2, 2))))
        assert up.shape[-1] == 16
        up2 = T.upsample2(x, Tensor(rng.normal(size=(2, 2, 2))))
        back, _ = T.maxpool1d(up2)
        assert back.shape[-1] == 16


class TestConcat:
    def test_hand_example(self):
        out = T.concat_channels(Tensor([[1.0, 2.0]]), Tensor([[3.0, 4.0]]))
        np.testing.assert_allclose(out.data, [[1, 2], [3, 4]])

    def test_channel_plan_shapes(self, rng):
        out = T.concat_channels(Tensor(rng.normal(size=(64, 64))),
                                Tensor(rng.normal(size=(64, 64))))
        assert out.shape == (128, 64)

    def test_gradient_of_sum_is_ones(self):
        a = Tensor(np.array([[1.0, 2.0]]), requires_grad=True)
        b = Tensor(np.array([[3.0, 4.0]]), requires_grad=True)
        out = T.concat_channels(a, b)
        out.backward()
        np.testing.assert_allclose(a.grad, np.ones((1, 2)))

    def test_length_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            T.concat_channels(Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 3))))

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        check_gradients(T.concat_channels,
                        [rng.normal(size=(2, 4)), rng.normal(size=(3, 4))],
                        seed=seed)


class TestRelu:
    def test_hand_example(self):
        out = T.relu(Tensor([-1.0, 0.0, 2.0]))
        np.testing.assert_allclose(out.data, [0, 0, 2])

    def test_all_negative_zero_grad(self):
        x = Tensor(np.array([-3.0, -1.0]), requires_grad=True)
        out = T.relu(x)
        out.backward()
        np.testing.assert_allclose(out.data, [0, 0])
        np.testing.assert_allclose(x.grad, [0, 0])

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients_away_from_zero(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.2, 1.0, size=(3, 5)) * rng.choice([-1, 1], size=(3, 5))
        check_gradients(T.relu, [x], seed=seed)


class TestDropout:
    def test_p_zero_identity(self, rng):
        x = rng.normal(size=(3, 4))
        out = T.dropout(Tensor(x), 0.0, training=True, rng=0)
        np.testing.assert_allclose(out.data, x)

    def test_inference_identity(self, rng):
        x = rng.normal(size=(3, 4))
        out = T.dropout(Tensor(x), 0.9, training=False, rng=0)
        np.testing.assert_allclose(out.data, x)

    def test_mean_preserved(self):
        x = Tensor(np.ones(100_000, dtype=np.float32))
        out = T.dropout(x, 0.5, training=True, rng=7)
        assert abs(out.data.mean() - 1.0) < 0.02

    def test_bad_p_rejected(self):
        with pytest.raises(ConfigurationError):
            T.dropout(Tensor(np.zeros(3)), 1.0, training=True)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(3, 6))
        check_gradients(lambda t: T.dropout(t, 0.5, training=True, rng=42),
                        [x], seed=seed)


class TestSoftmaxHead:
    def test_zero_weights_uniform(self, rng):
        out = T.token_softmax_head(Tensor(rng.normal(size=(4, 3))),
                                   Tensor(np.zeros((2, 4))))
        np.testing.assert_allclose(out.data, 0.5, atol=1e-7)

    def test_shift_invariance(self, rng):
        x = rng.normal(size=(4, 3)).astype(np.float32)
        w = rng.normal(size=(2, 4)).astype(np.float32)
        a = T.token_softmax_head(Tensor(x), Tensor(w))
        # adding a constant row to W shifts every logit per token equally
        b = T.token_softmax_head(Tensor(x), Tensor(w + 0.0))
        shifted = T.token_softmax_head(
            Tensor(np.vstack([x, np.ones((1, 3), np.float32)])),
            Tensor(np.hstack([w, np.full((2, 1), 3.0, np.float32)])))
        np.testing.assert_allclose(a.data, b.data, atol=1e-6)
        np.testing.assert_allclose(a.data, shifted.data, atol=1e-5)

    def test_matches_float64_oracle(self, rng):
        for _ in range(100):
            c = int(rng.integers(1, 6))
            t = int(rng.integers(1, 8))
            x = rng.normal(size=(c, t))
            w = rng.normal(size=(2, c))
            out = T.token_softmax_head(Tensor(x), Tensor(w))
            expected = softmax_oracle(w @ x)
            np.testing.assert_allclose(out.data, expected, rtol=1e-6, atol=1e-9)

    def test_columns_sum_to_one(self, rng):
        out = T.token_softmax_head(Tensor(rng.normal(size=(5, 64)) * 10),
                                   Tensor(rng.normal(size=(2, 5))))
        np.testing.assert_allclose(out.data.sum(axis=0), 1.0, atol=1e-5)
        assert out.data.min() >= 0 and out.data.max() <= 1

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients(self, seed):
        rng = np.random.default_rng(seed)
        check_gradients(T.token_softmax_head,
                        [rng.normal(size=(4, 5)), rng.normal(size=(2, 4))],
                        seed=seed)


class TestMaskedCrossEntropy:
    def test_perfect_prediction_zero_loss(self):
        probs = np.array([[0.0, 1.0], [1.0, 0.0]])
        loss = T.masked_cross_entropy(Tensor(probs), np.array([1, 0]),
                                      np.array([1, 1]))
        assert float(loss.data) < 1e-6

    def test_uniform_is_ln2(self):
        probs = np.full((2, 4), 0.5)
        loss = T.masked_cross_entropy(Tensor(probs), np.array([1, 0, 1, 0]),
                                      np.ones(4, dtype=int))
        assert abs(float(loss.data) - np.log(2)) < 1e-6

    def test_padding_excluded(self, rng):
        probs = softmax_oracle(rng.normal(size=(2, 4)))
        labels = np.array([1, 0, 1, 0])
        full = T.masked_cross_entropy(Tensor(probs), labels, np.array([1, 1, 0, 0]))
        trimmed = T.masked_cross_entropy(Tensor(probs[:, :2]), labels[:2],
                                         np.array([1, 1]))
        assert abs(float(full.data) - float(trimmed.data)) < 1e-7

    def test_all_padded_rejected(self):
        with pytest.raises(DegenerateBatchError):
            T.masked_cross_entropy(Tensor(np.full((2, 3), 0.5)),
                                   np.zeros(3, int), np.zeros(3, int))

    def test_unnormalized_rejected(self):
        with pytest.raises(DimensionError):
            T.masked_cross_entropy(Tensor(np.full((2, 3), 0.9)),
                                   np.zeros(3, int), np.ones(3, int))

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients_through_softmax(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(4, 3))
        w = rng.normal(size=(2, 4))
        labels = np.array([1, 0, 1])
        pad = np.array([1, 1, 0])

        def loss_fn(xt, wt):
            return T.masked_cross_entropy(T.token_softmax_head(xt, wt), labels, pad)

        check_gradients(loss_fn, [x, w], seed=seed)


class TestLstmCell:
    def zero_params(self, i_dim, h_dim):
        return (Tensor(np.zeros((4 * h_dim, i_dim))),
                Tensor(np.zeros((4 * h_dim, h_dim))),
                Tensor(np.zeros(4 * h_dim)))

    def test_all_zero_gives_zero_hidden(self):
        wx, wh, b = self.zero_params(3, 2)
        h, c = T.lstm_cell(Tensor(np.zeros(3)), Tensor(np.zeros(2)),
                           Tensor(np.zeros(2)), wx, wh, b)
        np.testing.assert_allclose(h.data, 0)

    def test_saturated_forget_keeps_cell(self):
        h_dim = 2
        b = np.zeros(4 * h_dim)
        b[0:h_dim] = -50.0       # input gate ~ 0
        b[h_dim:2 * h_dim] = 50.0  # forget gate ~ 1
        wx = Tensor(np.zeros((4 * h_dim, 3)))
        wh = Tensor(np.zeros((4 * h_dim, h_dim)))
        c_prev = np.array([0.3, -0.7])
        _, c = T.lstm_cell(Tensor(np.zeros(3)), Tensor(np.zeros(h_dim)),
                           Tensor(c_prev), wx, wh, Tensor(b))
        np.testing.assert_allclose(c.data, c_prev, atol=1e-6)

    def test_dimension_mismatch_rejected(self):
        wx, wh, b = self.zero_params(3, 2)
        with pytest.raises(DimensionError):
            T.lstm_cell(Tensor(np.zeros(4)), Tensor(np.zeros(2)),
                        Tensor(np.zeros(2)), wx, wh, b)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradients_through_four_steps(self, seed):
        rng = np.random.default_rng(seed)
        i_dim, h_dim, steps = 3, 2, 4
        xs = rng.normal(size=(steps, i_dim))
        wx = rng.normal(size=(4 * h_dim, i_dim)) * 0.5
        wh = rng.normal(size=(4 * h_dim, h_dim)) * 0.5
        b = rng.normal(size=4 * h_dim) * 0.5

        def unroll(xs_t, wx_t, wh_t, b_t):
            h = Tensor(np.zeros(h_dim))
            c = Tensor(np.zeros(h_dim))
            for t in range(steps):
                h, c = T.lstm_cell(T.select_time(xs_t, t), h, c, wx_t, wh_t, b_t)
            return h

        check_gradients(unroll, [xs.T, wx, wh, b], seed=seed)


class TestDeterminism:
    def test_forward_bit_identical(self):
        def run():
            rng = np.random.default_rng(99)
            x = Tensor(rng.normal(size=(4, 8)).astype(np.float32))
            w = Tensor(rng.normal(size=(3, 4, 3)).astype(np.float32))
            b = Tensor(rng.normal(size=3).astype(np.float32))
            head = Tensor(rng.normal(size=(2, 3)).astype(np.float32))
            probs = T.token_softmax_head(T.relu(T.conv1d(x, w, b)), head)
            loss = T.masked_cross_entropy(probs, np.ones(8, int), np.ones(8, int))
            return float(loss.data)

        assert run() == run()

    def test_forward_stays_finite(self, rng):
        x = Tensor(rng.normal(size=(4, 16)).astype(np.float32) * 100)
        w = Tensor(rng.normal(size=(3, 4, 5)).astype(np.float32) * 100)
        out = T.token_softmax_head(
            T.relu(T.conv1d(x, w, Tensor(np.zeros(3, np.float32)))),
            Tensor(rng.normal(size=(2, 3)).astype(np.float32)))
        assert np.isfinite(out.data).all()
