import numpy as np
import pytest

from gunwatch import layers as L


def naive_conv2d(x, w, b):
    """Quadruple-loop same-padded cross-correlation; the test oracle."""
    c_in, h, wd = x.shape
    c_out = w.shape[0]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((c_out, h, wd))
    for o in range(c_out):
        for i in range(h):
            for j in range(wd):
                acc = 0.0
                for c in range(c_in):
                    for ki in range(3):
                        for kj in range(3):
                            acc += xp[c, i + ki, j + kj] * w[o, c, ki, kj]
                out[o, i, j] = acc + b[o]
    return out


def naive_maxpool2x2(x):
    c, h, w = x.shape
    out = np.zeros((c, h // 2, w // 2))
    for ch in range(c):
        for i in range(h // 2):
            for j in range(w // 2):
                out[ch, i, j] = x[ch, 2 * i : 2 * i + 2, 2 * j : 2 * j + 2].max()
    return out


def fd_grad(f, arr, eps=1e-6):
    """Central finite differences of scalar f with respect to arr, in place."""
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f()
        flat[i] = orig - eps
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2 * eps)
    return grad


def max_rel_err(a, b):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float((np.abs(a - b) / denom).max())


class TestConv2d:
    def test_identity_kernel(self, rng):
        x = rng.standard_normal((3, 6, 6))
        w = np.zeros((3, 3, 3, 3))
        for o in range(3):
            w[o, o, 1, 1] = 1.0
        out = L.conv2d_forward(x, w, np.zeros(3))
        np.testing.assert_allclose(out, x, atol=1e-15)

    def test_zero_weights_give_bias_maps(self, rng):
        x = rng.standard_normal((2, 4, 4))
        b = np.array([1.5, -2.0])
        out = L.conv2d_forward(x, np.zeros((2, 2, 3, 3)), b)
        assert (out[0] == 1.5).all() and (out[1] == -2.0).all()

    def test_matches_naive_oracle(self, rng):
        x = rng.standard_normal((1, 5, 5))
        w = rng.standard_normal((2, 1, 3, 3))
        b = rng.standard_normal(2)
        np.testing.assert_allclose(
            L.conv2d_forward(x, w, b), naive_conv2d(x, w, b), atol=1e-12
        )

    def test_batched_equals_per_sample(self, rng):
        x = rng.standard_normal((4, 2, 6, 6))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        batched = L.conv2d_forward(x, w, b)
        for n in range(4):
            np.testing.assert_allclose(batched[n], L.conv2d_forward(x[n], w, b), atol=1e-12)

    def test_zero_grad_out_zero_grads(self, rng):
        x = rng.standard_normal((2, 4, 4))
        w = rng.standard_normal((3, 2, 3, 3))
        dx, dw, db = L.conv2d_backward(x, w, np.zeros((3, 4, 4)))
        assert not dx.any() and not dw.any() and not db.any()

    def test_grad_bias_is_channel_sum(self, rng):
        x = rng.standard_normal((2, 4, 4))
        w = rng.standard_normal((3, 2, 3, 3))
        g = rng.standard_normal((3, 4, 4))
        _, _, db = L.conv2d_backward(x, w, g)
        np.testing.assert_allclose(db, g.sum(axis=(1, 2)), atol=1e-12)

    def test_backward_matches_finite_differences(self, rng):
        x = rng.standard_normal((2, 5, 4))
        w = rng.standard_normal((2, 2, 3, 3))
        b = rng.standard_normal(2)
        g = rng.standard_normal((2, 5, 4))
        dx, dw, db = L.conv2d_backward(x, w, g)
        loss = lambda: float((L.conv2d_forward(x, w, b) * g).sum())
        assert max_rel_err(fd_grad(loss, x), dx) < 1e-5
        assert max_rel_err(fd_grad(loss, w), dw) < 1e-5
        assert max_rel_err(fd_grad(loss, b), db) < 1e-5

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            L.conv2d_forward(rng.standard_normal((2, 4, 4)), rng.standard_normal((3, 1, 3, 3)), np.zeros(3))


class TestRelu:
    def test_all_negative(self):
        x = -np.ones((2, 3))
        assert not L.relu_forward(x).any()
        assert not L.relu_backward(x, np.ones((2, 3))).any()

    def test_all_positive_identity(self, rng):
        x = np.abs(rng.standard_normal((3, 3))) + 0.1
        g = rng.standard_normal((3, 3))
        np.testing.assert_array_equal(L.relu_forward(x), x)
        np.testing.assert_array_equal(L.relu_backward(x, g), g)

    def test_gradient_matches_fd_away_from_kink(self, rng):
        x = rng.standard_normal((4, 4))
        x[np.abs(x) < 0.1] += 0.2  # keep inputs off the kink
        g = rng.standard_normal((4, 4))
        analytic = L.relu_backward(x, g)
        loss = lambda: float((L.relu_forward(x) * g).sum())
        assert max_rel_err(fd_grad(loss, x), analytic) < 1e-6


class TestMaxPool:
    def test_simple_window(self):
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
        out, arg = L.maxpool2x2_forward(x)
        assert out[0, 0, 0] == 4.0

    def test_tie_routes_to_first_cell(self):
        x = np.ones((1, 2, 2))
        out, arg = L.maxpool2x2_forward(x)
        grad = L.maxpool2x2_backward(np.full((1, 1, 1), 5.0), arg)
        assert grad[0].tolist() == [[5.0, 0.0], [0.0, 0.0]]

    def test_matches_naive_oracle(self, rng):
        x = rng.standard_normal((1, 8, 8))
        out, _ = L.maxpool2x2_forward(x)
        np.testing.assert_allclose(out, naive_maxpool2x2(x), atol=1e-15)

    def test_backward_matches_fd_with_distinct_values(self, rng):
        x = rng.permutation(64).astype(np.float64).reshape(1, 8, 8)
        g = rng.standard_normal((1, 4, 4))
        out, arg = L.maxpool2x2_forward(x)
        analytic = L.maxpool2x2_backward(g, arg)
        loss = lambda: float((L.maxpool2x2_forward(x)[0] * g).sum())
        assert max_rel_err(fd_grad(loss, x, eps=1e-4), analytic) < 1e-6

    def test_odd_size_rejected(self):
        with pytest.raises(ValueError):
            L.maxpool2x2_forward(np.zeros((1, 3, 4)))


class TestDense:
    def test_identity_weights(self, rng):
        x = rng.standard_normal(5)
        np.testing.assert_array_equal(L.dense_forward(x, np.eye(5), np.zeros(5)), x)

    def test_zero_input_gives_bias(self, rng):
        w = rng.standard_normal((3, 4))
        b = rng.standard_normal(3)
        np.testing.assert_array_equal(L.dense_forward(np.zeros(4), w, b), b)

    def test_backward_matches_fd(self, rng):
        x = rng.standard_normal(4)
        w = rng.standard_normal((3, 4))
        b = rng.standard_normal(3)
        g = rng.standard_normal(3)
        dx, dw, db = L.dense_backward(x, w, g)
        loss = lambda: float((L.dense_forward(x, w, b) * g).sum())
        assert max_rel_err(fd_grad(loss, x), dx) < 1e-6
        assert max_rel_err(fd_grad(loss, w), dw) < 1e-6
        assert max_rel_err(fd_grad(loss, b), db) < 1e-6

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            L.dense_forward(rng.standard_normal(4), rng.standard_normal((3, 5)), np.zeros(3))


class TestSoftmax:
    def test_uniform_for_equal_logits(self):
        for k in (2, 5, 11):
            np.testing.assert_allclose(L.softmax(np.zeros(k)), np.full(k, 1.0 / k), atol=1e-15)

    def test_shift_invariance(self, rng):
        z = rng.standard_normal(6)
        np.testing.assert_allclose(L.softmax(z), L.softmax(z + 123.456), atol=1e-12)

    def test_closed_form_pair(self):
        np.testing.assert_allclose(L.softmax(np.array([0.0, np.log(3.0)])), [0.25, 0.75], atol=1e-12)

    def test_sums_to_one(self, rng):
        for _ in range(20):
            p = L.softmax(rng.standard_normal(9) * 50)
            assert abs(p.sum() - 1.0) < 1e-12
            assert (p > 0).all()

    def test_rejects_non_finite(self):
        with pytest.raises(FloatingPointError):
            L.softmax(np.array([1.0, np.inf]))


class TestCrossEntropy:
    def test_certain_prediction_zero_loss(self):
        loss, grad = L.cross_entropy(np.array([0.0, 1.0]), 1)
        assert loss == 0.0
        np.testing.assert_allclose(grad, [0.0, 0.0], atol=1e-15)

    def test_uniform_two_class_loss_ln2(self):
        loss, _ = L.cross_entropy(np.array([0.5, 0.5]), 0)
        assert abs(loss - np.log(2)) < 1e-15

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            L.cross_entropy(np.array([0.5, 0.5]), 2)

    def test_fused_gradient_matches_fd(self, rng):
        logits = rng.standard_normal(5)
        label = 3

        def loss_fn():
            return L.cross_entropy(L.softmax(logits), label)[0]

        _, grad = L.cross_entropy(L.softmax(logits), label)
        assert max_rel_err(fd_grad(loss_fn, logits), grad) < 1e-6

    def test_batch_mean_reduction(self, rng):
        probs = L.softmax(rng.standard_normal((4, 3)))
        labels = np.array([0, 1, 2, 1])
        loss, grad = L.cross_entropy(probs, labels)
        singles = [L.cross_entropy(probs[i], labels[i]) for i in range(4)]
        assert abs(loss - np.mean([s[0] for s in singles])) < 1e-12
        np.testing.assert_allclose(grad, np.stack([s[1] for s in singles]) / 4, atol=1e-12)
