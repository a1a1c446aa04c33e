import numpy as np
import pytest

from ssrgan.errors import NumericsError
from ssrgan.optim import (AdamState, adam_step, clip_global_norm,
                          finite_diff_check, zero_grads)
from ssrgan.tensor import Tensor


class TestAdam:
    def test_first_step_moves_by_lr(self, rng):
        """With bias correction, step 1 moves each coordinate by ~lr*sign(g)."""
        p = Tensor(np.zeros(4), requires_grad=True)
        p.grad = rng.normal(size=4)
        adam_step([p], AdamState.for_params([p], lr=0.1))
        np.testing.assert_allclose(p.data, -0.1 * np.sign(p.grad), atol=1e-6)

    def test_matches_reference_recurrence(self, rng):
        """Oracle: independent re-implementation of the standard recurrence."""
        lr, b1, b2, eps = 1e-2, 0.5, 0.999, 1e-8
        x = rng.normal(size=5)
        p = Tensor(x.copy(), requires_grad=True)
        state = AdamState.for_params([p], lr=lr, beta1=b1, beta2=b2, epsilon=eps)
        ref, m, v = x.copy(), np.zeros(5), np.zeros(5)
        for t in range(1, 6):
            g = rng.normal(size=5)
            p.grad = g.copy()
            adam_step([p], state)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            ref -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        np.testing.assert_allclose(p.data, ref, atol=1e-14)

    def test_missing_grad_leaves_param_unchanged(self):
        p = Tensor(np.ones(3), requires_grad=True)
        adam_step([p], AdamState.for_params([p]))
        np.testing.assert_array_equal(p.data, np.ones(3))

    def test_non_finite_grad_raises(self):
        p = Tensor(np.ones(2), requires_grad=True)
        p.grad = np.array([1.0, np.inf])
        with pytest.raises(NumericsError, match="non-finite"):
            adam_step([p], AdamState.for_params([p]))

    def test_param_count_mismatch_rejected(self):
        p = Tensor(np.ones(2), requires_grad=True)
        with pytest.raises(ValueError):
            adam_step([p, p], AdamState.for_params([p]))


class TestClipAndZero:
    def test_clip_rescales_to_max_norm(self):
        p = Tensor(np.zeros(2), requires_grad=True)
        p.grad = np.array([3.0, 4.0])
        norm = clip_global_norm([p], 1.0)
        assert norm == pytest.approx(5.0)
        np.testing.assert_allclose(p.grad, [0.6, 0.8])

    def test_clip_noop_below_threshold(self):
        p = Tensor(np.zeros(2), requires_grad=True)
        p.grad = np.array([0.3, 0.4])
        clip_global_norm([p], 1.0)
        np.testing.assert_allclose(p.grad, [0.3, 0.4])

    def test_clip_is_global_across_params(self):
        a = Tensor(np.zeros(1), requires_grad=True)
        b = Tensor(np.zeros(1), requires_grad=True)
        a.grad, b.grad = np.array([3.0]), np.array([4.0])
        clip_global_norm([a, b], 1.0)
        assert a.grad[0] == pytest.approx(0.6)
        assert b.grad[0] == pytest.approx(0.8)

    def test_zero_grads(self):
        p = Tensor(np.zeros(2), requires_grad=True)
        p.grad = np.ones(2)
        zero_grads([p])
        assert p.grad is None


class TestFiniteDiffCheck:
    def test_correct_gradient_passes(self, rng):
        x = Tensor(rng.normal(size=(3, 3)))
        assert finite_diff_check(lambda t: (t ** 2).sum(), x) < 1e-8

    def test_detects_wrong_gradient(self, rng):
        # sum() with a deliberately detached input has zero autodiff gradient
        x = Tensor(rng.normal(size=4) + 2.0)
        err = finite_diff_check(lambda t: (t.detach() * t.detach()).sum(), x)
        assert err > 1e-2
