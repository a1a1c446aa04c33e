import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssrgan.errors import NumericsError
from ssrgan.losses import (LossParts, LossWeights, MmdConfig, ae_loss,
                           cycle_loss, lsgan_loss, mae, median_bandwidth,
                           mk_mmd, mse, total_loss)
from ssrgan.tensor import Tensor


class TestBasicLosses:
    def test_mae_oracle(self, rng):
        x, y = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        assert mae(Tensor(x), Tensor(y)).item() == pytest.approx(
            np.mean(np.abs(x - y)), abs=1e-14)

    def test_mse_oracle(self, rng):
        x, y = rng.normal(size=(3, 4)), rng.normal(size=(3, 4))
        assert mse(Tensor(x), Tensor(y)).item() == pytest.approx(
            np.mean((x - y) ** 2), abs=1e-14)

    def test_cycle_loss_is_sum_of_maes(self, rng):
        a, ac = rng.normal(size=(2, 1, 8)), rng.normal(size=(2, 1, 8))
        b, bc = rng.normal(size=(2, 1, 8)), rng.normal(size=(2, 1, 8))
        got = cycle_loss(Tensor(a), Tensor(ac), Tensor(b), Tensor(bc)).item()
        want = np.mean(np.abs(ac - a)) + np.mean(np.abs(bc - b))
        assert got == pytest.approx(want, abs=1e-14)

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(ValueError, match="shapes"):
            mae(Tensor(rng.normal(size=(2, 3))), Tensor(rng.normal(size=(3, 2))))


class TestLsgan:
    def test_discriminator_targets(self):
        real = Tensor(np.array([1.0, 1.0]))
        fake = Tensor(np.array([0.0, 0.0]))
        assert lsgan_loss(real, fake, "discriminator").item() == pytest.approx(0.0)
        # hand-computed: (0.5-1)^2 + 0.5^2 = 0.5
        mid = Tensor(np.array([0.5]))
        assert lsgan_loss(mid, mid, "discriminator").item() == pytest.approx(0.5)

    def test_generator_target_is_one(self):
        assert lsgan_loss(None, Tensor(np.array([1.0])), "generator").item() \
            == pytest.approx(0.0)
        assert lsgan_loss(None, Tensor(np.array([0.0, 2.0])), "generator").item() \
            == pytest.approx(1.0)   # mean of 1 and 1

    def test_discriminator_requires_real_scores(self):
        with pytest.raises(ValueError):
            lsgan_loss(None, Tensor(np.zeros(2)), "discriminator")

    def test_unknown_role_rejected(self):
        with pytest.raises(ValueError):
            lsgan_loss(Tensor(np.zeros(2)), Tensor(np.zeros(2)), "judge")


class TestMkMmd:
    def test_two_point_closed_form(self):
        """Single sample per side: MMD^2 = 2(1 - exp(-d^2 / 2 sigma^2))."""
        x = np.array([[1.0, 2.0, 3.0]])
        y = np.array([[2.0, 0.0, 3.5]])
        d2 = float(np.sum((x - y) ** 2))
        sigma = 1.7
        cfg = MmdConfig(bandwidth_multipliers=(1.0,), fixed_bandwidth=sigma)
        want = 2.0 * (1.0 - np.exp(-d2 / (2.0 * sigma ** 2)))
        assert abs(mk_mmd(Tensor(x), Tensor(y), cfg).item() - want) <= 1e-12

    def test_identical_samples_give_exact_zero(self, rng):
        x = rng.normal(size=(5, 7))
        cfg = MmdConfig(fixed_bandwidth=2.0)
        assert mk_mmd(Tensor(x), Tensor(x.copy()), cfg).item() == 0.0

    @given(st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_symmetry_and_nonnegativity(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(int(rng.integers(1, 6)), 4))
        y = rng.normal(size=(int(rng.integers(1, 6)), 4))
        cfg = MmdConfig(fixed_bandwidth=1.5)
        fwd = mk_mmd(Tensor(x), Tensor(y), cfg).item()
        rev = mk_mmd(Tensor(y), Tensor(x), cfg).item()
        assert fwd == pytest.approx(rev, abs=1e-12)
        assert fwd >= -1e-12

    def test_multi_kernel_sums_single_kernels(self, rng):
        x, y = rng.normal(size=(3, 4)), rng.normal(size=(4, 4))
        multi = mk_mmd(Tensor(x), Tensor(y),
                       MmdConfig((0.5, 1.0, 2.0), fixed_bandwidth=1.3)).item()
        singles = sum(
            mk_mmd(Tensor(x), Tensor(y),
                   MmdConfig((m,), fixed_bandwidth=1.3)).item()
            for m in (0.5, 1.0, 2.0))
        assert multi == pytest.approx(singles, abs=1e-12)

    def test_median_bandwidth_two_points(self):
        x = np.array([[0.0, 0.0]])
        y = np.array([[3.0, 4.0]])
        assert median_bandwidth(x, y) == pytest.approx(5.0)

    def test_flattens_feature_maps(self, rng):
        x = rng.normal(size=(3, 2, 5))
        cfg = MmdConfig(fixed_bandwidth=2.0)
        a = mk_mmd(Tensor(x), Tensor(x[::-1].copy()), cfg).item()
        b = mk_mmd(Tensor(x.reshape(3, 10)), Tensor(x[::-1].reshape(3, 10)),
                   cfg).item()
        assert a == pytest.approx(b, abs=1e-14)

    def test_feature_dim_mismatch_rejected(self, rng):
        with pytest.raises(ValueError, match="dims"):
            mk_mmd(Tensor(rng.normal(size=(2, 3))), Tensor(rng.normal(size=(2, 4))))


class TestTotalLoss:
    def test_weighted_sum_oracle(self, rng):
        vals = rng.normal(size=5) ** 2
        parts = LossParts(*[Tensor(np.array(v)) for v in vals])
        w = LossWeights(2.0, 3.0, 0.5, 1.5, 0.25)
        want = np.dot(vals, [2.0, 3.0, 0.5, 1.5, 0.25])
        assert total_loss(parts, w).item() == pytest.approx(want, abs=1e-12)

    def test_non_finite_part_raises_named_error(self):
        parts = LossParts(cycle=Tensor(np.array(1.0)), gan=Tensor(np.array(np.nan)))
        with pytest.raises(NumericsError, match="gan"):
            total_loss(parts, LossWeights())

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            total_loss(LossParts(), LossWeights(lambda_cyc=-1.0))

    def test_ae_loss_oracle(self, rng):
        a, ra = rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
        b, rb = rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
        got = ae_loss(Tensor(ra), Tensor(a), Tensor(rb), Tensor(b)).item()
        assert got == pytest.approx(np.mean((ra - a) ** 2) + np.mean((rb - b) ** 2),
                                    abs=1e-14)
