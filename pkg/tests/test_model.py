import numpy as np
import pytest

from ssrgan.errors import ConfigError
from ssrgan.gradcheck import small_model_config
from ssrgan.model import (BLOCK_IDS, ModelConfig, build_model,
                          parameter_count)
from ssrgan.tensor import Tensor


@pytest.fixture
def full_model():
    return build_model(ModelConfig())


class TestShapes:
    def test_forward_reverse_preserve_window_shape(self, full_model, rng):
        x = Tensor(rng.normal(size=(3, 1, 250)))
        assert full_model.generator_forward(x).data.shape == (3, 1, 250)
        assert full_model.generator_reverse(x).data.shape == (3, 1, 250)

    def test_middle_content_shapes_match_both_sides(self, full_model, rng):
        x = Tensor(rng.normal(size=(2, 1, 250)))
        phi1 = full_model.middle_content(x, "a")
        phi2 = full_model.middle_content(x, "b")
        assert phi1.data.shape == phi2.data.shape == (2, 32, 125)

    def test_autoencoder_shapes(self, full_model, rng):
        x = Tensor(rng.normal(size=(2, 1, 250)))
        for side in ("a", "b"):
            assert full_model.autoencode(x, side).data.shape == (2, 1, 250)

    def test_discriminator_scalar_per_window(self, full_model, rng):
        x = Tensor(rng.normal(size=(5, 1, 250)))
        for side in ("a", "b"):
            assert full_model.discriminate(x, side).data.shape == (5,)

    def test_rejects_wrong_window_length(self, full_model, rng):
        with pytest.raises(ValueError, match="shape"):
            full_model.generator_forward(Tensor(rng.normal(size=(1, 1, 128))))

    def test_rejects_unknown_side(self, full_model, rng):
        x = Tensor(rng.normal(size=(1, 1, 250)))
        with pytest.raises(ValueError, match="side"):
            full_model.middle_content(x, "c")


class TestParameterSharing:
    def test_shared_reverse_path_adds_no_parameters(self, full_model):
        assert full_model.blocks_r is full_model.blocks_f
        assert parameter_count(full_model.generator_parameters()) == 14928

    def test_sharing_off_doubles_count_exactly(self):
        shared = build_model(ModelConfig(share_parameters=True))
        unshared = build_model(ModelConfig(share_parameters=False))
        n_shared = parameter_count(shared.generator_parameters())
        assert parameter_count(unshared.generator_parameters()) == 2 * n_shared

    def test_shared_buffers_are_identical_objects(self, full_model):
        for bid in BLOCK_IDS:
            assert full_model.blocks_f[bid].kernel is full_model.blocks_r[bid].kernel

    def test_unshared_buffers_start_equal_but_distinct(self):
        m = build_model(ModelConfig(share_parameters=False))
        for bid in BLOCK_IDS:
            f, r = m.blocks_f[bid], m.blocks_r[bid]
            assert f.kernel is not r.kernel
            np.testing.assert_array_equal(f.kernel.data, r.kernel.data)

    def test_reverse_uses_same_weights_when_shared(self, rng):
        """Perturbing a forward buffer must change the reverse output."""
        m = build_model(small_model_config(0))
        x = Tensor(rng.normal(size=(1, 1, 16)))
        before = m.generator_reverse(x).data.copy()
        m.blocks_f["B3"].kernel.data += 0.5
        after = m.generator_reverse(x).data
        assert not np.allclose(before, after)


class TestConfig:
    def test_deterministic_init(self):
        m1 = build_model(ModelConfig(init_seed=3))
        m2 = build_model(ModelConfig(init_seed=3))
        for (n1, p1), (n2, p2) in zip(m1.named_parameters(), m2.named_parameters()):
            assert n1 == n2
            np.testing.assert_array_equal(p1.data, p2.data)

    def test_rejects_odd_window(self):
        with pytest.raises(ConfigError):
            build_model(ModelConfig(window_len=251))

    def test_rejects_bad_dtype(self):
        with pytest.raises(ConfigError):
            build_model(ModelConfig(dtype="float16"))

    def test_float32_parameters(self):
        m = build_model(ModelConfig(dtype="float32"))
        assert all(p.data.dtype == np.float32 for p in m.parameters())
