import dataclasses

import numpy as np
import pytest

from ssrgan.errors import ConfigError, FormatError, NumericsError
from ssrgan.gradcheck import small_model_config
from ssrgan.model import ModelConfig, build_model
from ssrgan.pipeline import Recording
from ssrgan.trainer import (ABLATION_PRESETS, TrainConfig, ablation_presets,
                            denoise_recording, load_checkpoint,
                            save_checkpoint, train)


def _tiny_setup(seed=0, n=12):
    rng = np.random.default_rng(seed)
    model = build_model(small_model_config(seed))
    a = rng.normal(size=(n, 1, 16))
    b = 0.1 * rng.normal(size=(n, 1, 16))
    return model, a, b


def _tiny_cfg(**kw):
    kw.setdefault("iterations", 4)
    kw.setdefault("batch_size", 3)
    kw.setdefault("final_g_only_iters", 2)
    kw.setdefault("seed", 0)
    return TrainConfig(**kw)


class TestSchedule:
    def test_two_generator_updates_per_iteration(self):
        model, a, b = _tiny_setup()
        _, hist = train(model, a, b, _tiny_cfg())
        assert all(r.g_updates == 2 for r in hist.records)
        assert hist.g_update_count == 8

    def test_discriminator_skipped_in_final_iterations(self):
        model, a, b = _tiny_setup()
        cfg = _tiny_cfg(iterations=8, final_g_only_iters=5)
        _, hist = train(model, a, b, cfg)
        assert [r.d_updates for r in hist.records] == [1, 1, 1, 0, 0, 0, 0, 0]
        assert all(r.gan_d == 0.0 for r in hist.records[3:])

    def test_zero_iterations_is_noop(self):
        model, a, b = _tiny_setup()
        before = [p.data.copy() for p in model.parameters()]
        _, hist = train(model, a, b, _tiny_cfg(iterations=0, final_g_only_iters=0))
        assert hist.records == []
        for p, orig in zip(model.parameters(), before):
            np.testing.assert_array_equal(p.data, orig)

    def test_training_changes_parameters_deterministically(self):
        m1, a, b = _tiny_setup()
        m2, _, _ = _tiny_setup()
        init = [p.data.copy() for p in m1.generator_parameters()]
        train(m1, a, b, _tiny_cfg())
        train(m2, a, b, _tiny_cfg())
        assert any(not np.array_equal(p.data, q)
                   for p, q in zip(m1.generator_parameters(), init))
        for p, q in zip(m1.parameters(), m2.parameters()):
            np.testing.assert_array_equal(p.data, q.data)

    def test_history_csv_header(self, tmp_path):
        model, a, b = _tiny_setup()
        _, hist = train(model, a, b, _tiny_cfg())
        path = tmp_path / "history.csv"
        hist.to_csv(str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "iter,cycle,gan_g,gan_d,ae,mid_mse,mid_mmd,total"
        assert len(lines) == 5


class TestConfigValidation:
    def test_iterations_below_final_g_only_rejected(self):
        with pytest.raises(ConfigError, match="final_g_only_iters"):
            _tiny_cfg(iterations=2, final_g_only_iters=5).validate()

    def test_single_sample_batch_rejected(self):
        with pytest.raises(ConfigError, match="batch_size"):
            _tiny_cfg(batch_size=1).validate()

    def test_empty_dataset_rejected(self):
        model, a, b = _tiny_setup()
        with pytest.raises(ConfigError, match="nonempty"):
            train(model, a[:0], b, _tiny_cfg())

    def test_nan_input_raises_with_iteration(self):
        model, a, b = _tiny_setup()
        model.blocks_f["B1"].kernel.data[:] = np.nan
        with pytest.raises(NumericsError, match="iteration 1"):
            train(model, a, b, _tiny_cfg())


class TestAblationPresets:
    def test_all_six_presets_exist(self):
        assert set(ABLATION_PRESETS) == {f"model{i}" for i in range(1, 7)}

    def test_model2_disables_everything(self):
        cfg = ablation_presets("model2")
        assert not cfg.sn2_enabled and not cfg.sn3_enabled
        assert not cfg.sharing_enabled

    def test_model6_doubles_forward_weight(self):
        assert ablation_presets("model6").forward_weight_mult == 2.0
        assert ablation_presets("model1").forward_weight_mult == 1.0

    def test_unknown_preset_rejected(self):
        with pytest.raises(ConfigError, match="unknown preset"):
            ablation_presets("model9")

    def test_preset_overrides_base(self):
        base = TrainConfig(iterations=7, sn2_enabled=True)
        cfg = ablation_presets("model3", base)
        assert cfg.iterations == 7 and not cfg.sn2_enabled

    def test_disabled_terms_log_zero(self):
        model, a, b = _tiny_setup()
        _, hist = train(model, a, b, _tiny_cfg(sn2_enabled=False,
                                               sn3_enabled=False))
        assert all(r.ae == 0.0 and r.mid_mse == 0.0 and r.mid_mmd == 0.0
                   for r in hist.records)

    def test_disabling_idle_terms_matches_zero_weights(self):
        """sn2/sn3 off must produce the same updates as zero loss weights."""
        from ssrgan.losses import LossWeights
        m1, a, b = _tiny_setup()
        m2, _, _ = _tiny_setup()
        train(m1, a, b, _tiny_cfg(sn2_enabled=False, sn3_enabled=False))
        zero_w = LossWeights(lambda_ae=0.0, lambda_mid_mse=0.0,
                             lambda_mid_mmd=0.0)
        train(m2, a, b, _tiny_cfg(weights=zero_w))
        for p, q in zip(m1.generator_parameters(), m2.generator_parameters()):
            np.testing.assert_allclose(p.data, q.data, atol=1e-12)


class TestCheckpoint:
    def test_round_trip_bitwise_for_float32(self, tmp_path):
        cfg = dataclasses.replace(small_model_config(1), dtype="float32")
        model = build_model(cfg)
        model.norm_scale = 2.5
        path = str(tmp_path / "m.ssrg")
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        assert back.norm_scale == 2.5
        assert back.config == model.config
        for (n1, p1), (n2, p2) in zip(model.named_parameters(),
                                      back.named_parameters()):
            assert n1 == n2
            assert p1.data.tobytes() == p2.data.tobytes()

    def test_round_trip_preserves_sharing(self, tmp_path):
        model = build_model(small_model_config(0))
        path = str(tmp_path / "m.ssrg")
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        assert back.blocks_r is back.blocks_f

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.ssrg"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(FormatError, match="magic"):
            load_checkpoint(str(path))

    def test_bad_version_rejected(self, tmp_path):
        path = tmp_path / "bad.ssrg"
        path.write_bytes(b"SSRG\x07" + b"\x00" * 32)
        with pytest.raises(FormatError, match="version"):
            load_checkpoint(str(path))

    def test_truncated_weights_rejected(self, tmp_path):
        model = build_model(small_model_config(0))
        path = str(tmp_path / "m.ssrg")
        save_checkpoint(model, path)
        blob = open(path, "rb").read()
        with open(path, "wb") as fh:
            fh.write(blob[:-40])
        with pytest.raises(FormatError, match="truncated"):
            load_checkpoint(path)


class TestDenoise:
    def test_denoise_preserves_geometry(self, rng):
        model = build_model(small_model_config(0))
        model.norm_scale = 1.0
        rec = Recording(rng.normal(size=(2, 100)), 16.0)
        out = denoise_recording(model, rec)
        assert out.channels == 2
        assert out.n_samples == 96           # 6 whole 16-sample windows
        assert out.sample_rate_hz == 16.0
