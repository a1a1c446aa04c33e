"""Adversarial training loop, ablation presets, checkpointing, denoising.

One iteration is a scheduled unit: ``g_steps_per_d_step`` generator updates
followed by one update of both discriminators. The last
``final_g_only_iters`` iterations skip the discriminator step so the
generator can settle.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .errors import ConfigError, FormatError, NumericsError
from .losses import (LossParts, LossWeights, MmdConfig, lsgan_loss, mae, mk_mmd,
                     mse, total_loss)
from .model import ModelConfig, SSRGANModel, build_model
from .optim import AdamState, adam_step, clip_global_norm, zero_grads
from .pipeline import Recording, segment, stitch
from .tensor import Tensor


@dataclass
class TrainConfig:
    iterations: int = 2000
    batch_size: int = 16
    g_steps_per_d_step: int = 2
    final_g_only_iters: int = 5
    seed: int = 0
    lr: float = 1e-3
    beta1: float = 0.5
    beta2: float = 0.999
    grad_clip_norm: float = 10.0
    sn2_enabled: bool = True
    sn3_enabled: bool = True
    sharing_enabled: bool = True
    # multiplier on the denoising-direction cycle and adversarial terms
    forward_weight_mult: float = 1.0
    weights: LossWeights = field(default_factory=LossWeights)
    mmd: MmdConfig = field(default_factory=MmdConfig)

    def validate(self):
        if self.iterations < 0 or self.iterations < self.final_g_only_iters:
            raise ConfigError(f"iterations ({self.iterations}) must be >= "
                              f"final_g_only_iters ({self.final_g_only_iters})")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2 (MMD needs two samples)")
        if self.g_steps_per_d_step < 1:
            raise ConfigError("g_steps_per_d_step must be >= 1")
        self.weights.validate()
        self.mmd.validate()


ABLATION_PRESETS = {
    "model1": {},                                                   # full model
    "model2": {"sn2_enabled": False, "sn3_enabled": False,
               "sharing_enabled": False},                           # plain cycle GAN
    "model3": {"sn2_enabled": False},
    "model4": {"sn3_enabled": False},
    "model5": {"sharing_enabled": False},
    "model6": {"forward_weight_mult": 2.0},                         # fine-tuned weights
}


def ablation_presets(name: str, base: TrainConfig | None = None) -> TrainConfig:
    if name not in ABLATION_PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of "
                          f"{sorted(ABLATION_PRESETS)}")
    base = base or TrainConfig()
    return replace(base, **ABLATION_PRESETS[name])


@dataclass
class HistoryRecord:
    iteration: int
    cycle: float
    gan_g: float
    gan_d: float
    ae: float
    mid_mse: float
    mid_mmd: float
    total: float
    g_updates: int
    d_updates: int


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    @property
    def g_update_count(self) -> int:
        return sum(r.g_updates for r in self.records)

    @property
    def d_update_count(self) -> int:
        return sum(r.d_updates for r in self.records)

    def to_csv(self, path: str):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "cycle", "gan_g", "gan_d", "ae",
                             "mid_mse", "mid_mmd", "total"])
            for r in self.records:
                writer.writerow([r.iteration, r.cycle, r.gan_g, r.gan_d, r.ae,
                                 r.mid_mse, r.mid_mmd, r.total])


def _sample(rng, data: np.ndarray, batch: int) -> np.ndarray:
    n = data.shape[0]
    idx = rng.choice(n, size=batch, replace=n < batch)
    return data[idx]


def train(model: SSRGANModel, dataset_a: np.ndarray, dataset_b: np.ndarray,
          cfg: TrainConfig) -> tuple[SSRGANModel, TrainHistory]:
    """Train in place on unpaired window collections shaped (n, 1, window_len)."""
    cfg.validate()
    dataset_a = np.asarray(dataset_a)
    dataset_b = np.asarray(dataset_b)
    if dataset_a.shape[0] == 0 or dataset_b.shape[0] == 0:
        raise ConfigError("datasets must be nonempty")
    dtype = model.config.np_dtype()
    dataset_a = dataset_a.astype(dtype, copy=False)
    dataset_b = dataset_b.astype(dtype, copy=False)

    rng = np.random.default_rng(cfg.seed)
    gen_params = model.generator_parameters()
    disc_params = model.discriminator_parameters()
    gen_state = AdamState.for_params(gen_params, lr=cfg.lr, beta1=cfg.beta1,
                                     beta2=cfg.beta2)
    disc_state = AdamState.for_params(disc_params, lr=cfg.lr, beta1=cfg.beta1,
                                      beta2=cfg.beta2)
    w = cfg.weights
    fm = cfg.forward_weight_mult
    history = TrainHistory()

    for it in range(1, cfg.iterations + 1):
        a = Tensor(_sample(rng, dataset_a, cfg.batch_size))
        b = Tensor(_sample(rng, dataset_b, cfg.batch_size))
        try:
            last = {}
            fake_b = fake_a = None
            for _ in range(cfg.g_steps_per_d_step):
                zero_grads(gen_params)
                zero_grads(disc_params)
                fake_b = model.generator_forward(a)
                rec_a = model.generator_reverse(fake_b)
                fake_a = model.generator_reverse(b)
                rec_b = model.generator_forward(fake_a)

                cyc_a, cyc_b = mae(rec_a, a), mae(rec_b, b)
                cycle = cyc_a * fm + cyc_b
                gan_f = lsgan_loss(None, model.discriminate(fake_b, "b"), "generator")
                gan_r = lsgan_loss(None, model.discriminate(fake_a, "a"), "generator")
                gan_g = gan_f * fm + gan_r

                parts = LossParts(cycle=cycle, gan=gan_g)
                if w.lambda_idt > 0:
                    # content anchor: a window already in the target domain
                    # must pass through its generator unchanged
                    parts.idt = mae(model.generator_forward(b), b) \
                        + mae(model.generator_reverse(a), a)
                ae_val = mid_mse_val = mid_mmd_val = 0.0
                if cfg.sn2_enabled and w.lambda_ae > 0:
                    ae = mse(model.autoencode(a, "a"), a) \
                        + mse(model.autoencode(b, "b"), b)
                    parts.ae = ae
                    ae_val = ae.item()
                if cfg.sn3_enabled and (w.lambda_mid_mse > 0 or w.lambda_mid_mmd > 0):
                    phi1_a = model.middle_content(a, "a")
                    phi2_fb = model.middle_content(fake_b, "b")
                    phi2_b = model.middle_content(b, "b")
                    phi1_fa = model.middle_content(fake_a, "a")
                    mid_mse = mse(phi1_a, phi2_fb) + mse(phi2_b, phi1_fa)
                    mid_mmd = mk_mmd(phi1_a, phi2_b, cfg.mmd) * 2.0
                    parts.mid_mse = mid_mse
                    parts.mid_mmd = mid_mmd
                    mid_mse_val = mid_mse.item()
                    mid_mmd_val = mid_mmd.item()

                loss = total_loss(parts, w)
                loss.backward()
                clip_global_norm(gen_params, cfg.grad_clip_norm)
                adam_step(gen_params, gen_state)
                last = {"cycle": (cyc_a + cyc_b).item(), "gan_g": gan_g.item(),
                        "ae": ae_val, "mid_mse": mid_mse_val,
                        "mid_mmd": mid_mmd_val, "total": loss.item()}

            gan_d_val = 0.0
            d_updates = 0
            if it <= cfg.iterations - cfg.final_g_only_iters:
                zero_grads(gen_params)
                zero_grads(disc_params)
                d_loss = lsgan_loss(model.discriminate(b, "b"),
                                    model.discriminate(fake_b.detach(), "b"),
                                    "discriminator") \
                    + lsgan_loss(model.discriminate(a, "a"),
                                 model.discriminate(fake_a.detach(), "a"),
                                 "discriminator")
                gan_d_val = d_loss.item()
                if not np.isfinite(gan_d_val):
                    raise NumericsError(f"discriminator loss is non-finite: {gan_d_val}")
                d_loss.backward()
                clip_global_norm(disc_params, cfg.grad_clip_norm)
                adam_step(disc_params, disc_state)
                d_updates = 1
        except NumericsError as exc:
            raise NumericsError(f"iteration {it}: {exc}") from exc

        history.records.append(HistoryRecord(
            iteration=it, cycle=last["cycle"], gan_g=last["gan_g"],
            gan_d=gan_d_val, ae=last["ae"], mid_mse=last["mid_mse"],
            mid_mmd=last["mid_mmd"],
            total=last["total"] + w.lambda_gan * gan_d_val,
            g_updates=cfg.g_steps_per_d_step, d_updates=d_updates))
    return model, history


def denoise_recording(model: SSRGANModel, rec: Recording,
                      batch_size: int = 64) -> Recording:
    """Full-signal denoising: segment -> forward generator -> stitch.

    Windows are normalized with the scale stored at training time so the
    model sees amplitudes in its training range.
    """
    ds = segment(rec, window_seconds=model.config.window_len / rec.sample_rate_hz,
                 scale=model.norm_scale)
    dtype = model.config.np_dtype()
    out = np.empty_like(ds.windows)
    for start in range(0, ds.windows.shape[0], batch_size):
        chunk = ds.windows[start:start + batch_size].astype(dtype)
        out[start:start + batch_size] = model.generator_forward(Tensor(chunk)).data
    return stitch(ds.with_windows(out))


# ---- checkpoint format -----------------------------------------------------

CHECKPOINT_MAGIC = b"SSRG"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: SSRGANModel, path: str):
    """Magic + version + JSON header + little-endian float32 weight blobs."""
    named = model.named_parameters()
    manifest = []
    offset = 0
    for name, p in named:
        manifest.append({"name": name, "shape": list(p.data.shape), "offset": offset})
        offset += p.data.size * 4
    header = json.dumps({
        "config": asdict(model.config),
        "norm_scale": model.norm_scale,
        "manifest": manifest,
    }).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(bytes([CHECKPOINT_VERSION]))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for _, p in named:
            fh.write(p.data.astype("<f4").tobytes())


def load_checkpoint(path: str) -> SSRGANModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic bytes {blob[:4]!r}")
    if len(blob) < 9:
        raise FormatError(f"{path}: truncated before header length")
    version = blob[4]
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    header_len = struct.unpack("<I", blob[5:9])[0]
    if len(blob) < 9 + header_len:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[9:9 + header_len])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON header") from exc
    config = ModelConfig(**header["config"])
    model = build_model(config)
    model.norm_scale = float(header["norm_scale"])
    params = dict(model.named_parameters())
    data = blob[9 + header_len:]
    for entry in header["manifest"]:
        name, shape, offset = entry["name"], tuple(entry["shape"]), entry["offset"]
        if name not in params:
            raise FormatError(f"{path}: unknown tensor {name!r} in manifest")
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * 4
        if end > len(data):
            raise FormatError(f"{path}: truncated weight blob for {name!r}")
        values = np.frombuffer(data[offset:end], dtype="<f4").reshape(shape)
        params[name].data = values.astype(config.np_dtype())
    return model
