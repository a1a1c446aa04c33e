"""Seeded synthetic data: clean EEG-like signals, cardiac pulse artifacts,
and unpaired training sets with held-out paired ground truth.

The artifact is a quasi-periodic train of fixed multiphasic pulses (a sum of
three Gabor atoms, ~250 ms support) with timing and amplitude jitter. The
contaminated signal is exactly clean + artifact, so evaluation pairs carry
ground truth by construction while the A/B training sets come from disjoint
seed streams and are genuinely unpaired.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .pipeline import Recording, WindowedDataset, bandpass, segment


@dataclass
class SynthConfig:
    duration_s: float = 60.0
    heart_rate_bpm: float = 72.0
    beat_jitter_ms: float = 30.0
    amplitude_ratio: float = 15.0    # median artifact peak over clean robust peak
    amplitude_jitter_frac: float = 0.2
    alpha_power: float = 1.0
    pink_noise_exponent: float = 1.0
    sample_rate_hz: float = 250.0
    n_channels: int = 1
    seed: int = 0

    def validate(self):
        if self.duration_s < 2.0:
            raise ConfigError(f"duration_s must be >= 2, got {self.duration_s}")
        if self.amplitude_ratio <= 0:
            raise ConfigError(f"amplitude_ratio must be positive, got {self.amplitude_ratio}")
        if self.heart_rate_bpm < 60.0:
            raise ConfigError("heart_rate_bpm must be >= 60 so the beat period fits "
                              "inside one 1-s window")
        if self.beat_jitter_ms < 0 or self.amplitude_jitter_frac < 0:
            raise ConfigError("jitter settings must be nonnegative")
        if self.n_channels < 1:
            raise ConfigError("n_channels must be >= 1")


def _pink_noise(rng, n: int, exponent: float) -> np.ndarray:
    white = rng.normal(size=n)
    spec = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n)
    spec[1:] = spec[1:] / freqs[1:] ** (exponent / 2.0)
    spec[0] = 0.0
    x = np.fft.irfft(spec, n)
    return x / x.std()


def _alpha_bursts(rng, n: int, fs: float) -> np.ndarray:
    """10 Hz oscillation under a slowly varying nonnegative envelope."""
    t = np.arange(n) / fs
    slow = rng.normal(size=n)
    spec = np.fft.rfft(slow)
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    spec[freqs > 0.7] = 0.0
    env = np.fft.irfft(spec, n)
    env = np.clip(env, 0.0, None)
    if env.max() > 0:
        env = env / env.max()
    phase = rng.uniform(0, 2 * np.pi)
    return env * np.sin(2 * np.pi * 10.0 * t + phase)


def gen_clean(cfg: SynthConfig) -> Recording:
    """Band-limited pink noise plus amplitude-modulated 10 Hz activity."""
    cfg.validate()
    n = int(round(cfg.duration_s * cfg.sample_rate_hz))
    channels = []
    for ch in range(cfg.n_channels):
        rng = np.random.default_rng([cfg.seed, 0, ch])
        x = _pink_noise(rng, n, cfg.pink_noise_exponent)
        if cfg.alpha_power > 0:
            x = x + cfg.alpha_power * _alpha_bursts(rng, n, cfg.sample_rate_hz)
        channels.append(x)
    rec = Recording(np.stack(channels), cfg.sample_rate_hz)
    rec = bandpass(rec, 0.1, 70.0)
    return Recording(rec.samples / rec.samples.std(), cfg.sample_rate_hz)


def _pulse_atom(fs: float) -> np.ndarray:
    """Fixed multiphasic pulse: three Gabor components, ~250 ms support."""
    t = np.arange(-0.125, 0.125, 1.0 / fs)
    components = [
        (1.0, 8.0, 0.000, 0.030),
        (-0.6, 5.0, 0.045, 0.045),
        (0.4, 12.0, -0.045, 0.025),
    ]
    atom = np.zeros_like(t)
    for amp, freq, center, width in components:
        atom += amp * np.exp(-((t - center) ** 2) / (2 * width ** 2)) \
            * np.cos(2 * np.pi * freq * (t - center))
    return atom / np.abs(atom).max()


def robust_peak(x: np.ndarray) -> float:
    return float(np.percentile(np.abs(x), 99))


def gen_bcg(cfg: SynthConfig, reference_clean: Recording | None = None) -> Recording:
    """Artifact-only recording: jittered pulse train scaled against clean amplitude.

    The scale is set so the median pulse peak equals ``amplitude_ratio`` times
    the 99th-percentile amplitude of the reference clean signal (generated
    from the same config when not provided).
    """
    cfg.validate()
    if reference_clean is None:
        reference_clean = gen_clean(cfg)
    ref_peak = robust_peak(reference_clean.samples)
    n = int(round(cfg.duration_s * cfg.sample_rate_hz))
    period = 60.0 / cfg.heart_rate_bpm
    atom = _pulse_atom(cfg.sample_rate_hz)
    half = len(atom) // 2
    channels = []
    for ch in range(cfg.n_channels):
        rng = np.random.default_rng([cfg.seed, 1, ch])
        x = np.zeros(n)
        t0 = rng.uniform(0.25, 0.75) * period
        beat_times = np.arange(t0, cfg.duration_s, period)
        beat_times = beat_times + rng.normal(0.0, cfg.beat_jitter_ms / 1000.0,
                                             size=beat_times.size)
        amps = 1.0 + cfg.amplitude_jitter_frac * rng.uniform(-1.0, 1.0,
                                                             size=beat_times.size)
        scale = cfg.amplitude_ratio * ref_peak / float(np.median(amps))
        for bt, amp in zip(beat_times, amps):
            center = int(round(bt * cfg.sample_rate_hz))
            lo, hi = center - half, center - half + len(atom)
            a_lo, a_hi = max(0, -lo), len(atom) - max(0, hi - n)
            lo, hi = max(0, lo), min(n, hi)
            if lo < hi:
                x[lo:hi] += amp * scale * atom[a_lo:a_hi]
        channels.append(x)
    return Recording(np.stack(channels), cfg.sample_rate_hz)


@dataclass
class SynthDatasets:
    a: WindowedDataset                 # contaminated training windows
    b: WindowedDataset                 # clean training windows
    eval_contaminated: WindowedDataset
    eval_clean: WindowedDataset
    recordings: dict = field(default_factory=dict)
    scale: float = 1.0
    manifest: dict = field(default_factory=dict)


def make_datasets(cfg: SynthConfig, n_train_a: int, n_train_b: int,
                  n_eval: int) -> SynthDatasets:
    """Unpaired A/B window sets plus paired evaluation windows.

    All windows share the robust scale estimated from the contaminated
    training set, so amplitude relations between domains are preserved.
    """
    if min(n_train_a, n_train_b, n_eval) < 1:
        raise ConfigError("window counts must be >= 1")
    root = np.random.default_rng(cfg.seed)
    seeds = {role: int(root.integers(2 ** 31)) for role in ("a", "b", "eval")}

    def windows_cfg(role: str, n_windows: int) -> SynthConfig:
        duration = max(2.0, n_windows / cfg.n_channels)
        return replace(cfg, duration_s=duration, seed=seeds[role])

    cfg_a = windows_cfg("a", n_train_a)
    clean_a = gen_clean(cfg_a)
    art_a = gen_bcg(cfg_a, clean_a)
    cont_a = Recording(clean_a.samples + art_a.samples, cfg.sample_rate_hz)

    cfg_b = windows_cfg("b", n_train_b)
    clean_b = gen_clean(cfg_b)

    cfg_e = windows_cfg("eval", n_eval)
    clean_e = gen_clean(cfg_e)
    art_e = gen_bcg(cfg_e, clean_e)
    cont_e = Recording(clean_e.samples + art_e.samples, cfg.sample_rate_hz)

    ds_a = segment(cont_a)
    scale = ds_a.scale
    ds_b = segment(clean_b, scale=scale)
    ds_ec = segment(cont_e, scale=scale)
    ds_ek = segment(clean_e, scale=scale)

    manifest = {
        "roles": {"a": "contaminated", "b": "clean", "eval": "paired"},
        "seeds": seeds,
        "config": {k: v for k, v in vars(cfg).items()},
        "scale": scale,
    }
    recordings = {
        "a_contaminated": cont_a,
        "b_clean": clean_b,
        "eval_contaminated": cont_e,
        "eval_clean": clean_e,
        "eval_artifact": art_e,
    }
    return SynthDatasets(a=ds_a, b=ds_b, eval_contaminated=ds_ec, eval_clean=ds_ek,
                         recordings=recordings, scale=scale, manifest=manifest)
