"""Recording I/O, band-pass filtering, decimation, windowing and re-stitching.

Recordings are plain (channels, samples) arrays with a sample rate. Windowing
produces the (n, 1, window_len) tensors the model consumes: each window is
stored zero-mean with its mean recorded, and one global robust scale is
applied so that amplitude relations between windows survive normalization
(per-window variance normalization would destroy the peak-ratio metric).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np
from scipy import signal

from .errors import FormatError


@dataclass
class Recording:
    samples: np.ndarray       # (channels, n)
    sample_rate_hz: float

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("recording contains non-finite samples")

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass
class WindowedDataset:
    windows: np.ndarray            # (n, 1, window_len), normalized
    means: np.ndarray              # (n,) per-window means removed before scaling
    scale: float                   # global robust scale (division on normalize)
    channels: int
    windows_per_channel: int
    window_len: int
    sample_rate_hz: float

    def with_windows(self, new_windows: np.ndarray) -> "WindowedDataset":
        """Same provenance, replaced (e.g. denoised) window contents."""
        new_windows = np.asarray(new_windows, dtype=np.float64)
        if new_windows.shape != self.windows.shape:
            raise ValueError(f"replacement windows shape {new_windows.shape} does not "
                             f"match {self.windows.shape}")
        return replace(self, windows=new_windows)


def _zero_phase_fir(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Forward-backward FIR as one pass with the filter's autocorrelation.

    The combined kernel is symmetric, so applying it centered ('same' mode
    after reflect padding) is exactly zero-phase with magnitude |H|^2.
    """
    kernel = np.convolve(taps, taps[::-1])
    pad = min(x.shape[-1] - 1, len(taps))
    xp = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(pad, pad)], mode="reflect")
    y = signal.oaconvolve(xp, kernel[None, :] if x.ndim == 2 else kernel,
                          mode="same", axes=-1)
    return y[..., pad:x.shape[-1] + pad]


def _default_bandpass_taps(fs: float) -> int:
    # long enough that the 0.1 Hz edge still rejects DC by >= 20 dB (two-pass)
    n = int(round(8.0 * fs))
    n = max(101, min(n, 8001))
    return n + 1 if n % 2 == 0 else n


def bandpass(rec: Recording, lo_hz: float, hi_hz: float,
             numtaps: int | None = None) -> Recording:
    """Zero-phase windowed-sinc FIR band-pass (Hamming window)."""
    nyq = rec.sample_rate_hz / 2.0
    if not 0 <= lo_hz < hi_hz < nyq:
        raise ValueError(f"band [{lo_hz}, {hi_hz}] Hz invalid for Nyquist {nyq} Hz")
    if numtaps is None:
        numtaps = _default_bandpass_taps(rec.sample_rate_hz)
    if lo_hz > 0:
        taps = signal.firwin(numtaps, [lo_hz, hi_hz], pass_zero=False,
                             window="hamming", fs=rec.sample_rate_hz)
    else:
        taps = signal.firwin(numtaps, hi_hz, window="hamming", fs=rec.sample_rate_hz)
    return Recording(_zero_phase_fir(rec.samples, taps), rec.sample_rate_hz)


def resample(rec: Recording, target_hz: float) -> Recording:
    """Integer-factor decimation with an anti-alias low-pass first."""
    ratio = rec.sample_rate_hz / target_hz
    factor = int(round(ratio))
    if abs(ratio - factor) > 1e-9 or factor < 1:
        raise ValueError(f"non-integer resample ratio {rec.sample_rate_hz} -> {target_hz}")
    if factor == 1:
        return Recording(rec.samples.copy(), float(target_hz))
    cutoff = 0.8 * (target_hz / 2.0)
    numtaps = int(round(3.3 * rec.sample_rate_hz / (0.2 * target_hz / 2.0)))
    numtaps = numtaps + 1 if numtaps % 2 == 0 else numtaps
    taps = signal.firwin(numtaps, cutoff, window="hamming", fs=rec.sample_rate_hz)
    filtered = _zero_phase_fir(rec.samples, taps)
    return Recording(filtered[:, ::factor], float(target_hz))


def segment(rec: Recording, window_seconds: float = 1.0,
            scale: float | None = None) -> WindowedDataset:
    """Cut each channel into non-overlapping windows; remainder is dropped.

    Windows are mean-removed; when ``scale`` is not given it is estimated as
    1.4826 x the median absolute deviation over all window samples.
    """
    window_len = int(round(window_seconds * rec.sample_rate_hz))
    per_channel = rec.n_samples // window_len
    if per_channel < 1:
        raise ValueError(f"recording of {rec.n_samples} samples shorter than one "
                         f"{window_len}-sample window")
    usable = per_channel * window_len
    wins = rec.samples[:, :usable].reshape(rec.channels * per_channel, 1, window_len)
    means = wins.mean(axis=2).reshape(-1)
    centered = wins - means[:, None, None]
    if scale is None:
        scale = 1.4826 * float(np.median(np.abs(centered)))
        if scale <= 0:
            scale = 1.0
    return WindowedDataset(windows=centered / scale, means=means, scale=float(scale),
                           channels=rec.channels, windows_per_channel=per_channel,
                           window_len=window_len, sample_rate_hz=rec.sample_rate_hz)


def stitch(ds: WindowedDataset) -> Recording:
    """Denormalize and concatenate windows back into channel order."""
    n = ds.channels * ds.windows_per_channel
    if ds.windows.shape != (n, 1, ds.window_len) or ds.means.shape != (n,):
        raise ValueError("windowed dataset provenance inconsistent with contents")
    denorm = ds.windows * ds.scale + ds.means[:, None, None]
    samples = denorm.reshape(ds.channels, ds.windows_per_channel * ds.window_len)
    return Recording(samples, ds.sample_rate_hz)


# ---- file formats ----------------------------------------------------------


def write_recording(rec: Recording, path: str):
    """CSV (one column per channel, sample-rate header) or raw float32 + sidecar."""
    if path.endswith(".csv"):
        with open(path, "w") as fh:
            fh.write(f"# sample_rate_hz={rec.sample_rate_hz!r}\n")
            np.savetxt(fh, rec.samples.T, delimiter=",", fmt="%.10g")
    else:
        rec.samples.astype("<f4").tofile(path)
        sidecar = {"channels": rec.channels,
                   "sample_rate_hz": rec.sample_rate_hz,
                   "samples_per_channel": rec.n_samples}
        with open(path + ".json", "w") as fh:
            json.dump(sidecar, fh)


def read_recording(path: str) -> Recording:
    if path.endswith(".csv"):
        return _read_csv(path)
    return _read_raw(path)


def _read_csv(path: str) -> Recording:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# sample_rate_hz="):
            raise FormatError(f"{path}: missing '# sample_rate_hz=' header line")
        try:
            rate = float(header.split("=", 1)[1])
        except ValueError as exc:
            raise FormatError(f"{path}: unparseable sample rate {header!r}") from exc
        rows = []
        n_cols = None
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if n_cols is None:
                n_cols = len(parts)
            elif len(parts) != n_cols:
                raise FormatError(f"{path}: row {lineno} has {len(parts)} columns, "
                                  f"expected {n_cols}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise FormatError(f"{path}: row {lineno} is not numeric") from exc
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return Recording(np.asarray(rows).T, rate)


def _read_raw(path: str) -> Recording:
    sidecar_path = path + ".json"
    if not os.path.exists(sidecar_path):
        raise FormatError(f"missing sidecar {sidecar_path}")
    with open(sidecar_path) as fh:
        try:
            meta = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{sidecar_path}: invalid JSON") from exc
    for field in ("channels", "sample_rate_hz", "samples_per_channel"):
        if field not in meta:
            raise FormatError(f"{sidecar_path}: missing field {field!r}")
    data = np.fromfile(path, dtype="<f4")
    expected = meta["channels"] * meta["samples_per_channel"]
    if data.size != expected:
        raise FormatError(f"{path}: {data.size} samples on disk, sidecar "
                          f"samples_per_channel implies {expected}")
    samples = data.astype(np.float64).reshape(meta["channels"], meta["samples_per_channel"])
    return Recording(samples, float(meta["sample_rate_hz"]))
