"""Welch PSD, artifact-removal indices, and the sliding-template baseline.

INPS is the channel-averaged dB ratio of total PSD before vs after cleaning;
PTPR is the ratio of mean per-window peak-to-peak amplitudes. Both compare a
contaminated recording against its cleaned counterpart; larger is better.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from .errors import NumericsError
from .pipeline import Recording


def psd_welch(rec: Recording, segment_s: float = 1.0, overlap: float = 0.5):
    """Hann-windowed averaged periodograms, one-sided density scaling.

    Returns (freqs, psd) with psd shaped (channels, n_freqs).
    """
    nperseg = int(round(segment_s * rec.sample_rate_hz))
    if rec.n_samples < nperseg:
        raise ValueError(f"recording of {rec.n_samples} samples shorter than one "
                         f"{nperseg}-sample PSD segment")
    freqs, psd = sps.welch(rec.samples, fs=rec.sample_rate_hz, window="hann",
                           nperseg=nperseg, noverlap=int(round(overlap * nperseg)),
                           detrend=False, axis=-1)
    return freqs, psd


def _check_pair(before: Recording, after: Recording):
    if before.samples.shape != after.samples.shape:
        raise ValueError(f"recordings differ in shape: {before.samples.shape} vs "
                         f"{after.samples.shape}")
    if before.sample_rate_hz != after.sample_rate_hz:
        raise ValueError("recordings differ in sample rate")


def inps(before: Recording, after: Recording) -> float:
    """Channel mean of 10*log10(total PSD before / total PSD after), in dB."""
    _check_pair(before, after)
    _, p_before = psd_welch(before)
    _, p_after = psd_welch(after)
    sums_before = p_before.sum(axis=1)
    sums_after = p_after.sum(axis=1)
    if np.any(sums_after <= 0) or np.any(sums_before <= 0):
        raise NumericsError("zero total power in a channel; INPS undefined")
    return float(np.mean(10.0 * np.log10(sums_before / sums_after)))


def _mean_peak_to_peak(rec: Recording, window_s: float = 1.0) -> np.ndarray:
    wl = int(round(window_s * rec.sample_rate_hz))
    per = rec.n_samples // wl
    if per < 1:
        raise ValueError("recording shorter than one peak-measurement window")
    wins = rec.samples[:, :per * wl].reshape(rec.channels, per, wl)
    return (wins.max(axis=2) - wins.min(axis=2)).mean(axis=1)


def ptpr(before: Recording, after: Recording) -> float:
    """Ratio of summed mean per-window peak-to-peak amplitudes."""
    _check_pair(before, after)
    v_before = _mean_peak_to_peak(before)
    v_after = _mean_peak_to_peak(after)
    denom = v_after.sum()
    if denom <= 0:
        raise NumericsError("zero peak-to-peak amplitude after cleaning; PTPR undefined")
    return float(v_before.sum() / denom)


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    x = np.ravel(x) - np.mean(x)
    y = np.ravel(y) - np.mean(y)
    denom = np.sqrt(np.sum(x * x) * np.sum(y * y))
    if denom == 0:
        return 0.0
    return float(np.sum(x * y) / denom)


# ---- sliding-template artifact subtraction --------------------------------


def estimate_period(x: np.ndarray, fs: float,
                    lag_range_s: tuple = (0.4, 1.5)) -> int:
    """Dominant repetition period (samples) from the autocorrelation peak."""
    x = x - x.mean()
    n = len(x)
    spec = np.fft.rfft(x, 2 * n)
    ac = np.fft.irfft(spec * np.conj(spec))[:n]
    lo = int(round(lag_range_s[0] * fs))
    hi = min(int(round(lag_range_s[1] * fs)), n - 1)
    if hi <= lo:
        raise ValueError("recording too short for period search")
    window = ac[lo:hi + 1]
    if window.max() <= 0:
        raise ValueError(f"no autocorrelation peak in {lag_range_s} s lag range; "
                         "input does not look periodic")
    return lo + int(np.argmax(window))


def _detect_beats(x: np.ndarray, period: int) -> np.ndarray:
    """Beat positions: march from the strongest peak in period steps, with
    local refinement to absorb timing jitter."""
    n = len(x)
    mag = np.abs(x)
    anchor = int(np.argmax(mag))
    search = max(2, period // 10)

    def refine(pos: int) -> int:
        lo, hi = max(0, pos - search), min(n, pos + search + 1)
        return lo + int(np.argmax(mag[lo:hi]))

    beats = [anchor]
    pos = anchor - period
    while pos >= 0:
        pos = refine(pos)
        beats.append(pos)
        pos -= period
    beats = beats[::-1]
    pos = beats[-1] + period
    while pos < n:
        pos = refine(pos)
        beats.append(pos)
        pos += period
    return np.unique(np.asarray(beats))


def aas_baseline(rec: Recording, template_epochs: int = 21,
                 lag_range_s: tuple = (0.4, 1.5)) -> Recording:
    """Subtract a sliding average artifact template from each detected beat.

    Per channel: estimate the repetition period from the autocorrelation,
    pick beat positions by matched peak search, and for each beat subtract
    the mean of the surrounding ``template_epochs`` artifact epochs.
    """
    out = rec.samples.copy()
    for ch in range(rec.channels):
        x = rec.samples[ch]
        period = estimate_period(x, rec.sample_rate_hz, lag_range_s)
        beats = _detect_beats(x, period)
        half = period // 2
        n = len(x)
        full = [i for i, b in enumerate(beats)
                if b - half >= 0 and b - half + period <= n]
        if len(full) < 3:
            raise ValueError(f"channel {ch}: only {len(full)} usable artifact epochs")
        epochs = np.stack([x[beats[i] - half:beats[i] - half + period] for i in full])
        k = min(template_epochs, len(full))
        for i, b in enumerate(beats):
            # template from the k full epochs nearest to this beat
            center = int(np.argmin(np.abs(np.asarray(full) - i)))
            start = min(max(0, center - k // 2), len(full) - k)
            template = epochs[start:start + k].mean(axis=0)
            lo, hi = b - half, b - half + period
            t_lo, t_hi = max(0, -lo), period - max(0, hi - n)
            out[ch, max(0, lo):min(n, hi)] -= template[t_lo:t_hi]
    return Recording(out, rec.sample_rate_hz)


# ---- report ----------------------------------------------------------------


@dataclass
class MetricsReport:
    inps_db: float
    ptpr: float
    n_channels: int
    per_channel_inps_db: list = field(default_factory=list)
    per_channel_ptpr: list = field(default_factory=list)
    clean_correlation: float | None = None
    psd_freqs: np.ndarray | None = None
    psd_before: np.ndarray | None = None
    psd_after: np.ndarray | None = None

    def to_json(self) -> str:
        payload = {
            "inps_db": self.inps_db,
            "ptpr": self.ptpr,
            "n_channels": self.n_channels,
            "per_channel_inps_db": list(self.per_channel_inps_db),
            "per_channel_ptpr": list(self.per_channel_ptpr),
            "clean_correlation": self.clean_correlation,
        }
        return json.dumps(payload, indent=2)

    def write_psd_csv(self, path_template: str):
        """One plot-ready CSV per channel: freq_hz,power_before,power_after."""
        if self.psd_freqs is None:
            raise ValueError("report carries no PSD curves")
        for ch in range(self.n_channels):
            with open(path_template.format(channel=ch), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["freq_hz", "power_before", "power_after"])
                for i, f in enumerate(self.psd_freqs):
                    writer.writerow([f, self.psd_before[ch, i], self.psd_after[ch, i]])


def compute_report(before: Recording, after: Recording,
                   clean: Recording | None = None) -> MetricsReport:
    _check_pair(before, after)
    freqs, p_before = psd_welch(before)
    _, p_after = psd_welch(after)
    per_inps = 10.0 * np.log10(p_before.sum(axis=1) / p_after.sum(axis=1))
    v_before = _mean_peak_to_peak(before)
    v_after = _mean_peak_to_peak(after)
    corr = None
    if clean is not None:
        corr = pearson(after.samples, clean.samples)
    return MetricsReport(
        inps_db=inps(before, after),
        ptpr=ptpr(before, after),
        n_channels=before.channels,
        per_channel_inps_db=[float(v) for v in per_inps],
        per_channel_ptpr=[float(v) for v in v_before / v_after],
        clean_correlation=corr,
        psd_freqs=freqs,
        psd_before=p_before,
        psd_after=p_after,
    )
