"""Objective terms: cycle, least-squares adversarial, autoencoder, content MSE
and multi-kernel MMD, plus the weighted total."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError
from .tensor import Tensor, _as_tensor


@dataclass
class LossWeights:
    lambda_cyc: float = 10.0
    lambda_gan: float = 5.0
    lambda_ae: float = 1.0
    lambda_mid_mse: float = 1.0
    lambda_mid_mmd: float = 0.5
    # identity regularization: each generator applied to a window already in
    # its target domain must return it unchanged. Without this anchor the
    # cycle objective is satisfiable by content-scrambling solutions and the
    # denoised output stops tracking the underlying signal.
    lambda_idt: float = 5.0

    def validate(self):
        for name, v in vars(self).items():
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass
class MmdConfig:
    bandwidth_multipliers: tuple = (0.25, 0.5, 1.0, 2.0, 4.0)
    # when set, skips the median heuristic; used for exact oracles and
    # gradient checks where the bandwidth must not depend on the inputs
    fixed_bandwidth: float | None = None

    def validate(self):
        if len(self.bandwidth_multipliers) == 0:
            raise ValueError("at least one kernel bandwidth is required")
        if any(m <= 0 for m in self.bandwidth_multipliers):
            raise ValueError("bandwidth multipliers must be positive")
        if self.fixed_bandwidth is not None and self.fixed_bandwidth <= 0:
            raise ValueError("fixed_bandwidth must be positive")


def _check_same_shape(x: Tensor, y: Tensor, what: str):
    if x.data.shape != y.data.shape:
        raise ValueError(f"{what}: shapes {x.data.shape} and {y.data.shape} differ")


def mae(x: Tensor, y: Tensor) -> Tensor:
    _check_same_shape(x, y, "mae")
    return (x - y).abs().mean()


def mse(x: Tensor, y: Tensor) -> Tensor:
    _check_same_shape(x, y, "mse")
    return ((x - y) ** 2).mean()


def cycle_loss(a: Tensor, a_cycled: Tensor, b: Tensor, b_cycled: Tensor) -> Tensor:
    """Mean absolute reconstruction error of both cycles, summed."""
    _check_same_shape(a, a_cycled, "cycle_loss side A")
    _check_same_shape(b, b_cycled, "cycle_loss side B")
    return mae(a_cycled, a) + mae(b_cycled, b)


def lsgan_loss(scores_real: Tensor | None, scores_fake: Tensor, role: str) -> Tensor:
    """Least-squares adversarial loss with targets 1 (real) and 0 (fake)."""
    scores_fake = _as_tensor(scores_fake)
    if role == "discriminator":
        if scores_real is None:
            raise ValueError("discriminator role requires real scores")
        scores_real = _as_tensor(scores_real)
        return ((scores_real - 1.0) ** 2).mean() + (scores_fake ** 2).mean()
    if role == "generator":
        return ((scores_fake - 1.0) ** 2).mean()
    raise ValueError(f"role must be 'discriminator' or 'generator', got {role!r}")


def ae_loss(recon_a: Tensor, a: Tensor, recon_b: Tensor, b: Tensor) -> Tensor:
    """Summed MSE of both single-block autoencoder reconstructions."""
    return mse(recon_a, a) + mse(recon_b, b)


def _flatten_samples(x: Tensor) -> Tensor:
    n = x.data.shape[0]
    if n == 0:
        raise ValueError("mk_mmd requires a nonempty sample set")
    return x.reshape(n, -1) if x.data.ndim != 2 else x


def median_bandwidth(x: np.ndarray, y: np.ndarray) -> float:
    """Median pairwise distance over the pooled samples (off-graph)."""
    z = np.concatenate([x.reshape(x.shape[0], -1), y.reshape(y.shape[0], -1)])
    d2 = np.sum((z[:, None, :] - z[None, :, :]) ** 2, axis=2)
    iu = np.triu_indices(z.shape[0], k=1)
    if iu[0].size == 0:
        return 1.0
    med = float(np.median(np.sqrt(d2[iu])))
    return med if med > 0 else 1.0


def mk_mmd(x: Tensor, y: Tensor, cfg: MmdConfig | None = None) -> Tensor:
    """Biased multi-kernel MMD^2 estimate between two sample sets.

    Gaussian kernels exp(-||u - v||^2 / (2 sigma^2)) with bandwidths
    ``multiplier * median pairwise distance`` (or a fixed bandwidth). The
    biased V-statistic includes the diagonal, so the result is >= 0 and
    exactly 0 for identical sample lists. Bandwidths are treated as
    constants by autodiff.
    """
    cfg = cfg or MmdConfig()
    cfg.validate()
    xf = _flatten_samples(_as_tensor(x))
    yf = _flatten_samples(_as_tensor(y))
    if xf.data.shape[1] != yf.data.shape[1]:
        raise ValueError(f"mk_mmd feature dims differ: {xf.data.shape[1]} vs "
                         f"{yf.data.shape[1]}")
    if cfg.fixed_bandwidth is not None:
        base = cfg.fixed_bandwidth
    else:
        base = median_bandwidth(xf.data, yf.data)

    def pair_sq(u: Tensor, v: Tensor) -> Tensor:
        diff = u.reshape(u.data.shape[0], 1, -1) - v.reshape(1, v.data.shape[0], -1)
        return (diff ** 2).sum(axis=2)

    dxx, dyy, dxy = pair_sq(xf, xf), pair_sq(yf, yf), pair_sq(xf, yf)
    total = None
    for mult in cfg.bandwidth_multipliers:
        gamma = 1.0 / (2.0 * (mult * base) ** 2)
        term = (dxx * -gamma).exp().mean() + (dyy * -gamma).exp().mean() \
            - 2.0 * (dxy * -gamma).exp().mean()
        total = term if total is None else total + term
    return total


def middle_content_loss(phi1_a: Tensor, phi2_gfa: Tensor, phi2_b: Tensor,
                        cfg: MmdConfig | None = None) -> Tensor:
    """One side of the content-space objective: pointwise MSE between the
    features of a window and its translation, plus MMD between the feature
    distributions of the two domains."""
    _check_same_shape(phi1_a, phi2_gfa, "middle_content_loss mse")
    return mse(phi1_a, phi2_gfa) + mk_mmd(phi1_a, phi2_b, cfg)


@dataclass
class LossParts:
    """Unweighted objective terms; each is a scalar Tensor or float."""
    cycle: object = 0.0
    gan: object = 0.0
    ae: object = 0.0
    mid_mse: object = 0.0
    mid_mmd: object = 0.0
    idt: object = 0.0


def total_loss(parts: LossParts, weights: LossWeights):
    """Weighted sum of the objective terms. Raises on non-finite parts."""
    weights.validate()
    pairs = [
        ("cycle", parts.cycle, weights.lambda_cyc),
        ("gan", parts.gan, weights.lambda_gan),
        ("ae", parts.ae, weights.lambda_ae),
        ("mid_mse", parts.mid_mse, weights.lambda_mid_mse),
        ("mid_mmd", parts.mid_mmd, weights.lambda_mid_mmd),
        ("idt", parts.idt, weights.lambda_idt),
    ]
    total = None
    for name, part, w in pairs:
        value = part.item() if isinstance(part, Tensor) else float(part)
        if not np.isfinite(value):
            raise NumericsError(f"loss part {name!r} is non-finite: {value}")
        term = part * w
        total = term if total is None else total + term
    return total
