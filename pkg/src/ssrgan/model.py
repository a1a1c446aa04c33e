"""Reversible 5-block generator, discriminators, autoencoders and middle features.

One stack of weight-tied blocks serves both translation directions: the
forward generator applies each block in its forward mode (convolution for
the first four, adjoint for the up-sampling block), and the reverse
generator applies the blocks in opposite order with every mode flipped.
With parameter sharing enabled the reverse path references the exact same
weight buffers, so the reverse generator adds zero trainable parameters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .tensor import ConvSpec, Tensor, conv1d, conv1d_adjoint, leaky_relu

BLOCK_IDS = ("B1", "B2", "B3", "B4", "B5")


@dataclass
class ModelConfig:
    window_len: int = 250
    in_channels: int = 1
    hidden1: int = 16          # width after the down-sampling block
    hidden2: int = 32          # width of the content-feature space
    outer_kernel: int = 15     # down/up-sampling blocks
    inner_kernel: int = 7      # feature-conversion and content blocks
    act_slope: float = 0.2
    share_parameters: bool = True
    # kernel std is init_gain * sqrt(2 / fan_in); a fixed small std starves
    # the 5-block signal path and stalls training at this model depth
    init_gain: float = 1.0
    init_seed: int = 0
    dtype: str = "float64"

    def validate(self):
        if self.window_len % 2 != 0 or self.window_len < 4:
            raise ConfigError(f"window_len must be even and >= 4, got {self.window_len}")
        if self.hidden1 <= 0 or self.hidden2 <= 0:
            raise ConfigError("channel widths must be positive")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype}")

    def np_dtype(self):
        return np.dtype(self.dtype)


class Block:
    """One reversible convolutional block with a single tied weight buffer.

    ``spec`` always describes the convolution-mode map; applying the block in
    adjoint mode runs the exact transpose of that map. Bias is added only in
    convolution mode (the adjoint is the transpose of the linear part).
    """

    def __init__(self, block_id: str, spec: ConvSpec, forward_mode: str,
                 kernel: Tensor, bias: Tensor):
        self.id = block_id
        self.spec = spec
        self.forward_mode = forward_mode  # mode used by the forward generator
        self.kernel = kernel
        self.bias = bias

    def conv(self, x: Tensor) -> Tensor:
        return conv1d(x, self.kernel, self.spec, self.bias)

    def adjoint(self, y: Tensor, original_input_length: int) -> Tensor:
        return conv1d_adjoint(y, self.kernel, self.spec, original_input_length)

    def parameters(self) -> list[Tensor]:
        return [self.kernel, self.bias]

    def copy(self) -> "Block":
        k = Tensor(self.kernel.data.copy(), requires_grad=True)
        b = Tensor(self.bias.data.copy(), requires_grad=True)
        return Block(self.id, self.spec, self.forward_mode, k, b)


class Discriminator:
    """Three-layer strided patch discriminator with mean-reduced scores."""

    def __init__(self, specs: list[ConvSpec], kernels: list[Tensor],
                 biases: list[Tensor], act_slope: float):
        self.specs = specs
        self.kernels = kernels
        self.biases = biases
        self.act_slope = act_slope

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        last = len(self.specs) - 1
        for i, spec in enumerate(self.specs):
            h = conv1d(h, self.kernels[i], spec, self.biases[i])
            if i != last:
                h = leaky_relu(h, self.act_slope)
        return h.mean(axis=(1, 2))

    def parameters(self) -> list[Tensor]:
        return list(self.kernels) + list(self.biases)


def _init_conv(rng, spec: ConvSpec, gain: float, dtype) -> tuple[Tensor, Tensor]:
    fan_in = spec.in_channels * spec.kernel_size
    std = gain * np.sqrt(2.0 / fan_in)
    k = rng.normal(0.0, std, (spec.out_channels, spec.in_channels, spec.kernel_size))
    kernel = Tensor(k.astype(dtype), requires_grad=True)
    bias = Tensor(np.zeros(spec.out_channels, dtype=dtype), requires_grad=True)
    return kernel, bias


def _block_specs(cfg: ModelConfig) -> dict[str, tuple[ConvSpec, str]]:
    c0, c1, c2 = cfg.in_channels, cfg.hidden1, cfg.hidden2
    ko, ki = cfg.outer_kernel, cfg.inner_kernel
    po, pi = ko // 2, ki // 2
    return {
        "B1": (ConvSpec(c0, c1, ko, stride=2, padding=po), "conv"),
        "B2": (ConvSpec(c1, c2, ki, stride=1, padding=pi), "conv"),
        "B3": (ConvSpec(c2, c2, ki, stride=1, padding=pi), "conv"),
        "B4": (ConvSpec(c2, c1, ki, stride=1, padding=pi), "conv"),
        # spec describes the conv-mode map (used by the reverse generator);
        # the forward generator runs this block as its adjoint to up-sample
        "B5": (ConvSpec(c0, c1, ko, stride=2, padding=po), "adjoint"),
    }


class SSRGANModel:
    def __init__(self, config: ModelConfig, blocks_f: dict, blocks_r: dict,
                 disc_a: Discriminator, disc_b: Discriminator,
                 norm_scale: float = 1.0):
        self.config = config
        self.blocks_f = blocks_f   # used by the forward generator and phi1
        self.blocks_r = blocks_r   # used by the reverse generator and phi2
        self.disc_a = disc_a
        self.disc_b = disc_b
        self.norm_scale = norm_scale

    # ---- parameter access --------------------------------------------------

    def generator_parameters(self) -> list[Tensor]:
        params, seen = [], set()
        for blocks in (self.blocks_f, self.blocks_r):
            for bid in BLOCK_IDS:
                for p in blocks[bid].parameters():
                    if id(p) not in seen:
                        seen.add(id(p))
                        params.append(p)
        return params

    def discriminator_parameters(self) -> list[Tensor]:
        return self.disc_a.parameters() + self.disc_b.parameters()

    def parameters(self) -> list[Tensor]:
        return self.generator_parameters() + self.discriminator_parameters()

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        named, seen = [], set()
        for prefix, blocks in (("f", self.blocks_f), ("r", self.blocks_r)):
            for bid in BLOCK_IDS:
                blk = blocks[bid]
                for pname, p in (("kernel", blk.kernel), ("bias", blk.bias)):
                    if id(p) not in seen:
                        seen.add(id(p))
                        named.append((f"{prefix}.{bid}.{pname}", p))
        for dname, disc in (("disc_a", self.disc_a), ("disc_b", self.disc_b)):
            for i in range(len(disc.specs)):
                named.append((f"{dname}.{i}.kernel", disc.kernels[i]))
                named.append((f"{dname}.{i}.bias", disc.biases[i]))
        return named

    # ---- generator paths ---------------------------------------------------

    def _check_signal(self, x: Tensor, what: str):
        L = self.config.window_len
        if x.data.ndim != 3 or x.data.shape[1] != self.config.in_channels \
                or x.data.shape[2] != L:
            raise ValueError(f"{what} must have shape (n, {self.config.in_channels}, {L}), "
                             f"got {x.data.shape}")

    def _act(self, x: Tensor) -> Tensor:
        return leaky_relu(x, self.config.act_slope)

    def generator_forward(self, a: Tensor) -> Tensor:
        """Contaminated -> clean; blocks B1..B5 in their forward modes."""
        self._check_signal(a, "generator_forward input")
        L = self.config.window_len
        f = self.blocks_f
        h = self._act(f["B1"].conv(a))
        h = self._act(f["B2"].conv(h))
        h = self._act(f["B3"].conv(h))
        h = self._act(f["B4"].conv(h))
        return f["B5"].adjoint(h, L)   # output layer linear

    def generator_reverse(self, b: Tensor) -> Tensor:
        """Clean -> contaminated; blocks B5..B1 with every mode flipped."""
        self._check_signal(b, "generator_reverse input")
        L = self.config.window_len
        Lh = L // 2
        r = self.blocks_r
        h = self._act(r["B5"].conv(b))
        h = self._act(r["B4"].adjoint(h, Lh))
        h = self._act(r["B3"].adjoint(h, Lh))
        h = self._act(r["B2"].adjoint(h, Lh))
        return r["B1"].adjoint(h, L)   # output layer linear

    def middle_content(self, x: Tensor, side: str) -> Tensor:
        """Feature map in the shared content space.

        Side "a" runs the first half of the forward path (B1, B2, B3); side
        "b" runs the first half of the reverse path (B5, B4, B3 with flipped
        modes). The content block preserves shape, so both land in the same
        space.
        """
        self._check_signal(x, f"middle_content({side}) input")
        Lh = self.config.window_len // 2
        if side == "a":
            f = self.blocks_f
            h = self._act(f["B1"].conv(x))
            h = self._act(f["B2"].conv(h))
            return self._act(f["B3"].conv(h))
        if side == "b":
            r = self.blocks_r
            h = self._act(r["B5"].conv(x))
            h = self._act(r["B4"].adjoint(h, Lh))
            return self._act(r["B3"].adjoint(h, Lh))
        raise ValueError(f"side must be 'a' or 'b', got {side!r}")

    def autoencode(self, x: Tensor, side: str) -> Tensor:
        """Single-block autoencoder: encode with one mode, decode with the other."""
        self._check_signal(x, f"autoencode({side}) input")
        L = self.config.window_len
        if side == "a":
            blk = self.blocks_f["B1"]
            return blk.adjoint(self._act(blk.conv(x)), L)
        if side == "b":
            blk = self.blocks_r["B5"]
            return blk.adjoint(self._act(blk.conv(x)), L)
        raise ValueError(f"side must be 'a' or 'b', got {side!r}")

    def discriminate(self, x: Tensor, side: str) -> Tensor:
        self._check_signal(x, f"discriminate({side}) input")
        if side == "a":
            return self.disc_a(x)
        if side == "b":
            return self.disc_b(x)
        raise ValueError(f"side must be 'a' or 'b', got {side!r}")


def build_model(config: ModelConfig) -> SSRGANModel:
    config.validate()
    dtype = config.np_dtype()
    rng = np.random.default_rng(config.init_seed)
    specs = _block_specs(config)

    blocks_f = {}
    for bid in BLOCK_IDS:
        spec, mode = specs[bid]
        kernel, bias = _init_conv(rng, spec, config.init_gain, dtype)
        blocks_f[bid] = Block(bid, spec, mode, kernel, bias)
    # chain consistency: channels of consecutive blocks must match
    if blocks_f["B2"].spec.in_channels != blocks_f["B1"].spec.out_channels \
            or blocks_f["B3"].spec.in_channels != blocks_f["B2"].spec.out_channels \
            or blocks_f["B4"].spec.in_channels != blocks_f["B3"].spec.out_channels \
            or blocks_f["B5"].spec.out_channels != blocks_f["B4"].spec.out_channels:
        raise ConfigError("inconsistent channel chain across blocks")

    if config.share_parameters:
        blocks_r = blocks_f
    else:
        blocks_r = {bid: blocks_f[bid].copy() for bid in BLOCK_IDS}

    def make_disc():
        c1, c2 = config.hidden1, config.hidden2
        ko, ki = config.outer_kernel, config.inner_kernel
        d_specs = [
            ConvSpec(config.in_channels, c1, ko, stride=2, padding=ko // 2),
            ConvSpec(c1, c2, ki, stride=2, padding=ki // 2),
            ConvSpec(c2, 1, ki, stride=1, padding=ki // 2),
        ]
        kernels, biases = [], []
        for spec in d_specs:
            k, b = _init_conv(rng, spec, config.init_gain, dtype)
            kernels.append(k)
            biases.append(b)
        return Discriminator(d_specs, kernels, biases, config.act_slope)

    return SSRGANModel(config, blocks_f, blocks_r, make_disc(), make_disc())


def parameter_count(params: list[Tensor]) -> int:
    return sum(p.data.size for p in params)
