"""
3D VAE: 4x spatial compression to a 4-channel latent.

Encoder and decoder mirror each other with identical per-level widths and
levels - 1 stride-2 downsamples / 2x upsamples.
"""

from typing import Any, NamedTuple

import numpy as np

from ..core import Rng, Volume, check_divisible, check_volume
from ..errors import ShapeError
from ..models.config import VaeConfig
from ..nn.blocks import ResBlock
from ..nn.layers import Conv3d, Downsample, GroupNorm, SiLU, Upsample
from ..nn.params import ParamSet

LOGVAR_MIN = -30.0
LOGVAR_MAX = 20.0


class Posterior(NamedTuple):
    mu: Volume
    logvar: Volume


def reparameterize(mu: Volume, logvar: Volume, rng: Rng) -> tuple[Volume, Volume]:
    """
    z = mu + exp(0.5 * logvar) * eps with eps ~ N(0, I) drawn from rng.

    Returns:
        tuple: (z, eps)
    """
    if mu.shape != logvar.shape:
        raise ShapeError(f"mu shape {mu.shape} differs from logvar shape {logvar.shape}")
    eps = rng.normal(mu.shape)
    return mu + np.exp(0.5 * logvar) * eps, eps


class Encoder:
    def __init__(self, params: ParamSet, config: VaeConfig, rng: Rng):
        widths = config.widths
        self.levels = config.levels
        self.latent_channels = config.latent_channels
        self.conv_in = Conv3d(params, "encoder.conv_in", 1, widths[0], rng)
        self.blocks: list[list[ResBlock]] = []
        self.downs: list[Downsample] = []
        channels = widths[0]
        for level, width in enumerate(widths):
            level_blocks = []
            for b in range(config.blocks_per_level):
                level_blocks.append(
                    ResBlock(params, f"encoder.level{level}.block{b}", channels, width, rng, groups=config.groups)
                )
                channels = width
            self.blocks.append(level_blocks)
            if level < self.levels - 1:
                self.downs.append(Downsample(params, f"encoder.level{level}.down", width, width, rng))
        self.norm_out = GroupNorm(params, "encoder.norm_out", channels, config.groups)
        self.act = SiLU()
        self.conv_out = Conv3d(params, "encoder.conv_out", channels, 2 * config.latent_channels, rng)

    def forward(self, x: Volume) -> tuple[Posterior, Any]:
        caches = []
        h, c = self.conv_in.forward(x)
        caches.append(c)
        for level, level_blocks in enumerate(self.blocks):
            for block in level_blocks:
                h, c = block.forward(h)
                caches.append(c)
            if level < self.levels - 1:
                h, c = self.downs[level].forward(h)
                caches.append(c)
        h, c_n = self.norm_out.forward(h)
        h, c_a = self.act.forward(h)
        out, c_o = self.conv_out.forward(h)
        mu = out[: self.latent_channels]
        raw_logvar = out[self.latent_channels:]
        logvar = np.clip(raw_logvar, LOGVAR_MIN, LOGVAR_MAX)
        in_range = (raw_logvar >= LOGVAR_MIN) & (raw_logvar <= LOGVAR_MAX)
        return Posterior(mu, logvar), (caches, c_n, c_a, c_o, in_range)

    def backward(self, cache: Any, grad_mu: Volume, grad_logvar: Volume) -> Volume:
        caches, c_n, c_a, c_o, in_range = cache
        g = np.concatenate([grad_mu, np.where(in_range, grad_logvar, 0.0)])
        g = self.conv_out.backward(c_o, g)
        g = self.act.backward(c_a, g)
        g = self.norm_out.backward(c_n, g)
        caches = list(caches)
        for level in reversed(range(self.levels)):
            if level < self.levels - 1:
                g = self.downs[level].backward(caches.pop(), g)
            for block in reversed(self.blocks[level]):
                g, _ = block.backward(caches.pop(), g)
        return self.conv_in.backward(caches.pop(), g)


class Decoder:
    def __init__(self, params: ParamSet, config: VaeConfig, rng: Rng):
        widths = config.widths
        self.levels = config.levels
        channels = widths[-1]
        self.conv_in = Conv3d(params, "decoder.conv_in", config.latent_channels, channels, rng)
        self.blocks: dict[int, list[ResBlock]] = {}
        self.ups: dict[int, Upsample] = {}
        for level in reversed(range(self.levels)):
            width = widths[level]
            level_blocks = []
            for b in range(config.blocks_per_level):
                level_blocks.append(
                    ResBlock(params, f"decoder.level{level}.block{b}", channels, width, rng, groups=config.groups)
                )
                channels = width
            self.blocks[level] = level_blocks
            if level > 0:
                self.ups[level] = Upsample(params, f"decoder.level{level}.up", width, width, rng)
        self.norm_out = GroupNorm(params, "decoder.norm_out", channels, config.groups)
        self.act = SiLU()
        self.conv_out = Conv3d(params, "decoder.conv_out", channels, 1, rng)

    def forward(self, z: Volume) -> tuple[Volume, Any]:
        caches = []
        h, c = self.conv_in.forward(z)
        caches.append(c)
        for level in reversed(range(self.levels)):
            for block in self.blocks[level]:
                h, c = block.forward(h)
                caches.append(c)
            if level > 0:
                h, c = self.ups[level].forward(h)
                caches.append(c)
        h, c_n = self.norm_out.forward(h)
        h, c_a = self.act.forward(h)
        h, c_o = self.conv_out.forward(h)
        x_hat = np.tanh(h)
        return x_hat, (caches, c_n, c_a, c_o, x_hat)

    def backward(self, cache: Any, grad_x_hat: Volume) -> Volume:
        caches, c_n, c_a, c_o, x_hat = cache
        g = grad_x_hat * (1.0 - x_hat * x_hat)
        g = self.conv_out.backward(c_o, g)
        g = self.act.backward(c_a, g)
        g = self.norm_out.backward(c_n, g)
        caches = list(caches)
        for level in range(self.levels):
            if level > 0:
                g = self.ups[level].backward(caches.pop(), g)
            for block in reversed(self.blocks[level]):
                g, _ = block.backward(caches.pop(), g)
        return self.conv_in.backward(caches.pop(), g)


class VAE:
    """
    Variational autoencoder over (1, D, H, W) volumes in [-1, 1].

    Attributes:
        config: Architecture and loss weights
        params: Encoder and decoder parameters

    Example:
        vae = VAE(VaeConfig(), Rng(0).spawn("init"))
        mu, logvar = vae.encode(volume)
        x_hat = vae.decode(mu)
    """

    def __init__(self, config: VaeConfig, rng: Rng):
        self.config = config
        self.params = ParamSet()
        self.encoder = Encoder(self.params, config, rng.spawn("encoder"))
        self.decoder = Decoder(self.params, config, rng.spawn("decoder"))

    def check_input(self, x: Volume) -> None:
        check_volume(x, "VAE input")
        if x.shape[0] != 1:
            raise ShapeError(f"VAE input must have one channel, got {x.shape[0]}")
        check_divisible(x.shape, self.config.compression, "VAE input")

    def check_latent(self, z: Volume) -> None:
        check_volume(z, "latent")
        if z.shape[0] != self.config.latent_channels:
            raise ShapeError(f"latent must have {self.config.latent_channels} channels, got {z.shape[0]}")

    def encode_forward(self, x: Volume) -> tuple[Posterior, Any]:
        self.check_input(x)
        return self.encoder.forward(x)

    def decode_forward(self, z: Volume) -> tuple[Volume, Any]:
        self.check_latent(z)
        return self.decoder.forward(z)

    def encode(self, x: Volume) -> Posterior:
        return self.encode_forward(x)[0]

    def decode(self, z: Volume) -> Volume:
        return self.decode_forward(z)[0]

    def reconstruct(self, x: Volume) -> Volume:
        """decode(encode(x).mu): the deterministic reconstruction."""
        return self.decode(self.encode(x).mu)

    def latent_shape(self, spatial: tuple[int, int, int]) -> tuple[int, int, int, int]:
        check_divisible((1, *spatial), self.config.compression, "volume")
        return (self.config.latent_channels, *(d // self.config.compression for d in spatial))
