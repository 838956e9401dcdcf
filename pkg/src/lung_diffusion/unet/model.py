"""
Conditional 3D U-Net predicting velocity v.

Down path: per level, ResBlocks (time-modulated) and optional cross-attention,
then a stride-2 convolution. Up path: nearest upsample + convolution, an
additive skip from the matching down level, ResBlocks and optional
cross-attention. The output convolution is zero-initialized.

Conditional models take the 1-channel mask latent concatenated to z_t and
attend to context tokens built from the same mask latent.
"""

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from ..conditioning.context import ContextEmbedder
from ..conditioning.masks import concat_condition
from ..core import Rng, Volume, check_same_shape, check_volume
from ..errors import ConfigError, ShapeError
from ..models.config import UnetConfig
from ..nn.blocks import CrossAttention, ResBlock, TimeEmbedding
from ..nn.layers import Conv3d, Downsample, GroupNorm, SiLU, Upsample
from ..nn.params import ParamSet


def additive_skip_merge(decoder_feat: Volume, encoder_feat: Volume) -> Volume:
    """Elementwise sum of decoder and encoder features; channel count unchanged."""
    check_same_shape(decoder_feat, encoder_feat, "skip merge operands")
    return decoder_feat + encoder_feat


@dataclass
class DenoiseInput:
    """
    One denoiser call.

    For conditional models mask_latent is required; context defaults to the
    tokens embedded from mask_latent.
    """
    z_t: Volume
    t: int
    mask_latent: Optional[Volume] = None
    context: Optional[np.ndarray] = None


class _Level:
    """ResBlocks plus optional cross-attention at one resolution."""

    def __init__(
        self,
        params: ParamSet,
        name: str,
        in_channels: int,
        channels: int,
        config: UnetConfig,
        time_dim: int,
        attend: bool,
        rng: Rng,
    ):
        self.blocks = []
        for b in range(config.blocks_per_level):
            self.blocks.append(
                ResBlock(params, f"{name}.block{b}", in_channels, channels, rng, time_dim=time_dim, groups=config.groups)
            )
            in_channels = channels
        self.attention = (
            CrossAttention(
                params, f"{name}.attn", channels, config.context_dim, rng,
                width=config.attention_width, heads=config.heads,
            )
            if attend
            else None
        )

    def forward(self, h: Volume, temb: np.ndarray, context: Optional[np.ndarray]) -> tuple[Volume, Any]:
        caches = []
        for block in self.blocks:
            h, c = block.forward(h, temb)
            caches.append(c)
        c_attn = None
        if self.attention is not None:
            h, c_attn = self.attention.forward(h, context)
        return h, (caches, c_attn)

    def backward(self, cache: Any, g: Volume) -> tuple[Volume, np.ndarray, Optional[np.ndarray]]:
        caches, c_attn = cache
        g_context = None
        if self.attention is not None:
            g, g_context = self.attention.backward(c_attn, g)
        g_temb = None
        for block, c in zip(reversed(self.blocks), reversed(caches)):
            g, g_t = block.backward(c, g)
            g_temb = g_t if g_temb is None else g_temb + g_t
        return g, g_temb, g_context


class DenoiserUnet:
    """
    Velocity-predicting U-Net over (4, d, h, w) latents.

    Attributes:
        config: Architecture
        params: All trainable parameters
        conditional: Whether a mask latent and context are required

    Example:
        unet = DenoiserUnet(UnetConfig(), num_timesteps=1000, rng=Rng(0).spawn("init"))
        v_hat = unet.denoise(DenoiseInput(z_t, t=500, mask_latent=m))
    """

    def __init__(self, config: UnetConfig, num_timesteps: int, rng: Rng):
        self.config = config
        self.num_timesteps = num_timesteps
        self.conditional = config.conditional
        self.params = ParamSet()
        params = self.params
        channels = config.channels()
        attention_levels = set(config.resolved_attention_levels())
        sinusoid_dim = config.base_channels + config.base_channels % 2
        time_dim = 4 * config.base_channels

        self.time_embed = TimeEmbedding(params, "time_embed", sinusoid_dim, time_dim, num_timesteps, rng)
        self.context_embed = (
            ContextEmbedder(params, "context", config.context_dim, rng, grid=config.token_grid)
            if self.conditional
            else None
        )
        self.conv_in = Conv3d(params, "conv_in", config.input_channels(), channels[0], rng)

        self.down: list[_Level] = []
        self.downsamples: list[Downsample] = []
        in_ch = channels[0]
        for level, ch in enumerate(channels):
            self.down.append(
                _Level(params, f"down{level}", in_ch, ch, config, time_dim, level in attention_levels, rng)
            )
            in_ch = ch
            if level < config.levels - 1:
                self.downsamples.append(Downsample(params, f"down{level}.downsample", ch, channels[level + 1], rng))
                in_ch = channels[level + 1]

        self.upsamples: dict[int, Upsample] = {}
        self.up: dict[int, _Level] = {}
        for level in reversed(range(config.levels - 1)):
            ch = channels[level]
            self.upsamples[level] = Upsample(params, f"up{level}.upsample", channels[level + 1], ch, rng)
            self.up[level] = _Level(params, f"up{level}", ch, ch, config, time_dim, level in attention_levels, rng)

        self.norm_out = GroupNorm(params, "norm_out", channels[0], config.groups)
        self.act = SiLU()
        self.conv_out = Conv3d(params, "conv_out", channels[0], config.latent_channels, rng, zero_init=True)

    def skip_channels(self) -> list[tuple[int, int]]:
        """(channels before merge, channels after merge) for every up level."""
        channels = self.config.channels()
        return [(self.upsamples[l].conv.out_channels, channels[l]) for l in sorted(self.up)]

    def _validate(self, inp: DenoiseInput) -> None:
        check_volume(inp.z_t, "z_t")
        if inp.z_t.shape[0] != self.config.latent_channels:
            raise ShapeError(f"z_t must have {self.config.latent_channels} channels, got {inp.z_t.shape[0]}")
        factor = 2 ** (self.config.levels - 1)
        if any(d % factor for d in inp.z_t.shape[1:]):
            raise ShapeError(
                f"latent dims {inp.z_t.shape[1:]} must be divisible by {factor} for {self.config.levels} levels"
            )
        if not 1 <= inp.t <= self.num_timesteps:
            raise ValueError(f"timestep {inp.t} outside 1..{self.num_timesteps}")
        if self.conditional and inp.mask_latent is None:
            raise ConfigError("conditional U-Net requires a mask latent and context")
        if not self.conditional and (inp.mask_latent is not None or inp.context is not None):
            raise ConfigError("unconditional U-Net does not accept a mask or context")

    def embed_context(self, mask_latent: Optional[Volume]) -> Optional[np.ndarray]:
        """Context tokens for a mask latent (None for unconditional models)."""
        if self.context_embed is None or mask_latent is None:
            return None
        tokens, _ = self.context_embed.forward(mask_latent)
        return tokens

    def forward(self, inp: DenoiseInput) -> tuple[Volume, Any]:
        self._validate(inp)
        temb, c_temb = self.time_embed.forward(inp.t)
        context, c_ctx = inp.context, None
        if self.conditional:
            x = concat_condition(inp.z_t, inp.mask_latent)
            if context is None:
                context, c_ctx = self.context_embed.forward(inp.mask_latent)
        else:
            x = inp.z_t

        h, c_in = self.conv_in.forward(x)
        skips = []
        down_caches = []
        for level, stage in enumerate(self.down):
            h, c = stage.forward(h, temb, context)
            down_caches.append(c)
            if level < self.config.levels - 1:
                skips.append(h)
                h, c = self.downsamples[level].forward(h)
                down_caches.append(c)

        up_caches = []
        for level in reversed(range(self.config.levels - 1)):
            h, c_up = self.upsamples[level].forward(h)
            h = additive_skip_merge(h, skips[level])
            h, c = self.up[level].forward(h, temb, context)
            up_caches.append((c_up, c))

        h, c_n = self.norm_out.forward(h)
        h, c_a = self.act.forward(h)
        v_hat, c_out = self.conv_out.forward(h)
        cache = (c_temb, c_ctx, c_in, down_caches, up_caches, c_n, c_a, c_out)
        return v_hat, cache

    def denoise(self, inp: DenoiseInput) -> Volume:
        """v-hat with exactly z_t's shape."""
        return self.forward(inp)[0]

    def predict(
        self,
        z_t: Volume,
        t: int,
        context: Optional[np.ndarray] = None,
        mask_latent: Optional[Volume] = None,
    ) -> Volume:
        return self.denoise(DenoiseInput(z_t, t, mask_latent=mask_latent, context=context))

    def backward(self, cache: Any, grad_v: Volume) -> tuple[Volume, Optional[np.ndarray]]:
        """
        Accumulate parameter gradients.

        Returns:
            tuple: (gradient w.r.t. z_t, gradient w.r.t. the context tokens or None)
        """
        c_temb, c_ctx, c_in, down_caches, up_caches, c_n, c_a, c_out = cache
        g = self.conv_out.backward(c_out, grad_v)
        g = self.act.backward(c_a, g)
        g = self.norm_out.backward(c_n, g)
        g_temb = np.zeros(self.time_embed.embed_dim)
        g_context = None

        def add_context(gc: Optional[np.ndarray]) -> None:
            nonlocal g_context
            if gc is not None:
                g_context = gc if g_context is None else g_context + gc

        skip_grads: dict[int, Volume] = {}
        levels_up = list(reversed(range(self.config.levels - 1)))
        for level, (c_up, c) in zip(reversed(levels_up), reversed(up_caches)):
            g, g_t, g_c = self.up[level].backward(c, g)
            g_temb += g_t
            add_context(g_c)
            skip_grads[level] = g
            g = self.upsamples[level].backward(c_up, g)

        caches = list(down_caches)
        for level in reversed(range(self.config.levels)):
            if level < self.config.levels - 1:
                g = self.downsamples[level].backward(caches.pop(), g)
                g = g + skip_grads[level]
            g, g_t, g_c = self.down[level].backward(caches.pop(), g)
            g_temb += g_t
            add_context(g_c)

        g_x = self.conv_in.backward(c_in, g)
        self.time_embed.backward(c_temb, g_temb)
        if c_ctx is not None and g_context is not None:
            self.context_embed.backward(c_ctx, g_context)
        return g_x[: self.config.latent_channels], g_context
