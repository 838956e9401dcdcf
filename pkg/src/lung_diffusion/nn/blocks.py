"""
Composite blocks: sinusoidal time embedding, residual blocks with
time modulation, and cross-attention over context tokens.
"""

from typing import Any, Optional

import numpy as np

from ..core import Rng, Volume, check_volume
from ..errors import ShapeError
from .layers import (
    DEFAULT_GROUPS,
    Conv3d,
    GroupNorm,
    LayerKind,
    LayerSpec,
    Linear,
    SiLU,
    require_cache,
)
from .params import ParamSet

DEFAULT_ATTENTION_WIDTH = 64


def time_embedding(t: int, dim: int, num_timesteps: int) -> np.ndarray:
    """
    Sinusoidal timestep embedding.

    Components come in (sin, cos) pairs: entry 2i is sin(t * w_i) and entry
    2i + 1 is cos(t * w_i), with w_i = 10000^(-2i/dim).

    Args:
        t: Timestep in 1..num_timesteps
        dim: Embedding width (even)
        num_timesteps: Upper bound T for t

    Raises:
        ValueError: If t is out of range or dim is odd
    """
    if not 1 <= t <= num_timesteps:
        raise ValueError(f"timestep {t} outside 1..{num_timesteps}")
    if dim < 2 or dim % 2:
        raise ValueError(f"embedding dim must be even and >= 2, got {dim}")
    i = np.arange(dim // 2, dtype=np.float64)
    omega = 10000.0 ** (-2.0 * i / dim)
    emb = np.empty(dim, dtype=np.float64)
    emb[0::2] = np.sin(t * omega)
    emb[1::2] = np.cos(t * omega)
    return emb


class TimeEmbedding:
    """Sinusoid followed by Linear -> SiLU -> Linear."""

    def __init__(
        self,
        params: ParamSet,
        name: str,
        sinusoid_dim: int,
        embed_dim: int,
        num_timesteps: int,
        rng: Rng,
    ):
        self.name = name
        self.sinusoid_dim = sinusoid_dim
        self.embed_dim = embed_dim
        self.num_timesteps = num_timesteps
        self.spec = LayerSpec(LayerKind.TIME_EMBED, channels=sinusoid_dim, embed_dim=embed_dim)
        self.fc1 = Linear(params, f"{name}.fc1", sinusoid_dim, embed_dim, rng)
        self.act = SiLU()
        self.fc2 = Linear(params, f"{name}.fc2", embed_dim, embed_dim, rng)

    def forward(self, t: int) -> tuple[np.ndarray, Any]:
        h, c1 = self.fc1.forward(time_embedding(t, self.sinusoid_dim, self.num_timesteps))
        h, c2 = self.act.forward(h)
        h, c3 = self.fc2.forward(h)
        return h, (c1, c2, c3)

    def backward(self, cache: Any, grad_y: np.ndarray) -> None:
        require_cache(cache, self)
        c1, c2, c3 = cache
        g = self.fc2.backward(c3, grad_y)
        g = self.act.backward(c2, g)
        self.fc1.backward(c1, g)


class ResBlock:
    """
    Pre-activation residual block.

        h = conv1(silu(norm1(x)))
        h = norm2(h) * (1 + scale) + shift      (scale, shift from the time embedding)
        y = skip(x) + conv2(silu(h))

    conv2 is zero-initialized, so a fresh block with equal in/out widths is
    the identity. skip is a 1x1 convolution when the widths differ.
    """

    def __init__(
        self,
        params: ParamSet,
        name: str,
        in_channels: int,
        out_channels: int,
        rng: Rng,
        time_dim: Optional[int] = None,
        groups: int = DEFAULT_GROUPS,
    ):
        self.name = name
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.spec = LayerSpec(
            LayerKind.RESIDUAL_BLOCK, channels=in_channels, out_channels=out_channels, embed_dim=time_dim or 0
        )
        self.norm1 = GroupNorm(params, f"{name}.norm1", in_channels, groups)
        self.act = SiLU()
        self.conv1 = Conv3d(params, f"{name}.conv1", in_channels, out_channels, rng)
        self.norm2 = GroupNorm(params, f"{name}.norm2", out_channels, groups)
        self.conv2 = Conv3d(params, f"{name}.conv2", out_channels, out_channels, rng, zero_init=True)
        self.time_proj = (
            Linear(params, f"{name}.time_proj", time_dim, 2 * out_channels, rng)
            if time_dim is not None
            else None
        )
        self.skip = (
            Conv3d(params, f"{name}.skip", in_channels, out_channels, rng, kernel=1)
            if in_channels != out_channels
            else None
        )

    def forward(self, x: Volume, temb: Optional[np.ndarray] = None) -> tuple[Volume, Any]:
        if (temb is None) != (self.time_proj is None):
            raise ShapeError(f"{self.name}: time embedding must be given iff the block has a time projection")
        h, c_n1 = self.norm1.forward(x)
        h, c_a1 = self.act.forward(h)
        h, c_c1 = self.conv1.forward(h)
        h, c_n2 = self.norm2.forward(h)
        c_t = None
        if self.time_proj is not None:
            t_act, c_ta = self.act.forward(temb)
            ss, c_tp = self.time_proj.forward(t_act)
            scale = ss[: self.out_channels][:, None, None, None]
            shift = ss[self.out_channels:][:, None, None, None]
            c_t = (h, scale, c_ta, c_tp)
            h = h * (1.0 + scale) + shift
        h, c_a2 = self.act.forward(h)
        h, c_c2 = self.conv2.forward(h)
        if self.skip is not None:
            s, c_s = self.skip.forward(x)
        else:
            s, c_s = x, None
        return s + h, (c_n1, c_a1, c_c1, c_n2, c_t, c_a2, c_c2, c_s)

    def backward(self, cache: Any, grad_y: Volume) -> tuple[Volume, Optional[np.ndarray]]:
        """Returns (grad_x, grad_temb); grad_temb is None without time conditioning."""
        require_cache(cache, self)
        c_n1, c_a1, c_c1, c_n2, c_t, c_a2, c_c2, c_s = cache
        g = self.conv2.backward(c_c2, grad_y)
        g = self.act.backward(c_a2, g)
        grad_temb = None
        if c_t is not None:
            h_norm, scale, c_ta, c_tp = c_t
            g_scale = (g * h_norm).sum(axis=(1, 2, 3))
            g_shift = g.sum(axis=(1, 2, 3))
            g = g * (1.0 + scale)
            g_t = self.time_proj.backward(c_tp, np.concatenate([g_scale, g_shift]))
            grad_temb = self.act.backward(c_ta, g_t)
        g = self.norm2.backward(c_n2, g)
        g = self.conv1.backward(c_c1, g)
        g = self.act.backward(c_a1, g)
        grad_x = self.norm1.backward(c_n1, g)
        if self.skip is not None:
            grad_x = grad_x + self.skip.backward(c_s, grad_y)
        else:
            grad_x = grad_x + grad_y
        return grad_x, grad_temb


def softmax_rows(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class CrossAttention:
    """
    Multi-head cross-attention from voxel queries to context tokens.

    Queries are the flattened spatial positions of a (C, D, H, W) feature map;
    keys and values are projections of the (n_ctx, d_ctx) context. The head
    outputs are concatenated, projected back to C channels (zero-initialized
    projection) and added to the input.
    """

    def __init__(
        self,
        params: ParamSet,
        name: str,
        query_dim: int,
        context_dim: int,
        rng: Rng,
        width: int = DEFAULT_ATTENTION_WIDTH,
        heads: int = 1,
    ):
        self.name = name
        self.query_dim = query_dim
        self.context_dim = context_dim
        self.width = width
        self.heads = heads
        self.spec = LayerSpec(LayerKind.CROSS_ATTENTION, channels=query_dim, heads=heads, embed_dim=width)
        self.head_dim = width // heads
        self.to_q = Linear(params, f"{name}.to_q", query_dim, width, rng, bias=False)
        self.to_k = Linear(params, f"{name}.to_k", context_dim, width, rng, bias=False)
        self.to_v = Linear(params, f"{name}.to_v", context_dim, width, rng, bias=False)
        self.to_out = Linear(params, f"{name}.to_out", width, query_dim, rng, zero_init=True)

    def _split(self, m: np.ndarray) -> np.ndarray:
        # (n, width) -> (heads, n, head_dim)
        return m.reshape(m.shape[0], self.heads, self.head_dim).transpose(1, 0, 2)

    def _merge(self, m: np.ndarray) -> np.ndarray:
        return m.transpose(1, 0, 2).reshape(m.shape[1], self.width)

    def forward(self, x: Volume, context: np.ndarray) -> tuple[Volume, Any]:
        check_volume(x, f"{self.name} queries")
        if x.shape[0] != self.query_dim:
            raise ShapeError(f"{self.name}: expected {self.query_dim} query channels, got {x.shape[0]}")
        if context.ndim != 2 or context.shape[0] == 0:
            raise ShapeError(f"{self.name}: context must be a non-empty (n_ctx, d_ctx) matrix, got {context.shape}")
        if context.shape[1] != self.context_dim:
            raise ShapeError(f"{self.name}: expected context width {self.context_dim}, got {context.shape[1]}")
        tokens = x.reshape(self.query_dim, -1).T
        q, c_q = self.to_q.forward(tokens)
        k, c_k = self.to_k.forward(context)
        v, c_v = self.to_v.forward(context)
        qh, kh, vh = self._split(q), self._split(k), self._split(v)
        scores = qh @ kh.transpose(0, 2, 1) / np.sqrt(self.head_dim)
        attn = softmax_rows(scores)
        out = self._merge(attn @ vh)
        y, c_o = self.to_out.forward(out)
        cache = (x.shape, qh, kh, vh, attn, c_q, c_k, c_v, c_o)
        return x + y.T.reshape(x.shape), cache

    @staticmethod
    def attention_weights(cache: Any) -> np.ndarray:
        """(heads, n_queries, n_ctx) softmax weights saved by forward."""
        return cache[4]

    def backward(self, cache: Any, grad_y: Volume) -> tuple[Volume, np.ndarray]:
        """Returns (grad_x, grad_context)."""
        require_cache(cache, self)
        shape, qh, kh, vh, attn, c_q, c_k, c_v, c_o = cache
        g_tokens = grad_y.reshape(self.query_dim, -1).T
        g_out = self._split(self.to_out.backward(c_o, g_tokens))
        g_attn = g_out @ vh.transpose(0, 2, 1)
        g_vh = attn.transpose(0, 2, 1) @ g_out
        g_scores = attn * (g_attn - (g_attn * attn).sum(axis=-1, keepdims=True))
        g_scores /= np.sqrt(self.head_dim)
        g_qh = g_scores @ kh
        g_kh = g_scores.transpose(0, 2, 1) @ qh
        g_q_tokens = self.to_q.backward(c_q, self._merge(g_qh))
        g_context = self.to_k.backward(c_k, self._merge(g_kh)) + self.to_v.backward(c_v, self._merge(g_vh))
        grad_x = grad_y + g_q_tokens.T.reshape(shape)
        return grad_x, g_context
