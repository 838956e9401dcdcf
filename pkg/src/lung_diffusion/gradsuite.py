"""
Finite-difference gradient suite over every layer kind and the two models.

Each fragment wraps a small randomly shaped instance with a random
projection loss head L = sum(P * y). Parameters are jittered away from
their initial values so zero-initialized branches carry gradient.
"""

import logging
from typing import Any, Callable, Mapping, Optional

import numpy as np

from .conditioning.context import ContextEmbedder
from .core import Rng
from .models.config import RunConfig, UnetConfig, VaeConfig
from .nn.blocks import CrossAttention, ResBlock, TimeEmbedding
from .nn.gradcheck import DEFAULT_TOLERANCE, GradCheckReport, grad_check
from .nn.layers import Conv3d, Downsample, GroupNorm, LeakyReLU, Linear, SiLU, Upsample
from .nn.params import ParamSet
from .nn.pyramid import FeaturePyramid
from .unet.model import DenoiseInput, DenoiserUnet
from .vae.discriminator import PatchDiscriminator
from .vae.losses import perceptual_loss, perceptual_loss_and_grad

logger = logging.getLogger(__name__)

PARAM_JITTER = 0.1

ForwardFn = Callable[[Mapping[str, np.ndarray]], tuple[np.ndarray, Any]]
BackwardFn = Callable[[Any, np.ndarray], dict[str, np.ndarray]]


def jitter(params: ParamSet, rng: Rng, scale: float = PARAM_JITTER) -> None:
    """Add N(0, scale^2) noise to every parameter."""
    for name in params:
        params.values[name] += scale * rng.spawn(name).normal(params.values[name].shape)


class ProjectedFragment:
    """
    Layer (or composite) with a fixed random projection as its scalar loss.

    forward maps the named inputs to an output array; backward maps the
    output gradient to the input gradients that should be checked.
    """

    def __init__(self, params: ParamSet, forward: ForwardFn, backward: BackwardFn, rng: Rng):
        self.params = params
        self._forward = forward
        self._backward = backward
        self._rng = rng
        self._projection: Optional[np.ndarray] = None

    def _project(self, y: np.ndarray) -> np.ndarray:
        if self._projection is None or self._projection.shape != y.shape:
            self._projection = self._rng.spawn("projection").normal(y.shape)
        return self._projection

    def loss(self, inputs: Mapping[str, np.ndarray]) -> float:
        y, _ = self._forward(inputs)
        return float((self._project(y) * y).sum())

    def loss_and_grads(self, inputs: Mapping[str, np.ndarray]) -> tuple[float, dict[str, np.ndarray]]:
        y, cache = self._forward(inputs)
        p = self._project(y)
        return float((p * y).sum()), self._backward(cache, p)


class ScalarFragment:
    """Fragment whose forward already ends in a scalar loss."""

    def __init__(
        self,
        params: ParamSet,
        loss: Callable[[Mapping[str, np.ndarray]], float],
        loss_and_grads: Callable[[Mapping[str, np.ndarray]], tuple[float, dict[str, np.ndarray]]],
    ):
        self.params = params
        self.loss = loss
        self.loss_and_grads = loss_and_grads


SuiteEntry = tuple[str, Any, dict[str, np.ndarray]]


def _layer_fragments(rng: Rng) -> list[SuiteEntry]:
    entries: list[SuiteEntry] = []

    def add(name: str, params: ParamSet, forward: ForwardFn, backward: BackwardFn, inputs: dict) -> None:
        jitter(params, rng.spawn(name).spawn("jitter"))
        entries.append((name, ProjectedFragment(params, forward, backward, rng.spawn(name)), inputs))

    def stream(name: str) -> Rng:
        return rng.spawn(name).spawn("data")

    params = ParamSet()
    linear = Linear(params, "linear", 5, 3, rng)
    add(
        "linear", params,
        lambda i: linear.forward(i["x"]),
        lambda c, g: {"x": linear.backward(c, g)},
        {"x": stream("linear").normal((4, 5))},
    )

    params = ParamSet()
    conv = Conv3d(params, "conv", 2, 3, rng)
    add(
        "conv", params,
        lambda i: conv.forward(i["x"]),
        lambda c, g: {"x": conv.backward(c, g)},
        {"x": stream("conv").normal((2, 4, 5, 3))},
    )

    params = ParamSet()
    down = Downsample(params, "downsample", 2, 3, rng)
    add(
        "downsample", params,
        lambda i: down.forward(i["x"]),
        lambda c, g: {"x": down.backward(c, g)},
        {"x": stream("downsample").normal((2, 4, 4, 6))},
    )

    params = ParamSet()
    up = Upsample(params, "upsample", 2, 2, rng)
    add(
        "upsample", params,
        lambda i: up.forward(i["x"]),
        lambda c, g: {"x": up.backward(c, g)},
        {"x": stream("upsample").normal((2, 2, 3, 2))},
    )

    params = ParamSet()
    norm = GroupNorm(params, "groupnorm", 4, groups=2)
    add(
        "groupnorm", params,
        lambda i: norm.forward(i["x"]),
        lambda c, g: {"x": norm.backward(c, g)},
        {"x": stream("groupnorm").normal((4, 3, 3, 3))},
    )

    silu = SiLU()
    add(
        "silu", ParamSet(),
        lambda i: silu.forward(i["x"]),
        lambda c, g: {"x": silu.backward(c, g)},
        {"x": stream("silu").normal((2, 3, 3, 3))},
    )

    leaky = LeakyReLU(0.2)
    add(
        "leaky-relu", ParamSet(),
        lambda i: leaky.forward(i["x"]),
        lambda c, g: {"x": leaky.backward(c, g)},
        {"x": stream("leaky-relu").normal((2, 3, 3, 3))},
    )

    params = ParamSet()
    chain_conv = Conv3d(params, "chain.conv", 2, 4, rng)
    chain_norm = GroupNorm(params, "chain.norm", 4, groups=2)
    chain_act = SiLU()

    def chain_forward(i):
        h, c1 = chain_conv.forward(i["x"])
        h, c2 = chain_norm.forward(h)
        h, c3 = chain_act.forward(h)
        return h, (c1, c2, c3)

    def chain_backward(c, g):
        c1, c2, c3 = c
        return {"x": chain_conv.backward(c1, chain_norm.backward(c2, chain_act.backward(c3, g)))}

    add("conv-groupnorm-silu", params, chain_forward, chain_backward, {"x": stream("chain").normal((2, 3, 4, 3))})

    params = ParamSet()
    block = ResBlock(params, "resblock", 4, 8, rng, time_dim=6, groups=2)

    def block_backward(c, g):
        grad_x, grad_temb = block.backward(c, g)
        return {"x": grad_x, "temb": grad_temb}

    add(
        "residual-block", params,
        lambda i: block.forward(i["x"], i["temb"]),
        block_backward,
        {"x": stream("resblock").normal((4, 3, 3, 3)), "temb": stream("resblock").spawn("temb").normal((6,))},
    )

    params = ParamSet()
    attention = CrossAttention(params, "attention", 6, 5, rng, width=8, heads=2)

    def attention_backward(c, g):
        grad_x, grad_context = attention.backward(c, g)
        return {"x": grad_x, "context": grad_context}

    add(
        "cross-attention", params,
        lambda i: attention.forward(i["x"], i["context"]),
        attention_backward,
        {"x": stream("attention").normal((6, 2, 2, 3)), "context": stream("attention").spawn("ctx").normal((3, 5))},
    )

    params = ParamSet()
    temb = TimeEmbedding(params, "time-embed", 8, 12, 1000, rng)

    def temb_backward(c, g):
        temb.backward(c, g)
        return {}

    add("time-embed", params, lambda i: temb.forward(417), temb_backward, {})

    params = ParamSet()
    context = ContextEmbedder(params, "context-embed", 6, rng, grid=2)

    def context_backward(c, g):
        context.backward(c, g)
        return {}

    add(
        "context-embed", params,
        lambda i: context.forward(i["mask"]),
        context_backward,
        {"mask": stream("context").normal((1, 4, 4, 2))},
    )

    disc = PatchDiscriminator((3, 4), rng.spawn("disc"))
    add(
        "discriminator", disc.params,
        lambda i: disc.forward(i["x"]),
        lambda c, g: {"x": disc.backward(c, g)},
        {"x": stream("disc").normal((1, 6, 6, 6))},
    )
    return entries


def _perceptual_fragment(rng: Rng) -> SuiteEntry:
    pyramid = FeaturePyramid((3, 4), seed=0)
    reference = rng.spawn("perceptual").normal((1, 6, 6, 6))
    fragment = ScalarFragment(
        ParamSet(),
        lambda i: perceptual_loss(reference, i["x_hat"], pyramid),
        lambda i: (lambda lg: (lg[0], {"x_hat": lg[1]}))(perceptual_loss_and_grad(reference, i["x_hat"], pyramid)),
    )
    return "perceptual-loss", fragment, {"x_hat": rng.spawn("perceptual").spawn("x_hat").normal((1, 6, 6, 6))}


def tiny_vae_config() -> RunConfig:
    """
    Reduced-width VAE (8^3 inputs) for gradient checks.

    MAE is piecewise linear (gradient sign(d) / N) and is weighted out; the
    smooth perceptual and KL terms drive the check through both halves.
    """
    vae = VaeConfig(widths=(4, 4, 4), groups=2, w_mae=0.0, perceptual_widths=(3, 3), disc_widths=(3, 3))
    return RunConfig(vae=vae)


def _vae_fragment(rng: Rng) -> SuiteEntry:
    from .vae.trainer import VaeTrainer

    trainer = VaeTrainer(tiny_vae_config())
    jitter(trainer.vae.params, rng.spawn("vae").spawn("jitter"))
    x = np.tanh(rng.spawn("vae").spawn("x").normal((1, 8, 8, 8)))
    eps = rng.spawn("vae").spawn("eps").normal(trainer.vae.latent_shape(x.shape[1:]))

    def loss(inputs):
        return trainer.generator_objective(x, eps, use_adv=False, backward=False)[1]

    def loss_and_grads(inputs):
        _, total, _ = trainer.generator_objective(x, eps, use_adv=False, backward=True)
        return total, {}

    return "vae", ScalarFragment(trainer.vae.params, loss, loss_and_grads), {}


def tiny_unet_config() -> UnetConfig:
    return UnetConfig(
        levels=2, blocks_per_level=1, base_channels=4, max_channels=8,
        context_dim=6, attention_width=4, heads=2, token_grid=2, groups=2,
    )


def _unet_fragment(rng: Rng) -> SuiteEntry:
    unet = DenoiserUnet(tiny_unet_config(), num_timesteps=1000, rng=rng.spawn("unet").spawn("init"))
    jitter(unet.params, rng.spawn("unet").spawn("jitter"))
    mask_latent = rng.spawn("unet").spawn("mask").normal((1, 4, 4, 4))

    def forward(inputs):
        return unet.forward(DenoiseInput(inputs["z_t"], 250, mask_latent=mask_latent))

    def backward(cache, g):
        grad_z, _ = unet.backward(cache, g)
        return {"z_t": grad_z}

    inputs = {"z_t": rng.spawn("unet").spawn("z_t").normal((4, 4, 4, 4))}
    return "unet", ProjectedFragment(unet.params, forward, backward, rng.spawn("unet")), inputs


def suite_entries(seed: int = 0, include_models: bool = True) -> list[SuiteEntry]:
    """Every fragment of the suite with its inputs."""
    rng = Rng(seed).spawn("gradcheck")
    entries = _layer_fragments(rng.spawn("layers"))
    entries.append(_perceptual_fragment(rng))
    if include_models:
        entries.append(_vae_fragment(rng))
        entries.append(_unet_fragment(rng))
    return entries


def run_suite(
    seed: int = 0,
    tolerance: float = DEFAULT_TOLERANCE,
    max_entries: Optional[int] = 16,
    include_models: bool = True,
    on_report: Optional[Callable[[GradCheckReport], None]] = None,
) -> list[GradCheckReport]:
    """
    Run the gradient check over every fragment.

    Returns:
        list[GradCheckReport]: One report per fragment, failures included
    """
    reports = []
    rng = Rng(seed).spawn("gradcheck").spawn("entries")
    for name, fragment, inputs in suite_entries(seed, include_models):
        report = grad_check(fragment, inputs, tolerance, max_entries, rng.spawn(name), name=name)
        logger.debug("gradcheck %s: max relative error %.3e", name, report.max_rel_error)
        reports.append(report)
        if on_report is not None:
            on_report(report)
    return reports
