"""
Patch discriminator: stride-2 3x3x3 convolutions with LeakyReLU, then a
1x1x1 convolution to one logit per patch.
"""

from typing import Any, Sequence

from ..core import Rng, Volume
from ..nn.layers import Conv3d, LeakyReLU
from ..nn.params import ParamSet

LEAKY_SLOPE = 0.2


class PatchDiscriminator:
    def __init__(self, widths: Sequence[int], rng: Rng, in_channels: int = 1):
        self.params = ParamSet()
        self.convs: list[Conv3d] = []
        channels = in_channels
        for i, width in enumerate(widths):
            self.convs.append(Conv3d(self.params, f"disc.conv{i}", channels, width, rng, kernel=3, stride=2, padding=1))
            channels = width
        self.act = LeakyReLU(LEAKY_SLOPE)
        self.head = Conv3d(self.params, "disc.head", channels, 1, rng, kernel=1)

    def forward(self, x: Volume) -> tuple[Volume, Any]:
        caches = []
        h = x
        for conv in self.convs:
            h, c_conv = conv.forward(h)
            h, c_act = self.act.forward(h)
            caches.append((c_conv, c_act))
        logits, c_head = self.head.forward(h)
        return logits, (caches, c_head)

    def backward(self, cache: Any, grad_logits: Volume) -> Volume:
        caches, c_head = cache
        g = self.head.backward(c_head, grad_logits)
        for conv, (c_conv, c_act) in zip(reversed(self.convs), reversed(caches)):
            g = self.act.backward(c_act, g)
            g = conv.backward(c_conv, g)
        return g
