"""Networks: a three-branch convolutional encoder with one reconstruction
head per source component, and a patch discriminator that doubles as a
subset classifier.

All channel widths scale with a single multiplier so the same code runs
at publication size (width 1.0) and at desk-test size. Normalization is
affine-free instance norm throughout; every conv carries a bias.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

__all__ = [
    "GeneratorSpec",
    "DiscriminatorSpec",
    "Generator",
    "Discriminator",
    "build_generator",
    "build_discriminator",
    "generate",
    "predict_sources",
    "count_parameters",
]


def _ch(base: int, width: float) -> int:
    return max(1, int(round(base * width)))


def _check_width(width: float) -> None:
    if not (isinstance(width, (int, float)) and 0.0 < width <= 4.0):
        raise ValueError(f"width multiplier must be in (0, 4], got {width!r}")


@dataclass(frozen=True)
class GeneratorSpec:
    n_components: int
    width: float = 1.0

    def __post_init__(self):
        if not 1 <= self.n_components <= 16:
            raise ValueError(f"n_components out of range: {self.n_components}")
        _check_width(self.width)


@dataclass(frozen=True)
class DiscriminatorSpec:
    n_components: int
    width: float = 1.0

    def __post_init__(self):
        if not 1 <= self.n_components <= 16:
            raise ValueError(f"n_components out of range: {self.n_components}")
        _check_width(self.width)


def _conv_block(cin: int, cout: int, k: int, stride: int = 1) -> nn.Sequential:
    """k x k conv, instance norm, ReLU. Large odd kernels reflect-pad,
    strided convs zero-pad."""
    layers = []
    pad = (k - 1) // 2
    if stride == 1 and k > 1:
        layers.append(nn.ReflectionPad2d(pad))
        layers.append(nn.Conv2d(cin, cout, k))
    else:
        layers.append(nn.Conv2d(cin, cout, k, stride=stride, padding=pad))
    layers.append(nn.InstanceNorm2d(cout))
    layers.append(nn.ReLU(inplace=True))
    return nn.Sequential(*layers)


def _upconv_block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.ConvTranspose2d(cin, cout, 3, stride=2, padding=1, output_padding=1),
        nn.InstanceNorm2d(cout),
        nn.ReLU(inplace=True),
    )


class _ResBlock(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.body = nn.Sequential(
            nn.ReflectionPad2d(1),
            nn.Conv2d(ch, ch, 3),
            nn.InstanceNorm2d(ch),
            nn.ReLU(inplace=True),
            nn.ReflectionPad2d(1),
            nn.Conv2d(ch, ch, 3),
            nn.InstanceNorm2d(ch),
        )

    def forward(self, x):
        return x + self.body(x)


def _res_stack(ch: int, n: int = 9) -> nn.Sequential:
    return nn.Sequential(*[_ResBlock(ch) for _ in range(n)])


class Encoder(nn.Module):
    """Three parallel feature extractors over the mixed image.

    The first branch downsamples once and is average-pooled to match the
    other two, which downsample twice; the three outputs concatenate to
    a single quarter-resolution feature map.
    """

    def __init__(self, width: float = 1.0):
        super().__init__()
        c64, c128 = _ch(64, width), _ch(128, width)
        c256 = _ch(256, width)
        self.branch1 = nn.Sequential(
            _conv_block(3, c256, 3, stride=2),
            _res_stack(c256),
            _conv_block(c256, c128, 1),
        )
        self.branch2 = nn.Sequential(
            _conv_block(3, c64, 7),
            _conv_block(c64, c128, 3, stride=2),
            _conv_block(c128, c256, 3, stride=2),
            _res_stack(c256),
        )
        self.branch3 = nn.Sequential(
            _conv_block(3, c64, 15),
            _conv_block(c64, c128, 3, stride=2),
            _conv_block(c128, c256, 3, stride=2),
            _conv_block(c256, c256, 3),
            _conv_block(c256, c256, 3),
            _res_stack(c256),
            _conv_block(c256, c128, 1),
        )
        self.out_channels = c128 + c256 + c128

    def forward(self, z):
        f1 = F.avg_pool2d(self.branch1(z), 2)
        return torch.cat([f1, self.branch2(z), self.branch3(z)], dim=1)


class _Head(nn.Module):
    """Decodes the shared features back to one full-resolution source."""

    def __init__(self, cin: int, width: float = 1.0):
        super().__init__()
        c64, c128 = _ch(64, width), _ch(128, width)
        c256 = _ch(256, width)
        self.body = nn.Sequential(
            _conv_block(cin, c256, 1),
            _conv_block(c256, c256, 1),
            _upconv_block(c256, c128),
            _upconv_block(c128, c64),
            nn.ReflectionPad2d(3),
            nn.Conv2d(c64, 3, 7),
            nn.Tanh(),
        )

    def forward(self, feats):
        return self.body(feats)


class Generator(nn.Module):
    """Encoder plus one head per component; inputs and outputs live in
    [-1, 1]."""

    def __init__(self, spec: GeneratorSpec):
        super().__init__()
        self.spec = spec
        self.encoder = Encoder(spec.width)
        self.heads = nn.ModuleList(
            _Head(self.encoder.out_channels, spec.width)
            for _ in range(spec.n_components))

    def forward(self, z, indices=None) -> dict:
        if z.dim() != 4 or z.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) input, got {tuple(z.shape)}")
        if z.shape[2] % 4 or z.shape[3] % 4:
            raise ValueError(
                f"spatial size must be divisible by 4, got {tuple(z.shape[2:])}")
        feats = self.encoder(z)
        if indices is None:
            indices = range(self.spec.n_components)
        return {i: self.heads[i](feats) for i in indices}


class Discriminator(nn.Module):
    """Shared downsampling trunk with two outputs: a patch realism map
    and one presence logit per component (threshold 0)."""

    def __init__(self, spec: DiscriminatorSpec):
        super().__init__()
        self.spec = spec
        w = spec.width
        c64, c128 = _ch(64, w), _ch(128, w)
        c256, c512 = _ch(256, w), _ch(512, w)

        def down(cin, cout):
            return nn.Sequential(
                nn.Conv2d(cin, cout, 4, stride=2, padding=1),
                nn.InstanceNorm2d(cout),
                nn.LeakyReLU(0.2, inplace=True),
            )

        self.trunk = nn.Sequential(
            down(3, c64), down(c64, c128), down(c128, c256), down(c256, c512))
        self.patch_out = nn.Conv2d(c512, 1, 4, stride=1, padding=1)
        self.pred_mix = nn.Sequential(
            nn.Conv2d(c512, c512, 1), nn.LeakyReLU(0.2, inplace=True))
        self.pred_out = nn.Conv2d(c512, spec.n_components, 1)

    def _check(self, x) -> None:
        # four stride-2 stages with instance norm need >= 2 px at the bottom
        if x.dim() != 4 or x.shape[2] < 32 or x.shape[3] < 32:
            raise ValueError(
                f"discriminator needs (B, 3, >=32, >=32), got {tuple(x.shape)}")

    def patch(self, x):
        self._check(x)
        return self.patch_out(self.trunk(x))

    def logits(self, x):
        self._check(x)
        h = self.pred_mix(self.trunk(x))
        pooled = h.amax(dim=(2, 3), keepdim=True)
        return self.pred_out(pooled).flatten(1)

    def forward(self, x):
        self._check(x)
        t = self.trunk(x)
        pooled = self.pred_mix(t).amax(dim=(2, 3), keepdim=True)
        return self.patch_out(t), self.pred_out(pooled).flatten(1)


def _init_xavier(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.xavier_normal_(m.weight)
            if m.bias is not None:
                nn.init.zeros_(m.bias)


def build_generator(spec: GeneratorSpec) -> Generator:
    model = Generator(spec)
    _init_xavier(model)
    return model


def build_discriminator(spec: DiscriminatorSpec) -> Discriminator:
    model = Discriminator(spec)
    _init_xavier(model)
    return model


def generate(model: Generator, z) -> list:
    """All component reconstructions for a mixed batch, index order."""
    outs = model(z)
    return [outs[i] for i in range(model.spec.n_components)]


def predict_sources(disc: Discriminator, z) -> frozenset:
    """Set of component indices whose presence logit is strictly positive.

    Scaling the logits by any positive constant cannot change the answer.
    """
    with torch.no_grad():
        logits = disc.logits(z if z.dim() == 4 else z.unsqueeze(0))
    if logits.shape[0] != 1:
        raise ValueError("predict_sources takes a single image")
    return frozenset(i for i, v in enumerate(logits[0].tolist()) if v > 0.0)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
