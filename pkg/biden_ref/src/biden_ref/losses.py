"""Objective terms and their weighted sum.

Four terms: least-squares adversarial loss on patch maps (a logistic
form is available behind a flag), a multi-stage feature distance, gated
per-component reconstruction (L1 for images, L2 for mask-like
components), and per-component binary cross-entropy on the subset
logits. Reconstruction and adversarial terms only ever see the heads of
components that are actually present in the sample; absent heads are
not run at all, so their parameters receive no gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

__all__ = [
    "LossWeights",
    "FeaturePyramid",
    "adversarial_term",
    "feature_distance",
    "recon_term",
    "subset_bce",
    "total_loss",
    "discriminator_loss",
]

STAGE_WEIGHTS = (1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0)


@dataclass(frozen=True)
class LossWeights:
    gan: float = 1.0
    feat: float = 10.0
    recon: float = 30.0
    bce: float = 1.0

    def __post_init__(self):
        for name in ("gan", "feat", "recon", "bce"):
            if getattr(self, name) < 0:
                raise ValueError(f"loss weight {name} must be non-negative")


class FeaturePyramid(nn.Module):
    """Five-stage feature extractor for the perceptual distance.

    mode "random" freezes a small randomly initialized conv stack so no
    pretrained weights are needed; mode "vgg19" taps the usual five ReLU
    stages of a pretrained VGG-19 (requires torchvision weights and is
    meant for full-scale runs only).
    """

    def __init__(self, mode: str = "random", seed: int = 0):
        super().__init__()
        if mode == "random":
            gen = torch.Generator().manual_seed(seed)
            chans = (16, 32, 64, 96, 128)
            stages, cin = [], 3
            for i, cout in enumerate(chans):
                conv = nn.Conv2d(cin, cout, 3, stride=1 if i == 0 else 2,
                                 padding=1)
                with torch.no_grad():
                    conv.weight.copy_(torch.randn(conv.weight.shape,
                                                  generator=gen)
                                      * (2.0 / (cin * 9)) ** 0.5)
                    conv.bias.zero_()
                stages.append(nn.Sequential(conv, nn.ReLU(inplace=True)))
                cin = cout
            self.stages = nn.ModuleList(stages)
        elif mode == "vgg19":
            from torchvision import models as tvm
            vgg = tvm.vgg19(weights=tvm.VGG19_Weights.IMAGENET1K_V1).features
            cuts = (2, 7, 12, 21, 30)
            lo = 0
            self.stages = nn.ModuleList()
            for hi in cuts:
                self.stages.append(nn.Sequential(*[vgg[i] for i in range(lo, hi)]))
                lo = hi
        else:
            raise ValueError(f"unknown feature mode {mode!r}")
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def forward(self, x) -> list:
        feats = []
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return feats


def adversarial_term(patch, real: bool, form: str = "lsgan"):
    """One side of the adversarial objective for a patch map."""
    target = torch.ones_like(patch) if real else torch.zeros_like(patch)
    if form == "lsgan":
        return ((patch - target) ** 2).mean()
    if form == "logistic":
        return F.binary_cross_entropy_with_logits(patch, target)
    raise ValueError(f"unknown adversarial form {form!r}")


def feature_distance(pyramid: FeaturePyramid, x, y):
    fx, fy = pyramid(x), pyramid(y)
    total = x.new_zeros(())
    for w, a, b in zip(STAGE_WEIGHTS, fx, fy):
        total = total + w * (a - b).abs().mean()
    return total


def recon_term(pred, target, kind: str = "l1"):
    if kind == "l1":
        return (pred - target).abs().mean()
    if kind == "l2":
        return ((pred - target) ** 2).mean()
    raise ValueError(f"unknown reconstruction kind {kind!r}")


def subset_bce(logits, labels):
    """Sum of per-component binary cross-entropies, mean over the batch.

    At uniform (zero) logits this is N*ln(2) regardless of the labels.
    """
    if logits.shape != labels.shape:
        raise ValueError(f"logit/label shape mismatch: "
                         f"{tuple(logits.shape)} vs {tuple(labels.shape)}")
    per = F.binary_cross_entropy_with_logits(logits, labels, reduction="none")
    return per.sum(dim=1).mean()


def _selected_indices(labels) -> list:
    return [i for i, v in enumerate(labels[0].tolist()) if v > 0.5]


def _generator_terms(outs: dict, disc, batch, pyramid, mask_components,
                     gan_form: str) -> dict:
    """Raw (unweighted) generator-side terms for precomputed head outputs."""
    z, labels = batch["mixed"], batch["labels"]
    names, targets = batch["names"], batch["targets"]
    zero = z.new_zeros(())
    gan = feat = recon = zero
    for i in _selected_indices(labels):
        name = names[i]
        fake, real = outs[i], targets[name]
        gan = gan + adversarial_term(disc.patch(fake), real=True, form=gan_form)
        if pyramid is not None:
            feat = feat + feature_distance(pyramid, fake, real)
        kind = "l2" if name in mask_components else "l1"
        recon = recon + recon_term(fake, real, kind)
    bce = subset_bce(disc.logits(z), labels)
    return {"gan": gan, "feat": feat, "recon": recon, "bce": bce}


def _check_batch(batch) -> None:
    if batch["mixed"].shape[0] != 1:
        raise ValueError("loss expects batch size 1")
    if batch["labels"].shape[0] != 1:
        raise ValueError("loss expects batch size 1")


def total_loss(gen, disc, batch, weights: LossWeights = LossWeights(),
               pyramid: FeaturePyramid | None = None,
               mask_components=frozenset(), gan_form: str = "lsgan"):
    """Weighted four-term objective for one sample.

    Returns (total, terms) where total is exactly
    gan*w.gan + feat*w.feat + recon*w.recon + bce*w.bce over the raw
    terms dict. Heads of absent components are never evaluated.
    """
    _check_batch(batch)
    outs = gen(batch["mixed"], _selected_indices(batch["labels"]))
    terms = _generator_terms(outs, disc, batch, pyramid, mask_components,
                             gan_form)
    total = (weights.gan * terms["gan"] + weights.feat * terms["feat"]
             + weights.recon * terms["recon"] + weights.bce * terms["bce"])
    return total, terms


def discriminator_loss(disc, batch, fake_outs: dict,
                       weights: LossWeights = LossWeights(),
                       gan_form: str = "lsgan"):
    """Adversarial real/fake terms plus the subset classifier's BCE.

    fake_outs are detached here, so nothing propagates to the generator.
    """
    _check_batch(batch)
    z, labels = batch["mixed"], batch["labels"]
    names, targets = batch["names"], batch["targets"]
    adv = z.new_zeros(())
    for i in _selected_indices(labels):
        real = targets[names[i]]
        adv = adv + adversarial_term(disc.patch(real), real=True, form=gan_form)
        adv = adv + adversarial_term(disc.patch(fake_outs[i].detach()),
                                     real=False, form=gan_form)
    bce = subset_bce(disc.logits(z), labels)
    total = adv + weights.bce * bce
    return total, {"adv": adv, "bce": bce}
