"""Shadow, reflection, and watermark overlays.

Each overlay consumes pre-rendered assets (masks, reflection scenes,
watermark alpha maps); this module only applies the compositing math.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import check_image, gaussian_blur
from .weather import Atmosphere, _convex_blend

__all__ = [
    "ShadowTriplet",
    "ReflectionLayer",
    "WatermarkAsset",
    "TRAIN_KERNEL_RANGE",
    "TEST_KERNEL",
    "shadow_base",
    "sample_reflection_kernel",
    "vignette_mask",
    "apply_reflection",
    "apply_watermark",
]

TRAIN_KERNEL_RANGE = (3, 17)  # odd sizes only
TEST_KERNEL = 11


@dataclass(frozen=True)
class ShadowTriplet:
    """Shadowed image, shadow-free image, and the binary shadow mask.

    The shadowed image is the mixture input itself; the other two are
    ground truth.  Products of real capture, not synthesis, so they pass
    through unchanged.
    """

    shadowed: np.ndarray
    shadow_free: np.ndarray
    mask: np.ndarray


@dataclass(frozen=True)
class ReflectionLayer:
    """Reflection scene image plus the vignette field that shapes it."""

    image: np.ndarray
    vignette: np.ndarray


@dataclass(frozen=True)
class WatermarkAsset:
    """Rendered watermark: per-pixel RGB intensity map w plus the binary
    coverage mask that reconstruction is scored against."""

    alpha: np.ndarray
    mask: np.ndarray


def shadow_base(triplet: ShadowTriplet, shadow_selected: bool):
    """Base layer for the overlay chain.

    Returns (base, gt_mask): the captured shadow image with its mask when
    the shadow component is selected, otherwise the shadow-free image with
    an all-zero mask.
    """
    img = check_image(triplet.shadowed, "shadowed")
    free = check_image(triplet.shadow_free, "shadow_free")
    if free.shape != img.shape:
        raise ValueError("shadow / shadow-free pair size mismatch")
    if triplet.mask.shape != img.shape[:2]:
        raise ValueError("shadow mask grid does not match the image")
    if shadow_selected:
        return img.copy(), triplet.mask.copy()
    return free.copy(), np.zeros_like(triplet.mask)


def sample_reflection_kernel(rng, mode: str) -> int:
    """Blur kernel size: random odd in [3, 17] for train, 11 for test."""
    if mode == "test":
        return TEST_KERNEL
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'test', got {mode!r}")
    lo, hi = TRAIN_KERNEL_RANGE
    return lo + 2 * rng.randint((hi - lo) // 2 + 1)


def vignette_mask(height: int, width: int, strength: float = 0.4) -> np.ndarray:
    """Radial falloff V = (1-s) + s*cos^2(pi/2 * d), d the distance from
    the image center normalized so the farthest corner has d = 1."""
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"strength must be in [0, 1], got {strength}")
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    cy = (height - 1) / 2.0
    cx = (width - 1) / 2.0
    d = np.hypot(ys - cy, xs - cx)
    corner = np.hypot(cy, cx)
    if corner > 0.0:
        d = d / corner
    return (1.0 - strength) + strength * np.cos(0.5 * np.pi * d) ** 2


def apply_reflection(T: np.ndarray, layer: ReflectionLayer, kernel_px: int):
    """I = clamp(T + blur(R) * V), additive reflection under a vignette.

    Returns the mixture and the contribution term blur(R) * V, the latter
    being what a decomposition target for this layer looks like.
    """
    T = check_image(T, "T")
    R = check_image(layer.image, "reflection")
    if R.shape != T.shape:
        raise ValueError("reflection scene size does not match base")
    if layer.vignette.shape != T.shape[:2]:
        raise ValueError("vignette grid does not match base")
    R_blur = gaussian_blur(R, kernel_px)
    V = layer.vignette[:, :, None] if T.ndim == 3 else layer.vignette
    contribution = R_blur * V
    return np.clip(T + contribution, 0.0, 1.0), contribution


def apply_watermark(J: np.ndarray, wm: WatermarkAsset, atmo: Atmosphere) -> np.ndarray:
    """I = J*(1-w) + A*w with the RGB watermark intensities as w."""
    J = check_image(J, "J")
    w = wm.alpha
    if w.shape != J.shape:
        raise ValueError("watermark intensity shape does not match the image")
    if wm.mask.shape != w.shape[:2]:
        raise ValueError("watermark mask is not aligned with the intensity map")
    if w.min() < 0.0 or w.max() > 1.0:
        raise ValueError("watermark intensities outside [0, 1]")
    return _convex_blend(J, w, atmo.A)
