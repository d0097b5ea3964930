"""Physical imaging models for rain streak, snow, and haze.

Rain streak and snow share the occlusion composite I = J(1-m) + A*m; haze
follows Koschmieder's law I = J*t + A(1-t).  Both are the same convex
blend under m = 1 - t, and both are computed by one kernel here so that
identity holds bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import check_image

__all__ = [
    "MaskLayer",
    "TransmissionMap",
    "Atmosphere",
    "apply_mask_composite",
    "apply_haze",
    "sample_atmosphere",
]

TRAIN_A_RANGE = (0.8, 1.0)
TEST_A = 0.9
HAZE_INTENSITIES = ("light", "moderate", "heavy")


@dataclass(frozen=True)
class MaskLayer:
    """Single-channel occlusion mask in [0, 1] (rain streak or snow)."""

    mask: np.ndarray
    kind: str  # "rain-streak" | "snow"


@dataclass(frozen=True)
class TransmissionMap:
    """Single-channel transmission map in [0, 1] with an intensity tag."""

    t: np.ndarray
    intensity: str  # "light" | "moderate" | "heavy"


@dataclass(frozen=True)
class Atmosphere:
    """Global atmospheric light A in [0, 1]."""

    A: float


def _convex_blend(J: np.ndarray, m: np.ndarray, A: float) -> np.ndarray:
    """I = J(1-m) + A*m, clipped to the pointwise convex hull of (J, A)."""
    J = check_image(J, "J")
    m = np.asarray(m, dtype=np.float64)
    if m.shape[:2] != J.shape[:2]:
        raise ValueError(f"size mismatch: J {J.shape[:2]} vs layer {m.shape[:2]}")
    if J.ndim == 3 and m.ndim == 2:
        m = m[:, :, None]
    out = J * (1.0 - m) + A * m
    # round-off can leave the convex hull by an ulp; the clip makes the
    # convexity invariant exact
    return np.clip(out, np.minimum(J, A), np.maximum(J, A))


def apply_mask_composite(J: np.ndarray, m: MaskLayer, atmo: Atmosphere) -> np.ndarray:
    """Occlusion model for rain streak and snow: I = J(1-m) + A*m."""
    return _convex_blend(J, m.mask, atmo.A)


def apply_haze(J: np.ndarray, t: TransmissionMap, atmo: Atmosphere) -> np.ndarray:
    """Koschmieder's law: I = J*t + A(1-t)."""
    return _convex_blend(J, 1.0 - np.asarray(t.t, dtype=np.float64), atmo.A)


def sample_atmosphere(rng, mode: str, lo: float = TRAIN_A_RANGE[0],
                      hi: float = TRAIN_A_RANGE[1]) -> Atmosphere:
    """Uniform A in [lo, hi] when training, the fixed test value otherwise."""
    if mode == "test":
        return Atmosphere(TEST_A)
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'test', got {mode!r}")
    return Atmosphere(rng.uniform(lo, hi))
