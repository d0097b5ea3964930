"""Linear mixing: the arithmetic mean of the selected source images."""

from __future__ import annotations

import numpy as np

from .imgcore import check_image

__all__ = ["linear_mix"]


def linear_mix(images) -> np.ndarray:
    """Per-pixel mean of equally sized images.

    The accumulation order is canonicalized (per-pixel sort of offsets from
    the pointwise minimum), so the result is bit-identical under any
    permutation of the input list, mixing L copies of one image returns it
    exactly, and every output pixel stays inside the input range.
    """
    if len(images) == 0:
        raise ValueError("linear_mix needs at least one image")
    first = check_image(images[0])
    for im in images[1:]:
        if check_image(im).shape != first.shape:
            raise ValueError(
                f"image dimensions differ: {im.shape} vs {first.shape}"
            )
    if len(images) == 1:
        return first.copy()
    stack = np.stack(images, axis=0)
    lo = stack[0].copy()
    hi = stack[0].copy()
    for im in stack[1:]:
        np.minimum(lo, im, out=lo)
        np.maximum(hi, im, out=hi)
    offsets = np.sort(stack - lo, axis=0)
    mean = lo + np.add.reduce(offsets, axis=0) / len(images)
    return np.clip(mean, lo, hi)
