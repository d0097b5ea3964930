"""Image representation, PNG I/O, color conversion, and augmentation.

Pixel convention used across the whole package: images are float64 numpy
arrays in [0, 1], shaped (H, W) for single-channel and (H, W, 3) for RGB,
row-major.  Every operation here is pure and clips its result back into
[0, 1] where floating-point round-off could leak outside.

LAB images are (H, W, 3) float arrays holding L in [0, 100] and unbounded
a/b, produced by ``srgb_to_lab`` (sRGB, D65 white point).
"""

from __future__ import annotations

import numpy as np
from PIL import Image
from scipy.ndimage import convolve1d

__all__ = [
    "load_image",
    "save_image",
    "srgb_to_lab",
    "gaussian_blur",
    "sigma_for_kernel",
    "resize_bilinear",
    "bilinear_sample",
    "augment",
    "check_image",
]

AUGMENT_LOAD_SIZE = 286
AUGMENT_CROP_SIZE = 256


def check_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    """Validate the (H, W[, 3]) float-in-[0,1] convention, returning img."""
    a = np.asarray(img)
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] != 3):
        raise ValueError(f"{name}: expected (H, W) or (H, W, 3), got {a.shape}")
    if a.size == 0:
        raise ValueError(f"{name}: empty image")
    return a


def load_image(path) -> np.ndarray:
    """Read an 8-bit PNG (gray or RGB) as floats, exactly byte/255."""
    with Image.open(path) as im:
        if im.format != "PNG":
            raise ValueError(f"{path}: not a PNG file (format={im.format})")
        if im.mode not in ("L", "RGB"):
            raise ValueError(
                f"{path}: unsupported mode {im.mode!r}; need 8-bit L or RGB"
            )
        data = np.asarray(im, dtype=np.uint8)
    return data.astype(np.float64) / 255.0


def save_image(img: np.ndarray, path) -> None:
    """Write an 8-bit PNG; quantization is round-half-to-even on s*255."""
    img = check_image(img)
    # np.rint rounds halves to even, so 0.5 -> 128 and the byte->float->byte
    # round trip is bit-identical.
    data = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    mode = "L" if data.ndim == 2 else "RGB"
    Image.fromarray(data, mode=mode).save(path, format="PNG")


# ---------------------------------------------------------------------------
# sRGB -> CIELAB (D65)

_RGB_TO_XYZ = np.array(
    [
        [0.412453, 0.357580, 0.180423],
        [0.212671, 0.715160, 0.072169],
        [0.019334, 0.119193, 0.950227],
    ]
)
_D65 = np.array([0.95047, 1.0, 1.08883])


def srgb_to_lab(img: np.ndarray) -> np.ndarray:
    """Convert an RGB image to CIELAB via linear RGB and XYZ (D65)."""
    img = check_image(img)
    if img.ndim != 3:
        raise ValueError("srgb_to_lab needs a 3-channel image")
    srgb = np.clip(img, 0.0, 1.0)
    linear = np.where(
        srgb > 0.04045, ((srgb + 0.055) / 1.055) ** 2.4, srgb / 12.92
    )
    xyz = linear @ _RGB_TO_XYZ.T
    xyz_n = xyz / _D65
    # f(t) with the standard 6/29 cube-root / linear split
    eps = (6.0 / 29.0) ** 3
    f = np.where(
        xyz_n > eps, np.cbrt(xyz_n), xyz_n / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0
    )
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


# ---------------------------------------------------------------------------
# Blur / resize / augmentation

def sigma_for_kernel(kernel_px: int) -> float:
    """Default Gaussian sigma for a kernel size (the common k->sigma rule)."""
    return 0.3 * ((kernel_px - 1) * 0.5 - 1.0) + 0.8


def _gaussian_kernel(kernel_px: int, sigma: float) -> np.ndarray:
    half = (kernel_px - 1) // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(xs**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: np.ndarray, kernel_px: int, sigma: float | None = None) -> np.ndarray:
    """Separable Gaussian convolution with clamp-to-edge borders."""
    img = check_image(img)
    if kernel_px < 1 or kernel_px % 2 == 0:
        raise ValueError(f"kernel_px must be odd and >= 1, got {kernel_px}")
    if kernel_px == 1:
        return img.copy()
    if sigma is None:
        sigma = sigma_for_kernel(kernel_px)
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    k = _gaussian_kernel(kernel_px, sigma)
    out = convolve1d(img, k, axis=0, mode="nearest")
    out = convolve1d(out, k, axis=1, mode="nearest")
    return np.clip(out, 0.0, 1.0)


def bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample img at float coordinates (xs, ys), clamped at the borders.

    xs indexes columns, ys rows; both arrays share a shape and the result
    has that shape (plus the channel axis for RGB input).
    """
    img = check_image(img)
    h, w = img.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel-centered source coordinates."""
    img = check_image(img)
    h, w = img.shape[:2]
    sx = w / out_w
    sy = h / out_h
    xs = (np.arange(out_w) + 0.5) * sx - 0.5
    ys = (np.arange(out_h) + 0.5) * sy - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return np.clip(bilinear_sample(img, gx, gy), 0.0, 1.0)


def augment(img: np.ndarray, rng) -> np.ndarray:
    """Training-time augmentation: resize to 286, random 256 crop, random flip.

    Draw order on the stream is fixed (crop x, crop y, flip) so augmented
    datasets regenerate identically.
    """
    img = check_image(img)
    resized = resize_bilinear(img, AUGMENT_LOAD_SIZE, AUGMENT_LOAD_SIZE)
    span = AUGMENT_LOAD_SIZE - AUGMENT_CROP_SIZE + 1
    ox = rng.randint(span)
    oy = rng.randint(span)
    crop = resized[oy : oy + AUGMENT_CROP_SIZE, ox : ox + AUGMENT_CROP_SIZE]
    if rng.random() < 0.5:
        crop = crop[:, ::-1]
    return np.ascontiguousarray(crop)
