"""PNG exactness, LAB conversion against a reference implementation, blur
and resampling against dense loop oracles, augmentation draw order."""

import numpy as np
import pytest
from PIL import Image
from skimage.color import lab2rgb, rgb2lab

from bidbench.imgcore import (
    AUGMENT_CROP_SIZE,
    AUGMENT_LOAD_SIZE,
    augment,
    bilinear_sample,
    gaussian_blur,
    load_image,
    resize_bilinear,
    save_image,
    sigma_for_kernel,
    srgb_to_lab,
)
from bidbench.streams import Stream


# ---------------------------------------------------------------------------
# PNG I/O

def test_quantization_bytes(tmp_path):
    img = np.array([[0.0, 0.5, 1.0]])
    save_image(img, tmp_path / "q.png")
    with Image.open(tmp_path / "q.png") as im:
        data = np.asarray(im)
    assert data.tolist() == [[0, 128, 255]]


def test_load_is_byte_over_255(tmp_path):
    data = np.arange(256, dtype=np.uint8).reshape(16, 16)
    Image.fromarray(data, mode="L").save(tmp_path / "g.png")
    img = load_image(tmp_path / "g.png")
    assert img.dtype == np.float64
    np.testing.assert_array_equal(img, data / 255.0)


def test_round_trip_error_bound(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.random((9, 7, 3))
    save_image(img, tmp_path / "r.png")
    back = load_image(tmp_path / "r.png")
    assert np.abs(back - img).max() <= 0.5 / 255.0 + 1e-12


def test_byte_aligned_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, size=(12, 5, 3), dtype=np.uint8) / 255.0
    save_image(img, tmp_path / "e.png")
    np.testing.assert_array_equal(load_image(tmp_path / "e.png"), img)


def test_save_clips_out_of_range(tmp_path):
    save_image(np.array([[-0.2, 1.7]]), tmp_path / "c.png")
    np.testing.assert_array_equal(load_image(tmp_path / "c.png"), [[0.0, 1.0]])


def test_load_rejects_non_png(tmp_path):
    Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(tmp_path / "x.jpg")
    with pytest.raises(ValueError, match="not a PNG"):
        load_image(tmp_path / "x.jpg")


def test_load_rejects_palette_mode(tmp_path):
    im = Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).convert("P")
    im.save(tmp_path / "p.png")
    with pytest.raises(ValueError, match="mode"):
        load_image(tmp_path / "p.png")


def test_rgb_shape_round_trip(tmp_path):
    img = np.zeros((6, 8, 3))
    save_image(img, tmp_path / "s.png")
    assert load_image(tmp_path / "s.png").shape == (6, 8, 3)


# ---------------------------------------------------------------------------
# sRGB -> LAB

def test_lab_black_is_origin():
    lab = srgb_to_lab(np.zeros((2, 2, 3)))
    np.testing.assert_allclose(lab, 0.0, atol=1e-12)


def test_lab_white_point():
    lab = srgb_to_lab(np.ones((1, 1, 3)))
    assert lab[0, 0, 0] == pytest.approx(100.0, abs=1e-9)
    assert abs(lab[0, 0, 1]) < 5e-3
    assert abs(lab[0, 0, 2]) < 5e-3


def test_lab_matches_reference_library():
    rng = np.random.default_rng(3)
    img = rng.random((16, 16, 3))
    ours = srgb_to_lab(img)
    ref = rgb2lab(img)
    assert np.abs(ours - ref).max() < 1e-3


def test_lab_linear_branch_matches_reference():
    img = np.full((2, 2, 3), 0.003)  # below the 0.04045 gamma knee
    np.testing.assert_allclose(srgb_to_lab(img), rgb2lab(img), atol=1e-3)


def test_lab_inverse_round_trip():
    rng = np.random.default_rng(4)
    img = rng.random((8, 8, 3))
    back = lab2rgb(srgb_to_lab(img))
    assert np.abs(back - img).max() < 1e-4


def test_lab_rejects_gray():
    with pytest.raises(ValueError):
        srgb_to_lab(np.zeros((4, 4)))


# ---------------------------------------------------------------------------
# Gaussian blur

def _blur_ref(img, kernel_px, sigma):
    # dense clamp-to-edge convolution, no separability shortcut
    half = kernel_px // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    k1 = np.exp(-(xs**2) / (2 * sigma * sigma))
    k1 /= k1.sum()
    k2 = np.outer(k1, k1)
    h, w = img.shape
    out = np.zeros_like(img)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in range(-half, half + 1):
                for dx in range(-half, half + 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    acc += k2[dy + half, dx + half] * img[yy, xx]
            out[y, x] = acc
    return np.clip(out, 0.0, 1.0)


def test_blur_matches_dense_oracle():
    rng = np.random.default_rng(5)
    img = rng.random((12, 13))
    for k in (3, 5, 11):
        got = gaussian_blur(img, k)
        want = _blur_ref(img, k, sigma_for_kernel(k))
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_blur_kernel_one_is_copy():
    img = np.random.default_rng(6).random((5, 5))
    out = gaussian_blur(img, 1)
    np.testing.assert_array_equal(out, img)
    assert out is not img


def test_blur_preserves_constants():
    img = np.full((10, 10), 0.37)
    np.testing.assert_allclose(gaussian_blur(img, 7), 0.37, atol=1e-12)


def test_blur_impulse_mass_is_one():
    img = np.zeros((15, 15))
    img[7, 7] = 1.0
    assert gaussian_blur(img, 5).sum() == pytest.approx(1.0, abs=1e-12)


def test_blur_rgb_is_per_channel():
    rng = np.random.default_rng(7)
    img = rng.random((9, 9, 3))
    got = gaussian_blur(img, 5)
    for c in range(3):
        np.testing.assert_array_equal(got[:, :, c], gaussian_blur(img[:, :, c], 5))


def test_blur_rejects_even_kernel():
    with pytest.raises(ValueError):
        gaussian_blur(np.zeros((4, 4)), 4)
    with pytest.raises(ValueError):
        gaussian_blur(np.zeros((4, 4)), 3, sigma=0.0)


def test_sigma_rule():
    assert sigma_for_kernel(3) == pytest.approx(0.8)
    assert sigma_for_kernel(11) == pytest.approx(2.0)


# ---------------------------------------------------------------------------
# Sampling / resize

def test_bilinear_sample_integer_coords():
    rng = np.random.default_rng(8)
    img = rng.random((6, 7))
    xs, ys = np.meshgrid(np.arange(7.0), np.arange(6.0))
    np.testing.assert_array_equal(bilinear_sample(img, xs, ys), img)


def test_bilinear_sample_midpoint():
    img = np.array([[0.0, 1.0]])
    assert bilinear_sample(img, np.array([0.5]), np.array([0.0]))[0] == 0.5


def test_bilinear_sample_clamps():
    img = np.array([[0.2, 0.8]])
    out = bilinear_sample(img, np.array([-3.0, 10.0]), np.array([0.0, 0.0]))
    np.testing.assert_array_equal(out, [0.2, 0.8])


def test_resize_same_size_is_identity():
    rng = np.random.default_rng(9)
    img = rng.random((11, 13, 3))
    np.testing.assert_array_equal(resize_bilinear(img, 11, 13), img)


def test_resize_constant():
    img = np.full((8, 8), 0.42)
    np.testing.assert_allclose(resize_bilinear(img, 5, 3), 0.42, atol=1e-12)


def test_resize_matches_manual_coordinates():
    rng = np.random.default_rng(10)
    img = rng.random((4, 4))
    out = resize_bilinear(img, 2, 2)
    # out[0,0] samples source (0.5, 0.5): mean of the top-left 2x2 block
    assert out[0, 0] == pytest.approx(img[:2, :2].mean(), abs=1e-12)


# ---------------------------------------------------------------------------
# Augmentation

class _Script:
    """Stand-in stream replaying scripted draws and recording call order."""

    def __init__(self, ints, reals):
        self.ints = list(ints)
        self.reals = list(reals)
        self.calls = []

    def randint(self, n):
        self.calls.append(("randint", n))
        return self.ints.pop(0)

    def random(self):
        self.calls.append(("random",))
        return self.reals.pop(0)


def test_augment_shape_and_determinism():
    rng = np.random.default_rng(11)
    img = rng.random((300, 200, 3))
    a = augment(img, Stream(5))
    b = augment(img, Stream(5))
    assert a.shape == (AUGMENT_CROP_SIZE, AUGMENT_CROP_SIZE, 3)
    np.testing.assert_array_equal(a, b)


def test_augment_draw_order_and_crop():
    rng = np.random.default_rng(12)
    img = rng.random((280, 280))
    script = _Script(ints=[3, 5], reals=[0.7])
    out = augment(img, script)
    span = AUGMENT_LOAD_SIZE - AUGMENT_CROP_SIZE + 1
    assert script.calls == [("randint", span), ("randint", span), ("random",)]
    resized = resize_bilinear(img, AUGMENT_LOAD_SIZE, AUGMENT_LOAD_SIZE)
    np.testing.assert_array_equal(out, resized[5:5 + 256, 3:3 + 256])


def test_augment_flip_branch():
    rng = np.random.default_rng(13)
    img = rng.random((280, 280))
    plain = augment(img, _Script(ints=[0, 0], reals=[0.5]))   # 0.5 is not < 0.5
    flipped = augment(img, _Script(ints=[0, 0], reals=[0.49]))
    np.testing.assert_array_equal(flipped, plain[:, ::-1])
