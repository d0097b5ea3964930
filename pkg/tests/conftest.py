"""Shared fixtures: synthetic asset trees for every task, built once per
session at 64px so synthesis-heavy tests stay fast."""

from __future__ import annotations

import numpy as np
import pytest

from bidbench.imgcore import save_image

SIZE = 64


def _streak_mask(rng) -> np.ndarray:
    # diagonal streaks: sparse seeds smeared a few pixels down-right
    m = (rng.random((SIZE, SIZE)) > 0.97).astype(float)
    out = np.zeros_like(m)
    for k in range(4):
        out[k:, k:] = np.maximum(out[k:, k:], m[:SIZE - k, :SIZE - k] * (1 - 0.15 * k))
    return np.clip(out, 0.0, 1.0)


def _snow_mask(rng) -> np.ndarray:
    return (rng.random((SIZE, SIZE)) > 0.92).astype(float)


def _haze_map(rng, level: float) -> np.ndarray:
    return np.clip(level + 0.05 * rng.standard_normal((SIZE, SIZE)), 0.0, 1.0)


def _scene(rng) -> np.ndarray:
    # smooth-ish scene with structure, away from pure black/white
    base = rng.random((8, 8, 3))
    img = np.kron(base, np.ones((8, 8, 1)))
    img += 0.1 * rng.standard_normal((SIZE, SIZE, 3))
    return np.clip(0.1 + 0.8 * img, 0.0, 1.0)


@pytest.fixture(scope="session")
def asset_root(tmp_path_factory):
    """Directory tree with assets for task1 (3 domains), task2a/b, task3."""
    root = tmp_path_factory.mktemp("assets")
    rng = np.random.default_rng(20240817)

    for k in (1, 2, 3):
        d = root / f"domain{k}"
        d.mkdir()
        for i in range(4):
            save_image(_scene(rng), d / f"{i:03d}.png")

    (root / "base").mkdir()
    for i in range(5):
        save_image(_scene(rng), root / "base" / f"{i:03d}.png")
    (root / "rain_streak").mkdir()
    for i in range(4):
        save_image(_streak_mask(rng), root / "rain_streak" / f"{i:03d}.png")
    (root / "snow").mkdir()
    for i in range(4):
        save_image(_snow_mask(rng), root / "snow" / f"{i:03d}.png")
    for tag, level in (("light", 0.8), ("moderate", 0.55), ("heavy", 0.3)):
        d = root / "haze" / tag
        d.mkdir(parents=True)
        for i in range(3):
            save_image(_haze_map(rng, level), d / f"{i:03d}.png")

    for sub in ("shadowed", "shadow_free", "mask"):
        (root / "shadow" / sub).mkdir(parents=True)
    for i in range(4):
        free = _scene(rng)
        mask = np.zeros((SIZE, SIZE))
        y, x = rng.integers(4, 28, size=2)
        mask[y:y + 24, x:x + 24] = 1.0
        shadowed = np.clip(free * np.where(mask[:, :, None] > 0, 0.45, 1.0), 0, 1)
        name = f"{i:03d}.png"
        save_image(shadowed, root / "shadow" / "shadowed" / name)
        save_image(free, root / "shadow" / "shadow_free" / name)
        save_image(mask, root / "shadow" / "mask" / name)

    (root / "reflection").mkdir()
    for i in range(4):
        save_image(_scene(rng) * 0.6, root / "reflection" / f"{i:03d}.png")

    (root / "watermark" / "image").mkdir(parents=True)
    (root / "watermark" / "mask").mkdir(parents=True)
    for i in range(3):
        mask = np.zeros((SIZE, SIZE))
        mask[12 + 4 * i:40 + 4 * i, 16:52] = 1.0
        wm = np.stack([mask * 0.7, mask * 0.7, mask * 0.9], axis=2)
        name = f"{i:03d}.png"
        save_image(wm, root / "watermark" / "image" / name)
        save_image(mask, root / "watermark" / "mask" / name)

    return root


def asset_map(root, task: str) -> dict:
    """Asset-directory config for a task, pointing into asset_root."""
    if task == "task1":
        return {f"domain{k}": str(root / f"domain{k}") for k in (1, 2, 3)}
    if task == "task2a":
        return {"base": str(root / "base"),
                "rain_streak": str(root / "rain_streak"),
                "snow": str(root / "snow"),
                "haze": str(root / "haze")}
    if task == "task2b":
        return {"base": str(root / "base"),
                "rain_streak": str(root / "rain_streak"),
                "snow": str(root / "snow")}
    if task == "task3":
        return {"shadow": str(root / "shadow"),
                "reflection": str(root / "reflection"),
                "watermark": str(root / "watermark")}
    raise ValueError(task)


# raindrop geometry scaled down to the 64px fixtures
DROP_KW = {"count_range": (2, 6), "radius_range": (2.0, 8.0)}
