"""Synthesize a small weather-mixture dataset and render a contact sheet.

Everything is generated from scratch: toy scene photos, rain streak and
snow masks, and per-intensity haze maps are written as PNG assets, then
the command-line pipeline turns them into a mixed/ground-truth tree with
a JSONL manifest and a preview image.

Run from the repository root:

    python3 demos/weather_quicklook.py
"""

import pathlib
import sys

import numpy as np

from bidbench.cli import RunConfig, run_preview, run_synth
from bidbench.imgcore import save_image
from bidbench.raindrop import DropConfig
from bidbench.scenario import read_manifests

OUT = pathlib.Path("demo_out/weather")
SIZE = 96


def build_assets(root: pathlib.Path) -> dict:
    """Procedural stand-ins for the four task2a asset collections."""
    rng = np.random.default_rng(7)

    scenes = root / "scenes"
    scenes.mkdir(parents=True, exist_ok=True)
    for i in range(6):
        # coarse color blocks read as "photos" at thumbnail size
        img = np.kron(rng.random((6, 6, 3)), np.ones((SIZE // 6, SIZE // 6, 1)))
        save_image(np.clip(0.15 + 0.7 * img, 0, 1), scenes / f"scene{i}.png")

    streaks = root / "streaks"
    streaks.mkdir(exist_ok=True)
    for i in range(4):
        seeds = rng.random((SIZE, SIZE)) > 0.985
        mask = np.zeros((SIZE, SIZE))
        for k in range(6):  # smear each seed down-right into a short streak
            mask[k:, k:] = np.maximum(mask[k:, k:],
                                      seeds[:SIZE - k, :SIZE - k] * (1 - k / 6))
        save_image(mask, streaks / f"streak{i}.png")

    snow = root / "snow"
    snow.mkdir(exist_ok=True)
    for i in range(4):
        save_image((rng.random((SIZE, SIZE)) > 0.93) * 1.0, snow / f"snow{i}.png")

    for tag, level in (("light", 0.8), ("moderate", 0.55), ("heavy", 0.3)):
        d = root / "haze" / tag
        d.mkdir(parents=True, exist_ok=True)
        for i in range(2):
            t = np.clip(level + 0.06 * rng.standard_normal((SIZE, SIZE)), 0, 1)
            save_image(t, d / f"t{i}.png")

    return {"base": str(scenes), "rain_streak": str(streaks),
            "snow": str(snow), "haze": str(root / "haze")}


def main() -> int:
    assets = build_assets(OUT / "assets")
    cfg = RunConfig(
        task="task2a",
        out=str(OUT / "dataset"),
        samples=12,
        assets=assets,
        size=SIZE,
        drop=DropConfig(count_range=(3, 8), radius_range=(3.0, 10.0)),
    )
    manifest = run_synth(cfg)

    print("\ncase mix of the run:")
    for m in read_manifests(manifest):
        print(f"  {m.sample_id}  case={m.case.letters():<4} "
              f"components={','.join(m.components)}")

    sheet = OUT / "preview.png"
    run_preview(manifest, sheet, k=6)
    print(f"\npreview sheet: {sheet}")
    print("columns are mixture | clean scene | one ground truth per component")
    return 0


if __name__ == "__main__":
    sys.exit(main())
