"""Score the do-nothing baseline: hand the mixture back as the answer.

The evaluation contract expects one PNG per scoring target under
<sample_id>.<target>.png plus an optional JSONL file of component
logits.  Copying the mixed image as the "reconstruction" of the clean
base measures exactly how corrupted each case is, so the per-case PSNR
table this prints is the floor any real method has to beat.  Component
reconstructions are skipped via skip_components; the all-positive logit
file shows where exact-set prediction accuracy lands without a model.
"""

import json
import pathlib
import sys

import numpy as np

from bidbench.cli import RunConfig, run_synth
from bidbench.imgcore import load_image, save_image
from bidbench.metrics import eval_run
from bidbench.raindrop import DropConfig
from bidbench.scenario import read_manifests

OUT = pathlib.Path("demo_out/baseline")
SIZE = 96


def build_assets(root: pathlib.Path) -> dict:
    rng = np.random.default_rng(21)
    dirs = {}
    for name, maker in {
        "base": lambda: np.clip(
            0.15 + 0.7 * np.kron(rng.random((6, 6, 3)),
                                 np.ones((SIZE // 6, SIZE // 6, 1))), 0, 1),
        "rain_streak": lambda: (rng.random((SIZE, SIZE)) > 0.97) * 0.8,
        "snow": lambda: (rng.random((SIZE, SIZE)) > 0.93) * 1.0,
    }.items():
        d = root / name
        d.mkdir(parents=True, exist_ok=True)
        for i in range(5):
            save_image(maker(), d / f"{i}.png")
        dirs[name] = str(d)
    return dirs


def main() -> int:
    assets = build_assets(OUT / "assets")
    cfg = RunConfig(
        task="task2b",
        out=str(OUT / "dataset"),
        samples=40,
        assets=assets,
        size=SIZE,
        drop=DropConfig(count_range=(3, 8), radius_range=(3.0, 10.0)),
    )
    manifest = run_synth(cfg)
    ds = pathlib.Path(cfg.out)

    outputs = OUT / "outputs"
    outputs.mkdir(exist_ok=True)
    predictions = OUT / "predictions.jsonl"
    manifests = read_manifests(manifest)
    with open(predictions, "w") as fh:
        for m in manifests:
            # the baseline answer: the input itself, and "everything present"
            save_image(load_image(ds / m.mixed), outputs / f"{m.sample_id}.base.png")
            fh.write(json.dumps({"sample_id": m.sample_id,
                                 "logits": [1.0] * m.n_components}) + "\n")

    report = eval_run(manifest, ds, outputs,
                      predictions_path=predictions,
                      skip_components=("rain_streak", "snow", "raindrop"))

    print(f"\n{'case':<6} {'n':>3} {'input PSNR':>11} {'input SSIM':>11} {'acc':>5}")
    for case, scores in report.per_case.items():
        base = scores["targets"]["base"]
        print(f"{case:<6} {scores['count']:>3} {base['psnr']:>11.2f} "
              f"{base['ssim']:>11.4f} {scores['accuracy']:>5.2f}")
    overall = report.overall["targets"]["base"]
    print(f"{'all':<6} {report.n_samples:>3} {overall['psnr']:>11.2f} "
          f"{overall['ssim']:>11.4f} {report.overall['accuracy']:>5.2f}")
    print("\nheavier cases sit lower: every extra component costs input PSNR")
    return 0


if __name__ == "__main__":
    sys.exit(main())
