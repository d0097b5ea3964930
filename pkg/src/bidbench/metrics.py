"""Scoring: PSNR, SSIM, LAB-space RMSE with shadow-region splits, source
prediction accuracy, and the per-case evaluation driver.

All metrics run on the float pipeline in [0, 1] before any quantization.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from math import fsum
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.ndimage import correlate1d

from .imgcore import _gaussian_kernel, check_image, load_image, srgb_to_lab
from .scenario import read_manifests

__all__ = [
    "SSIM_WINDOW",
    "SSIM_SIGMA",
    "psnr",
    "ssim",
    "RegionRmse",
    "rmse_lab",
    "prediction_accuracy",
    "MetricReport",
    "eval_run",
]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# BT.601 luma weights for scoring RGB pairs on a single channel
_LUMA = (0.299, 0.587, 0.114)


def _check_pair(a, b):
    a = check_image(a, "a")
    b = check_image(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.shape} vs {b.shape}")
    return a, b


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10*log10(1/MSE) on the [0, 1] scale; +inf for identical images."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _luma(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return img
    return _LUMA[0] * img[:, :, 0] + _LUMA[1] * img[:, :, 1] + _LUMA[2] * img[:, :, 2]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM, 11x11 Gaussian window with sigma 1.5, K1 = 0.01,
    K2 = 0.03, dynamic range 1.0, RGB reduced to luma first.

    Local statistics are windowed moments; only windows fully inside the
    image contribute (the map is cropped by the window radius).
    """
    a, b = _check_pair(a, b)
    ya, yb = _luma(a), _luma(b)
    h, w = ya.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"image {h}x{w} smaller than the {SSIM_WINDOW}px window")
    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    radius = SSIM_WINDOW // 2

    def wmean(x):
        t = correlate1d(x, kernel, axis=0, mode="constant", cval=0.0)
        t = correlate1d(t, kernel, axis=1, mode="constant", cval=0.0)
        return t[radius:h - radius, radius:w - radius]

    mu_a = wmean(ya)
    mu_b = wmean(yb)
    var_a = wmean(ya * ya) - mu_a * mu_a
    var_b = wmean(yb * yb) - mu_b * mu_b
    cov = wmean(ya * yb) - mu_a * mu_b
    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


class RegionRmse(NamedTuple):
    """LAB-space RMSE per region; None where the region is empty or no
    mask was supplied."""

    shadow: float | None
    non_shadow: float | None
    all: float | None


def rmse_lab(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> RegionRmse:
    """Root mean square LAB error over a region: sqrt of the mean squared
    LAB distance per pixel, so a difference of d confined to one channel
    scores exactly d.

    With a binary mask, reports the mask=1 region, the mask=0 region, and
    all pixels; without one only "all" is defined.
    """
    a, b = _check_pair(a, b)
    if a.ndim != 3:
        raise ValueError("LAB RMSE needs 3-channel images")
    d2 = np.sum((srgb_to_lab(a) - srgb_to_lab(b)) ** 2, axis=2)

    def over(sel):
        vals = d2 if sel is None else d2[sel]
        if vals.size == 0:
            return None
        return float(np.sqrt(np.mean(vals)))

    if mask is None:
        return RegionRmse(None, None, over(None))
    m = np.asarray(mask, dtype=np.float64)
    if m.shape != a.shape[:2]:
        raise ValueError("mask grid does not match the images")
    if not np.all((m == 0.0) | (m == 1.0)):
        raise ValueError("region mask must be binary")
    inside = m == 1.0
    return RegionRmse(over(inside), over(~inside), over(None))


def prediction_accuracy(preds, truths) -> float:
    """Fraction of samples whose logits, thresholded at zero, reproduce
    the ground-truth component set exactly."""
    if len(preds) != len(truths):
        raise ValueError(f"{len(preds)} predictions vs {len(truths)} truths")
    if not truths:
        raise ValueError("no samples to score")
    correct = 0
    for logits, truth in zip(preds, truths):
        if len(logits) != truth.n:
            raise ValueError(
                f"logit vector length {len(logits)} != {truth.n} components")
        bits = 0
        for i, v in enumerate(logits):
            if v > 0.0:
                bits |= 1 << i
        correct += bits == truth.bits
    return correct / len(truths)


def _mean(vals) -> float | None:
    # fsum is correctly rounded, so aggregation order never matters
    return fsum(vals) / len(vals) if vals else None


def _new_bucket() -> dict:
    return {
        "count": 0,
        "psnr": {},
        "ssim": {},
        "rmse": {"shadow": [], "non_shadow": [], "all": []},
        "correct": 0,
        "n_pred": 0,
    }


def _bucket_report(b: dict) -> dict:
    names = sorted(b["psnr"], key=lambda n: (n != "base", n))
    targets = {
        name: {
            "count": len(b["psnr"][name]),
            "psnr": _mean(b["psnr"][name]),
            "ssim": _mean(b["ssim"][name]),
        }
        for name in names
    }
    rmse = None
    if b["rmse"]["all"]:
        rmse = {
            "count": len(b["rmse"]["all"]),
            "shadow": _mean(b["rmse"]["shadow"]),
            "non_shadow": _mean(b["rmse"]["non_shadow"]),
            "all": _mean(b["rmse"]["all"]),
        }
    acc = b["correct"] / b["n_pred"] if b["n_pred"] else None
    return {"count": b["count"], "targets": targets, "rmse_lab": rmse,
            "accuracy": acc}


@dataclass
class MetricReport:
    """Per-case and aggregate scores; means over evaluated samples."""

    n_samples: int
    skip_components: tuple
    per_case: dict
    overall: dict

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "skip_components": list(self.skip_components),
            "per_case": self.per_case,
            "overall": self.overall,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(
            n_samples=d["n_samples"],
            skip_components=tuple(d["skip_components"]),
            per_case=d["per_case"],
            overall=d["overall"],
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "MetricReport":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _load_predictions(path) -> dict:
    preds = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            preds[d["sample_id"]] = [float(v) for v in d["logits"]]
    return preds


def eval_run(manifests, dataset_root, outputs_dir, *,
             predictions_path=None, skip_components=()) -> MetricReport:
    """Score method outputs against a synthesized dataset.

    Outputs live in `outputs_dir` as <sample_id>.<target>.png where the
    targets are the clean base (when the task has one) and every selected
    component not listed in `skip_components`.  A missing output raises
    with the sample named.  LAB RMSE is computed on base reconstructions,
    split by the sample's shadow mask when a component named "shadow" was
    selected.  Predictions, when given, are JSONL lines of
    {"sample_id", "logits"} scored as exact-set accuracy per case.
    """
    if isinstance(manifests, (str, Path)):
        manifests = read_manifests(manifests)
    root = Path(dataset_root)
    out = Path(outputs_dir)
    skip = set(skip_components)
    preds = None if predictions_path is None else _load_predictions(predictions_path)

    overall = _new_bucket()
    per_case: dict[str, dict] = {}
    seen = set()
    for m in manifests:
        if m.sample_id in seen:
            raise ValueError(f"duplicate sample_id {m.sample_id!r}")
        seen.add(m.sample_id)
        bucket = per_case.setdefault(m.case.letters(), _new_bucket())
        for b in (bucket, overall):
            b["count"] += 1

        shadow_mask = None
        if "shadow" in m.gt_components:
            shadow_mask = load_image(root / m.gt_components["shadow"])

        targets = []
        if m.gt_base is not None:
            targets.append(("base", m.gt_base))
        targets.extend(sorted(m.gt_components.items()))
        for name, gt_rel in targets:
            if name in skip:
                continue
            out_path = out / f"{m.sample_id}.{name}.png"
            if not out_path.exists():
                raise FileNotFoundError(
                    f"missing output for sample {m.sample_id!r}: {out_path}")
            gt = load_image(root / gt_rel)
            rec = load_image(out_path)
            if rec.shape != gt.shape:
                raise ValueError(
                    f"sample {m.sample_id!r} target {name!r}: output shape "
                    f"{rec.shape} != ground truth {gt.shape}")
            p = psnr(gt, rec)
            s = ssim(gt, rec)
            for b in (bucket, overall):
                b["psnr"].setdefault(name, []).append(p)
                b["ssim"].setdefault(name, []).append(s)
            if name == "base" and gt.ndim == 3:
                r = rmse_lab(gt, rec, mask=shadow_mask)
                for b in (bucket, overall):
                    for key, val in zip(("shadow", "non_shadow", "all"), r):
                        if val is not None:
                            b["rmse"][key].append(val)

        if preds is not None:
            if m.sample_id not in preds:
                raise ValueError(f"no prediction line for sample {m.sample_id!r}")
            logits = preds[m.sample_id]
            if len(logits) != m.n_components:
                raise ValueError(
                    f"sample {m.sample_id!r}: {len(logits)} logits for "
                    f"{m.n_components} components")
            bits = 0
            for i, v in enumerate(logits):
                if v > 0.0:
                    bits |= 1 << i
            for b in (bucket, overall):
                b["n_pred"] += 1
                b["correct"] += bits == m.case_bits

    return MetricReport(
        n_samples=overall["count"],
        skip_components=tuple(sorted(skip)),
        per_case={k: _bucket_report(per_case[k]) for k in sorted(per_case)},
        overall=_bucket_report(overall),
    )
