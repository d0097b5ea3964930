"""Shared fixtures.

The toy dataset is produced by the dataset synthesizer's command-line
tool, never by importing it: this package's only contract with the
synthesizer is the manifest/PNG/predictions file formats. Tests that
need the tool skip when it is not on PATH.
"""

import json
import shutil
import subprocess

import numpy as np
import pytest
from PIL import Image

SIZE = 64


def _save(path, arr):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray((np.clip(arr, 0.0, 1.0) * 255.0).round().astype(np.uint8)
                    ).save(path)


def _smooth_scene(rng):
    """Low-frequency color ramps; visually nothing like the checkers."""
    yy, xx = np.mgrid[0:SIZE, 0:SIZE] / (SIZE - 1)
    a, b, c = rng.uniform(0.2, 0.8, size=3)
    img = np.stack([
        a * xx + (1 - a) * 0.3,
        b * yy + (1 - b) * 0.4,
        c * (xx + yy) / 2 + (1 - c) * 0.5,
    ], axis=-1)
    return img


def _checker_scene(rng):
    period = int(rng.integers(4, 9))
    phase = int(rng.integers(0, period))
    yy, xx = np.mgrid[0:SIZE, 0:SIZE]
    cells = ((yy + phase) // period + (xx + phase) // period) % 2
    hi = rng.uniform(0.7, 1.0, size=3)
    lo = rng.uniform(0.0, 0.3, size=3)
    return np.where(cells[..., None] == 1, hi, lo)


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    """Two-domain linear-mix dataset written by the synthesizer CLI."""
    tool = shutil.which("bidbench")
    if tool is None:
        pytest.skip("dataset synthesizer CLI not on PATH")
    root = tmp_path_factory.mktemp("toy")
    rng = np.random.default_rng(7)
    for i in range(6):
        _save(root / "assets/domain1" / f"{i}.png", _smooth_scene(rng))
        _save(root / "assets/domain2" / f"{i}.png", _checker_scene(rng))
    data = root / "data"
    subprocess.run(
        [tool, "synth", "--task", "task1", "--n-components", "2",
         "--out", str(data), "--samples", "240", "--size", str(SIZE),
         "--mode", "test", "--master-seed", "3",
         "--asset", f"domain1={root / 'assets/domain1'}",
         "--asset", f"domain2={root / 'assets/domain2'}"],
        check=True, capture_output=True)
    manifest = data / "manifest.jsonl"
    assert manifest.is_file()
    return {"manifest": manifest, "root": data, "n_components": 2}


@pytest.fixture()
def tiny_manifest(tmp_path):
    """Handmade two-component manifest with names the synthesizer never
    uses, so nothing downstream can get away with hardcoding."""
    rng = np.random.default_rng(0)
    records = []
    for idx, (bits, names) in enumerate(
            [(1, ["left"]), (2, ["right"]), (3, ["left", "right"])]):
        sid = f"toy-{idx:03d}"
        gt = {}
        for name in names:
            rel = f"gt/{sid}.{name}.png"
            _save(tmp_path / rel, rng.random((8, 8, 3)))
            gt[name] = rel
        mixed_rel = f"mixed/{sid}.png"
        _save(tmp_path / mixed_rel, rng.random((8, 8, 3)))
        records.append({
            "sample_id": sid, "case_bits": bits, "n_components": 2,
            "components": names, "mixed": mixed_rel, "gt_components": gt,
        })
    path = tmp_path / "manifest.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return {"path": path, "root": tmp_path, "records": records}
