"""Dataset plumbing: JSONL manifests in, image tensors out, predictions
JSONL back out for the scoring harness.

Nothing here knows how the dataset was made. The manifest is the whole
contract: each line names the mixed image, the per-component ground
truth files, and the selected subset.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image

__all__ = [
    "read_manifest",
    "component_table",
    "load_image",
    "make_batch",
    "split_holdout",
    "write_predictions",
    "save_unit_image",
]

_REQUIRED = ("sample_id", "case_bits", "n_components", "components",
             "mixed", "gt_components")


def read_manifest(path) -> list:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            for key in _REQUIRED:
                if key not in rec:
                    raise ValueError(f"manifest line {ln} lacks {key!r}")
            records.append(rec)
    if not records:
        raise ValueError(f"manifest is empty: {path}")
    return records


def component_table(records) -> tuple:
    """Global index -> component name mapping, recovered from manifests.

    Each record pairs the set bits of case_bits with its selected-name
    list, so the union over records rebuilds the full ordering. Raises
    if two records disagree or some index never appears.
    """
    n = records[0]["n_components"]
    names: dict = {}
    for rec in records:
        if rec["n_components"] != n:
            raise ValueError("records disagree on n_components")
        bits = rec["case_bits"]
        indices = [i for i in range(n) if bits >> i & 1]
        if len(indices) != len(rec["components"]):
            raise ValueError(
                f"sample {rec['sample_id']}: case_bits/components mismatch")
        for i, name in zip(indices, rec["components"]):
            if names.setdefault(i, name) != name:
                raise ValueError(
                    f"component index {i} is both {names[i]!r} and {name!r}")
    missing = [i for i in range(n) if i not in names]
    if missing:
        raise ValueError(f"no record selects component index {missing[0]}; "
                         f"cannot recover its name")
    return tuple(names[i] for i in range(n))


def load_image(path) -> torch.Tensor:
    """PNG to a float32 (3, H, W) tensor in [0, 1]; grayscale is
    replicated across channels."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def _signed(x: torch.Tensor) -> torch.Tensor:
    return x * 2.0 - 1.0


def make_batch(record, root, table) -> dict:
    """One training sample as a size-1 batch in [-1, 1]."""
    root = Path(root)
    n = record["n_components"]
    labels = torch.zeros(1, n)
    bits = record["case_bits"]
    for i in range(n):
        if bits >> i & 1:
            labels[0, i] = 1.0
    targets = {name: _signed(load_image(root / rel)).unsqueeze(0)
               for name, rel in record["gt_components"].items()}
    return {
        "sample_id": record["sample_id"],
        "mixed": _signed(load_image(root / record["mixed"])).unsqueeze(0),
        "targets": targets,
        "labels": labels,
        "names": tuple(table),
    }


def split_holdout(records, fraction: float):
    """Deterministic tail split; fraction 0 holds out nothing."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"holdout fraction out of range: {fraction}")
    k = int(round(fraction * len(records)))
    if fraction > 0.0:
        k = max(1, k)
    return (records[:len(records) - k], records[len(records) - k:])


def write_predictions(path, rows) -> None:
    """rows of (sample_id, logits) to the scorer's JSON-line format."""
    with open(path, "w", encoding="utf-8") as fh:
        for sample_id, logits in rows:
            fh.write(json.dumps({"sample_id": sample_id,
                                 "logits": [float(v) for v in logits]}) + "\n")


def save_unit_image(path, tensor: torch.Tensor) -> None:
    """(3, H, W) tensor in [0, 1] to an 8-bit PNG."""
    arr = tensor.detach().clamp(0.0, 1.0).permute(1, 2, 0).numpy()
    Image.fromarray((arr * 255.0).round().astype(np.uint8)).save(path)
