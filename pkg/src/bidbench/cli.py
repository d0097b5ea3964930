"""Command-line front end: dataset synthesis, case enumeration, method
scoring, and preview sheets.

Configuration comes from an optional JSON file with flag overrides; the
flag wins wherever both are given.  Exit codes: 0 success, 1 usage,
2 asset problems, 3 I/O failures.  BIDBENCH_THREADS caps the worker
count; parallelism never changes output bytes.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .imgcore import load_image, resize_bilinear, save_image
from .metrics import eval_run
from .overlay import ShadowTriplet, WatermarkAsset
from .raindrop import DropConfig
from .scenario import (
    MixManifest,
    SelectionPolicy,
    compose,
    derive_stream,
    enumerate_cases,
    read_manifests,
    sample_case,
    task_policy,
    write_manifests,
)
from .weather import HAZE_INTENSITIES, TransmissionMap

__all__ = [
    "RunConfig",
    "run_synth",
    "run_enumerate",
    "run_eval",
    "run_preview",
    "main",
]

log = logging.getLogger("bidbench")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ASSET = 2
EXIT_IO = 3

# per-sample stream lanes; the split keeps draw sequences independent so
# adding draws to one stage never shifts another stage's values
LANE_CASE = 0
LANE_ASSET = 1
LANE_PARAMS = 2
LANE_DROPS = 3


class CliError(Exception):
    """Failure with a chosen process exit code."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    """One synthesis run: task, sources, sampling controls, output root."""

    task: str
    out: str
    samples: int
    assets: dict
    master_seed: int = 0
    mode: str = "test"
    size: int = 256
    n_components: int = 0
    probs: tuple | None = None
    vignette_strength: float = 0.4
    drop: DropConfig = field(default_factory=DropConfig)
    workers: int | None = None


def _build_policy(cfg: RunConfig) -> SelectionPolicy:
    try:
        policy = task_policy(cfg.task, cfg.n_components)
    except ValueError as e:
        raise CliError(EXIT_USAGE, str(e))
    if cfg.probs is None:
        return policy
    if len(cfg.probs) != policy.n:
        raise CliError(EXIT_USAGE,
                       f"{len(cfg.probs)} probabilities for {policy.n} components")
    comps = tuple(replace(c, selection_prob=p)
                  for c, p in zip(policy.components, cfg.probs))
    try:
        return SelectionPolicy(comps, policy.mixing_order)
    except ValueError as e:
        raise CliError(EXIT_USAGE, str(e))


def _list_pngs(directory: Path) -> list[Path]:
    if not directory.is_dir():
        raise CliError(EXIT_ASSET, f"asset directory not found: {directory}")
    files = sorted(directory.glob("*.png"))
    if not files:
        raise CliError(EXIT_ASSET, f"no PNG files in {directory}")
    return files


def _matched_sets(dirs: list[Path]) -> list[tuple[Path, ...]]:
    """Parallel folders paired by identical filenames."""
    by_dir = [{p.name: p for p in _list_pngs(d)} for d in dirs]
    names = set(by_dir[0])
    for d, entries in zip(dirs, by_dir):
        if set(entries) != names:
            raise CliError(EXIT_ASSET,
                           f"{d} does not mirror {dirs[0]} file for file")
    return [tuple(entries[n] for entries in by_dir) for n in sorted(names)]


@dataclass
class _Runtime:
    cfg: RunConfig
    policy: SelectionPolicy
    files: dict


def _prepare(cfg: RunConfig) -> _Runtime:
    policy = _build_policy(cfg)
    if cfg.samples < 1:
        raise CliError(EXIT_USAGE, f"sample count must be >= 1, got {cfg.samples}")
    if cfg.mode not in ("train", "test"):
        raise CliError(EXIT_USAGE, f"mode must be train or test, got {cfg.mode!r}")
    if cfg.size < 32:
        raise CliError(EXIT_USAGE, f"size must be >= 32, got {cfg.size}")

    kinds = {c.kind for c in policy.components}
    needs_base = "shadow-pair" not in kinds and kinds != {"image-domain"}
    files: dict = {}

    def asset_dir(name: str) -> Path:
        if name not in cfg.assets:
            raise CliError(EXIT_ASSET, f"no asset directory configured for {name!r}")
        return Path(cfg.assets[name])

    if needs_base:
        files["base"] = _list_pngs(asset_dir("base"))
    for comp in policy.components:
        d = None if comp.kind == "raindrop" else asset_dir(comp.name)
        if comp.kind in ("image-domain", "rain-streak-mask", "snow-mask",
                         "reflection-layer"):
            files[comp.name] = _list_pngs(d)
        elif comp.kind == "haze-transmission":
            files[comp.name] = {tag: _list_pngs(d / tag) for tag in HAZE_INTENSITIES}
        elif comp.kind == "shadow-pair":
            files[comp.name] = _matched_sets(
                [d / "shadowed", d / "shadow_free", d / "mask"])
        elif comp.kind == "watermark":
            files[comp.name] = _matched_sets([d / "image", d / "mask"])
    return _Runtime(cfg=cfg, policy=policy, files=files)


def _fit(img: np.ndarray, size: int) -> np.ndarray:
    if img.shape[:2] == (size, size):
        return img
    return resize_bilinear(img, size, size)


def _load_rgb(path: Path, size: int) -> np.ndarray:
    try:
        img = load_image(path)
    except (OSError, ValueError) as e:
        raise CliError(EXIT_ASSET, f"{path}: {e}")
    if img.ndim == 2:
        img = np.stack([img, img, img], axis=2)
    return _fit(img, size)


def _load_gray(path: Path, size: int, binary: bool = False) -> np.ndarray:
    try:
        img = load_image(path)
    except (OSError, ValueError) as e:
        raise CliError(EXIT_ASSET, f"{path}: {e}")
    if img.ndim != 2:
        raise CliError(EXIT_ASSET, f"{path}: mask assets must be grayscale")
    img = _fit(img, size)
    if binary:
        img = (img > 0.5).astype(np.float64)
    return img


def synth_sample(rt: _Runtime, index: int):
    """Generate one sample in memory; pure in (config, assets, index).

    Asset files are drawn on the asset lane in a fixed order: the scene
    (base image or shadow triplet) first, then selected components by
    index.  Returns (case, ComposeResult, asset record for the manifest).
    """
    cfg = rt.cfg
    case = sample_case(rt.policy, derive_stream(cfg.master_seed, index, LANE_CASE))
    asset_rng = derive_stream(cfg.master_seed, index, LANE_ASSET)
    assets: dict = {}
    record: dict = {}

    if "base" in rt.files:
        pick = rt.files["base"][asset_rng.randint(len(rt.files["base"]))]
        assets["base"] = _load_rgb(pick, cfg.size)
        record["base"] = pick.name
    shadow = next((c for c in rt.policy.components if c.kind == "shadow-pair"), None)
    if shadow is not None:
        trip = rt.files[shadow.name][asset_rng.randint(len(rt.files[shadow.name]))]
        assets[shadow.name] = ShadowTriplet(
            shadowed=_load_rgb(trip[0], cfg.size),
            shadow_free=_load_rgb(trip[1], cfg.size),
            mask=_load_gray(trip[2], cfg.size, binary=True),
        )
        record[shadow.name] = trip[0].name

    for comp in rt.policy.components:
        if not case.contains(comp.index) or comp.kind in ("raindrop", "shadow-pair"):
            continue
        if comp.kind == "haze-transmission":
            tag = HAZE_INTENSITIES[asset_rng.randint(len(HAZE_INTENSITIES))]
            choices = rt.files[comp.name][tag]
            pick = choices[asset_rng.randint(len(choices))]
            assets[comp.name] = TransmissionMap(
                t=_load_gray(pick, cfg.size), intensity=tag)
            record[comp.name] = {"intensity": tag, "file": pick.name}
        elif comp.kind == "watermark":
            pair = rt.files[comp.name][asset_rng.randint(len(rt.files[comp.name]))]
            assets[comp.name] = WatermarkAsset(
                alpha=_load_rgb(pair[0], cfg.size),
                mask=_load_gray(pair[1], cfg.size, binary=True),
            )
            record[comp.name] = pair[0].name
        else:
            pick = rt.files[comp.name][asset_rng.randint(len(rt.files[comp.name]))]
            if comp.kind in ("rain-streak-mask", "snow-mask"):
                assets[comp.name] = _load_gray(pick, cfg.size)
            else:
                assets[comp.name] = _load_rgb(pick, cfg.size)
            record[comp.name] = pick.name

    result = compose(
        case, assets, rt.policy,
        derive_stream(cfg.master_seed, index, LANE_PARAMS),
        mode=cfg.mode,
        drop_rng=derive_stream(cfg.master_seed, index, LANE_DROPS),
        drop_cfg=cfg.drop,
        vignette_strength=cfg.vignette_strength,
    )
    return case, result, record


def _write_sample(rt: _Runtime, index: int, case, result, record) -> MixManifest:
    cfg = rt.cfg
    out = Path(cfg.out)
    sid = f"{cfg.task}-{cfg.mode}-{index:06d}"
    mixed_rel = f"mixed/{sid}.png"
    save_image(result.mixed, out / mixed_rel)
    gt_base_rel = None
    if result.gt_base is not None:
        gt_base_rel = f"gt/{sid}.base.png"
        save_image(result.gt_base, out / gt_base_rel)
    gt_rels = {}
    for name, arr in result.gts.items():
        gt_rels[name] = f"gt/{sid}.{name}.png"
        save_image(arr, out / gt_rels[name])
    return MixManifest(
        sample_id=sid,
        index=index,
        master_seed=cfg.master_seed,
        task=cfg.task,
        mode=cfg.mode,
        n_components=rt.policy.n,
        case_bits=case.bits,
        components=tuple(rt.policy.component(i).name for i in case.indices()),
        params=result.params,
        mixed=mixed_rel,
        gt_base=gt_base_rel,
        gt_components=gt_rels,
        assets=record,
    )


def _worker_count(cfg: RunConfig) -> int:
    workers = cfg.workers if cfg.workers else min(8, os.cpu_count() or 1)
    cap = os.environ.get("BIDBENCH_THREADS")
    if cap is not None:
        try:
            workers = min(workers, int(cap))
        except ValueError:
            raise CliError(EXIT_USAGE, f"BIDBENCH_THREADS={cap!r} is not an integer")
    return max(1, workers)


def run_synth(cfg: RunConfig) -> Path:
    """Synthesize the dataset; returns the manifest path.

    Samples are generated on a thread pool but the manifest is assembled
    in index order, so any worker count yields identical bytes.
    """
    rt = _prepare(cfg)
    out = Path(cfg.out)
    try:
        (out / "mixed").mkdir(parents=True, exist_ok=True)
        (out / "gt").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError(EXIT_IO, f"cannot create output tree: {e}")

    def one(index: int) -> MixManifest:
        case, result, record = synth_sample(rt, index)
        return _write_sample(rt, index, case, result, record)

    workers = _worker_count(cfg)
    if workers == 1:
        manifests = [one(i) for i in range(cfg.samples)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            manifests = list(pool.map(one, range(cfg.samples)))
    manifest_path = out / "manifest.jsonl"
    write_manifests(manifest_path, manifests)
    log.info("wrote %d samples to %s", len(manifests), out)
    return manifest_path


def run_enumerate(n: int, stream=None) -> int:
    """Print the case table; returns the number of rows."""
    stream = stream if stream is not None else sys.stdout
    try:
        cases = enumerate_cases(n)
    except ValueError as e:
        raise CliError(EXIT_USAGE, str(e))
    for row, case in enumerate(cases, start=1):
        bits = format(case.bits, f"0{n}b")
        print(f"{row:>5}  {case.letters():<{n}}  {bits}  L={case.popcount}",
              file=stream)
    return len(cases)


def run_eval(manifest_path, outputs_dir, report_path, *, dataset_root=None,
             predictions_path=None, skip_components=()):
    root = Path(dataset_root) if dataset_root else Path(manifest_path).parent
    try:
        report = eval_run(manifest_path, root, outputs_dir,
                          predictions_path=predictions_path,
                          skip_components=skip_components)
    except FileNotFoundError as e:
        raise CliError(EXIT_ASSET, str(e))
    except ValueError as e:
        raise CliError(EXIT_ASSET, str(e))
    report.save(report_path)
    log.info("scored %d samples into %s", report.n_samples, report_path)
    return report


def run_preview(manifest_path, out_path, *, k: int = 4, dataset_root=None) -> Path:
    """Contact sheet: one row per sample (by sample_id order), columns
    mixed | base | per-component ground truths; width is 1 + L_max tiles."""
    if k < 1:
        raise CliError(EXIT_USAGE, f"preview needs k >= 1, got {k}")
    root = Path(dataset_root) if dataset_root else Path(manifest_path).parent
    manifests = sorted(read_manifests(manifest_path), key=lambda m: m.sample_id)
    if not manifests:
        raise CliError(EXIT_ASSET, f"no samples in {manifest_path}")
    chosen = manifests[:k]

    def tiles(m: MixManifest):
        row = [load_image(root / m.mixed)]
        if m.gt_base is not None:
            row.append(load_image(root / m.gt_base))
        row.extend(load_image(root / m.gt_components[name]) for name in m.components)
        return row

    rows = [tiles(m) for m in chosen]
    width = max(len(r) for r in rows)
    th, tw = rows[0][0].shape[:2]
    sheet = np.zeros((len(rows) * th, width * tw, 3))
    for i, row in enumerate(rows):
        for j, tile in enumerate(row):
            if tile.ndim == 2:
                tile = np.stack([tile, tile, tile], axis=2)
            if tile.shape != (th, tw, 3):
                raise CliError(EXIT_ASSET,
                               f"tile size {tile.shape} breaks the sheet grid")
            sheet[i * th:(i + 1) * th, j * tw:(j + 1) * tw] = tile
    save_image(sheet, out_path)
    return Path(out_path)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, message)


def _parse_assets(pairs) -> dict:
    assets = {}
    for spec in pairs or ():
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise CliError(EXIT_USAGE, f"expected NAME=PATH, got {spec!r}")
        assets[name] = path
    return assets


def _synth_config(args) -> RunConfig:
    data = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as e:
            raise CliError(EXIT_USAGE, f"cannot read config: {e}")
        except json.JSONDecodeError as e:
            raise CliError(EXIT_USAGE, f"config is not valid JSON: {e}")
    assets = dict(data.get("assets", {}))
    assets.update(_parse_assets(args.asset))

    def pick(flag, key, default):
        return flag if flag is not None else data.get(key, default)

    task = pick(args.task, "task", None)
    out = pick(args.out, "out", None)
    samples = pick(args.samples, "samples", None)
    if task is None or out is None or samples is None:
        raise CliError(EXIT_USAGE, "synth needs task, out, and samples")
    drop_cfg = DropConfig()
    if "drop" in data:
        d = data["drop"]
        try:
            drop_cfg = DropConfig(
                count_range=tuple(d.get("count_range", drop_cfg.count_range)),
                radius_range=tuple(d.get("radius_range", drop_cfg.radius_range)),
                time_steps=d.get("time_steps", drop_cfg.time_steps),
                velocity_k=d.get("velocity_k", drop_cfg.velocity_k),
                gain_base=d.get("gain_base", drop_cfg.gain_base),
            )
        except (TypeError, ValueError) as e:
            raise CliError(EXIT_USAGE, f"bad drop config: {e}")
    probs = data.get("probs")
    return RunConfig(
        task=task,
        out=out,
        samples=int(samples),
        assets=assets,
        master_seed=pick(args.master_seed, "master_seed", 0),
        mode=pick(args.mode, "mode", "test"),
        size=pick(args.size, "size", 256),
        n_components=pick(args.n_components, "n_components", 0),
        probs=None if probs is None else tuple(probs),
        vignette_strength=data.get("vignette_strength", 0.4),
        drop=drop_cfg,
        workers=args.workers,
    )


def _build_parser() -> _Parser:
    parser = _Parser(prog="bidbench",
                     description="Mixed-image dataset synthesis and scoring")
    sub = parser.add_subparsers(dest="cmd")

    p = sub.add_parser("synth", help="generate a dataset")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--task", choices=("task1", "task2a", "task2b", "task3"))
    p.add_argument("--out")
    p.add_argument("--samples", type=int)
    p.add_argument("--master-seed", type=int, dest="master_seed")
    p.add_argument("--mode", choices=("train", "test"))
    p.add_argument("--size", type=int)
    p.add_argument("--n-components", type=int, dest="n_components")
    p.add_argument("--asset", action="append", metavar="NAME=PATH")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("enumerate", help="list all cases for n components")
    p.add_argument("n", type=int)

    p = sub.add_parser("eval", help="score method outputs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--outputs", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--dataset-root", dest="dataset_root")
    p.add_argument("--predictions")
    p.add_argument("--skip", action="append", default=[],
                   help="component name to exclude from scoring")

    p = sub.add_parser("preview", help="write a contact sheet")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("-k", type=int, default=4)
    p.add_argument("--dataset-root", dest="dataset_root")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.cmd is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        if args.cmd == "synth":
            run_synth(_synth_config(args))
        elif args.cmd == "enumerate":
            run_enumerate(args.n)
        elif args.cmd == "eval":
            run_eval(args.manifest, args.outputs, args.report,
                     dataset_root=args.dataset_root,
                     predictions_path=args.predictions,
                     skip_components=tuple(args.skip))
        elif args.cmd == "preview":
            run_preview(args.manifest, args.out, k=args.k,
                        dataset_root=args.dataset_root)
        return EXIT_OK
    except CliError as e:
        print(f"bidbench: {e}", file=sys.stderr)
        return e.code
    except OSError as e:
        print(f"bidbench: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
