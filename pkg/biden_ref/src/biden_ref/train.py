"""Training driver.

Alternates discriminator and generator updates over a manifest-described
dataset at batch size 1, decays the learning rate linearly over the
second half of the run, and scores a held-out tail slice: exact-subset
prediction accuracy plus reconstruction PSNR against the PSNR the raw
mixture already achieves. Checkpoints, a metrics log, per-sample
reconstructions, and a predictions file in the scorer's JSON-line
format all land in the output directory.
"""

from __future__ import annotations

import argparse
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import torch

from .data import (component_table, make_batch, read_manifest, save_unit_image,
                   split_holdout, write_predictions)
from .losses import (FeaturePyramid, LossWeights, _generator_terms,
                     discriminator_loss, subset_bce)
from .models import (DiscriminatorSpec, GeneratorSpec, build_discriminator,
                     build_generator)

__all__ = ["TrainConfig", "TrainResult", "decay_factor", "evaluate", "train"]


@dataclass
class TrainConfig:
    manifest: str
    out_dir: str
    dataset_root: str | None = None
    steps: int = 500
    width: float = 1.0
    lr: float = 3e-4
    betas: tuple = (0.5, 0.999)
    weights: LossWeights = field(default_factory=LossWeights)
    holdout_fraction: float = 0.1
    seed: int = 0
    eval_every: int = 100
    gan_form: str = "lsgan"
    feature_mode: str = "random"
    mask_components: tuple = ()
    device: str = "cpu"


@dataclass
class TrainResult:
    history: list
    final: dict
    out_dir: str


def decay_factor(step: int, total: int) -> float:
    """Linear ramp to zero over the second half of the run.

    Full rate through step total/2, then straight down; the value at
    step == total is exactly 0.
    """
    if total <= 0:
        raise ValueError(f"total must be positive, got {total}")
    return max(0.0, min(1.0, 2.0 * (1.0 - step / total)))


def _unit(y: torch.Tensor) -> torch.Tensor:
    return ((y + 1.0) * 0.5).clamp(0.0, 1.0)


def _psnr(a: torch.Tensor, b: torch.Tensor) -> float:
    mse = ((a - b) ** 2).mean().item()
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _set_requires_grad(module, flag: bool) -> None:
    for p in module.parameters():
        p.requires_grad_(flag)


def evaluate(gen, disc, records, root, table) -> dict:
    """Held-out metrics: exact-subset accuracy plus reconstruction PSNR
    against what the raw mixture scores on the same (sample, component)
    pairs.

    A single-component sample's mixture IS the source, so its input PSNR
    is infinite and says nothing about separation quality; those pairs
    are counted in n_exact_pairs and excluded from both PSNR means. With
    no degraded pair at all the means are NaN.
    """
    gen.eval()
    disc.eval()
    hits = 0
    recon_psnrs, input_psnrs = [], []
    n_exact = 0
    name_to_index = {name: i for i, name in enumerate(table)}
    with torch.no_grad():
        for rec in records:
            batch = make_batch(rec, root, table)
            z, labels = batch["mixed"], batch["labels"]
            logits = disc.logits(z)[0]
            predicted = {i for i, v in enumerate(logits.tolist()) if v > 0.0}
            actual = {i for i, v in enumerate(labels[0].tolist()) if v > 0.5}
            hits += predicted == actual
            outs = gen(z, sorted(actual))
            for name, target in batch["targets"].items():
                baseline = _psnr(_unit(z), _unit(target))
                if math.isinf(baseline):
                    n_exact += 1
                    continue
                i = name_to_index[name]
                recon_psnrs.append(_psnr(_unit(outs[i]), _unit(target)))
                input_psnrs.append(baseline)
    gen.train()
    disc.train()
    nan = float("nan")
    return {
        "n_held": len(records),
        "n_pairs": len(recon_psnrs),
        "n_exact_pairs": n_exact,
        "accuracy": hits / len(records),
        "recon_psnr": sum(recon_psnrs) / len(recon_psnrs) if recon_psnrs else nan,
        "input_psnr": sum(input_psnrs) / len(input_psnrs) if input_psnrs else nan,
    }


def _export_holdout(gen, disc, records, root, table, out_dir: Path) -> None:
    """Reconstruction PNGs and a predictions file the scorer can read."""
    outputs = out_dir / "outputs"
    outputs.mkdir(parents=True, exist_ok=True)
    rows = []
    name_to_index = {name: i for i, name in enumerate(table)}
    gen.eval()
    disc.eval()
    with torch.no_grad():
        for rec in records:
            batch = make_batch(rec, root, table)
            z = batch["mixed"]
            rows.append((rec["sample_id"], disc.logits(z)[0].tolist()))
            selected = sorted(name_to_index[n] for n in batch["targets"])
            outs = gen(z, selected)
            for name in batch["targets"]:
                img = _unit(outs[name_to_index[name]][0])
                save_unit_image(outputs / f"{rec['sample_id']}.{name}.png", img)
    gen.train()
    disc.train()
    write_predictions(out_dir / "predictions.jsonl", rows)


def train(cfg: TrainConfig) -> TrainResult:
    records = read_manifest(cfg.manifest)
    root = cfg.dataset_root or str(Path(cfg.manifest).parent)
    table = component_table(records)
    n = len(table)
    train_recs, held_recs = split_holdout(records, cfg.holdout_fraction)
    if not train_recs:
        raise ValueError("no training records left after holdout split")

    torch.manual_seed(cfg.seed)
    device = torch.device(cfg.device)
    gen = build_generator(GeneratorSpec(n, cfg.width)).to(device).train()
    disc = build_discriminator(DiscriminatorSpec(n, cfg.width)).to(device).train()
    pyramid = None
    if cfg.feature_mode != "off":
        pyramid = FeaturePyramid(cfg.feature_mode, seed=cfg.seed).to(device)

    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr, betas=cfg.betas)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr, betas=cfg.betas)
    order_rng = torch.Generator().manual_seed(cfg.seed + 1)

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    history = []
    mask_set = frozenset(cfg.mask_components)
    order: list = []

    for step in range(cfg.steps):
        if not order:
            order = torch.randperm(len(train_recs), generator=order_rng).tolist()
        rec = train_recs[order.pop()]
        batch = make_batch(rec, root, table)
        if device.type != "cpu":
            batch = {k: v.to(device) if torch.is_tensor(v) else v
                     for k, v in batch.items()}
            batch["targets"] = {k: v.to(device)
                                for k, v in batch["targets"].items()}

        factor = decay_factor(step, cfg.steps)
        for opt in (opt_g, opt_d):
            for group in opt.param_groups:
                group["lr"] = cfg.lr * factor

        selected = [i for i, v in enumerate(batch["labels"][0].tolist())
                    if v > 0.5]
        outs = gen(batch["mixed"], selected)

        _set_requires_grad(disc, True)
        opt_d.zero_grad(set_to_none=True)
        d_total, _ = discriminator_loss(disc, batch, outs, cfg.weights,
                                        cfg.gan_form)
        d_total.backward()
        opt_d.step()

        _set_requires_grad(disc, False)
        opt_g.zero_grad(set_to_none=True)
        terms = _generator_terms(outs, disc, batch, pyramid, mask_set,
                                 cfg.gan_form)
        w = cfg.weights
        g_total = (w.gan * terms["gan"] + w.feat * terms["feat"]
                   + w.recon * terms["recon"] + w.bce * terms["bce"])
        g_total.backward()
        opt_g.step()
        _set_requires_grad(disc, True)

        last = step == cfg.steps - 1
        if held_recs and (last or (step + 1) % cfg.eval_every == 0):
            metrics = evaluate(gen, disc, held_recs, root, table)
            metrics.update(step=step + 1, lr=cfg.lr * factor,
                           g_loss=g_total.detach().item(),
                           d_loss=d_total.detach().item())
            history.append(metrics)
            print(f"step {step + 1:>6}  acc {metrics['accuracy']:.3f}  "
                  f"recon {metrics['recon_psnr']:.2f} dB  "
                  f"input {metrics['input_psnr']:.2f} dB  "
                  f"g {metrics['g_loss']:.3f}  d {metrics['d_loss']:.3f}")

    torch.save(gen.state_dict(), out_dir / "generator.pt")
    torch.save(disc.state_dict(), out_dir / "discriminator.pt")
    with open(out_dir / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for row in history:
            fh.write(json.dumps(row) + "\n")
    if held_recs:
        _export_holdout(gen, disc, held_recs, root, table, out_dir)

    final = history[-1] if history else {}
    return TrainResult(history=history, final=final, out_dir=str(out_dir))


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="train the decomposition networks on a synthesized dataset")
    parser.add_argument("--manifest", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--dataset-root")
    parser.add_argument("--steps", type=int, default=500)
    parser.add_argument("--width", type=float, default=1.0)
    parser.add_argument("--lr", type=float, default=3e-4)
    parser.add_argument("--holdout", type=float, default=0.1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--eval-every", type=int, default=100)
    parser.add_argument("--gan-form", choices=("lsgan", "logistic"),
                        default="lsgan")
    parser.add_argument("--features", choices=("random", "vgg19", "off"),
                        default="random")
    parser.add_argument("--mask-component", action="append", default=[],
                        help="component scored with L2 instead of L1")
    parser.add_argument("--device", default="cpu")
    args = parser.parse_args(argv)

    cfg = TrainConfig(
        manifest=args.manifest, out_dir=args.out,
        dataset_root=args.dataset_root, steps=args.steps, width=args.width,
        lr=args.lr, holdout_fraction=args.holdout, seed=args.seed,
        eval_every=args.eval_every, gan_form=args.gan_form,
        feature_mode=args.features, mask_components=tuple(args.mask_component),
        device=args.device)
    result = train(cfg)
    if result.final:
        print(f"final: accuracy {result.final['accuracy']:.3f}, "
              f"reconstruction {result.final['recon_psnr']:.2f} dB "
              f"(input {result.final['input_psnr']:.2f} dB)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
