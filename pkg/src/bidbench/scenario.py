"""Task protocol: component registry, case enumeration, probabilistic case
sampling, ordered composition, and manifest records.

A task declares N source components.  Each sample selects a non-empty
subset (the case), mixes the selected components with the task's physics
in a fixed order, and records everything needed to regenerate the sample
bit-exactly in a manifest line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .imgcore import check_image
from .linmix import linear_mix
from .overlay import (
    ReflectionLayer,
    ShadowTriplet,
    WatermarkAsset,
    apply_reflection,
    apply_watermark,
    sample_reflection_kernel,
    shadow_base,
    vignette_mask,
)
from .raindrop import (
    DropConfig,
    apply_raindrop_pipeline,
    drops_digest,
    sample_gain,
    sample_raindrops,
    sample_rate,
)
from .streams import derive_stream
from .weather import (
    MaskLayer,
    TransmissionMap,
    apply_haze,
    apply_mask_composite,
    sample_atmosphere,
)

__all__ = [
    "COMPONENT_KINDS",
    "TASK1_PROBS",
    "TASK_NAMES",
    "ComponentSpec",
    "CaseMask",
    "SelectionPolicy",
    "ComposeResult",
    "MixManifest",
    "enumerate_cases",
    "sample_case",
    "derive_stream",
    "task_policy",
    "compose",
    "write_manifests",
    "read_manifests",
]

COMPONENT_KINDS = frozenset({
    "image-domain",
    "rain-streak-mask",
    "snow-mask",
    "haze-transmission",
    "raindrop",
    "shadow-pair",
    "reflection-layer",
    "watermark",
})

# Physical components must be mixed in this relative order; the two task
# families use disjoint kinds so one rank table covers both chains.
_KIND_RANK = {
    "rain-streak-mask": 0,
    "snow-mask": 1,
    "haze-transmission": 2,
    "raindrop": 3,
    "shadow-pair": 0,
    "reflection-layer": 1,
    "watermark": 2,
}

# Kinds whose composite blends toward the global atmospheric light A.
_NEEDS_ATMOSPHERE = {"rain-streak-mask", "snow-mask", "haze-transmission",
                     "watermark"}

# Uniform per-component selection probability for the linear-mix task,
# one value per component count.
TASK1_PROBS = {2: 0.9, 3: 0.8, 4: 0.7, 5: 0.6, 6: 0.5, 7: 0.5, 8: 0.5}

TASK_NAMES = ("task1", "task2a", "task2b", "task3")

DEFAULT_VIGNETTE_STRENGTH = 0.4


@dataclass(frozen=True)
class ComponentSpec:
    """One source component: 1-based index, label, behavior kind, and its
    independent selection probability."""

    index: int
    name: str
    kind: str
    selection_prob: float
    asset_dir: str | None = None

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"component index must be >= 1, got {self.index}")
        if self.kind not in COMPONENT_KINDS:
            raise ValueError(f"unknown component kind {self.kind!r}")
        if not 0.0 <= self.selection_prob <= 1.0:
            raise ValueError(
                f"selection_prob must be in [0, 1], got {self.selection_prob}")


@dataclass(frozen=True)
class CaseMask:
    """Non-empty component subset as an n-bit set; bit m-1 set means
    component m is selected."""

    bits: int
    n: int

    def __post_init__(self):
        if not 1 <= self.n <= 16:
            raise ValueError(f"component count must be in [1, 16], got {self.n}")
        if not 1 <= self.bits < (1 << self.n):
            raise ValueError(f"case bits {self.bits:#x} out of range for n={self.n}")

    @property
    def popcount(self) -> int:
        return self.bits.bit_count()

    def contains(self, index: int) -> bool:
        """Membership of the 1-based component index."""
        return bool(self.bits >> (index - 1) & 1)

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(1, self.n + 1) if self.contains(i))

    def letters(self) -> str:
        """Compact a/ab/abc notation: letter i-th of the alphabet per
        selected component index."""
        return "".join(chr(ord("a") + i - 1) for i in self.indices())

    @classmethod
    def from_indices(cls, indices, n: int) -> "CaseMask":
        bits = 0
        for i in indices:
            if not 1 <= i <= n:
                raise ValueError(f"component index {i} out of range for n={n}")
            bits |= 1 << (i - 1)
        return cls(bits=bits, n=n)


def enumerate_cases(n: int) -> list[CaseMask]:
    """All 2^n - 1 non-empty cases, sorted by (popcount, numeric value)."""
    if not 2 <= n <= 16:
        raise ValueError(f"component count must be in [2, 16], got {n}")
    bits = sorted(range(1, 1 << n), key=lambda b: (b.bit_count(), b))
    return [CaseMask(bits=b, n=n) for b in bits]


@dataclass(frozen=True)
class SelectionPolicy:
    """Per-component selection probabilities plus the fixed mixing order.

    The order is a permutation of component indices; for physical
    components it must follow the canonical chain (streak, snow, haze,
    raindrop / shadow, reflection, watermark).  Empty draws are always
    resampled, so each stated probability holds conditioned on a
    non-empty case.
    """

    components: tuple[ComponentSpec, ...]
    mixing_order: tuple[int, ...]
    resample_on_empty: bool = True

    def __post_init__(self):
        n = len(self.components)
        if n < 1:
            raise ValueError("policy needs at least one component")
        if tuple(c.index for c in self.components) != tuple(range(1, n + 1)):
            raise ValueError("components must be listed by index 1..N")
        if sorted(self.mixing_order) != list(range(1, n + 1)):
            raise ValueError(f"mixing_order must permute 1..{n}")
        if not any(c.selection_prob > 0.0 for c in self.components):
            raise ValueError("all selection probabilities are zero")
        if not self.resample_on_empty:
            raise ValueError("empty draws must be resampled")
        by_index = {c.index: c for c in self.components}
        ranks = [_KIND_RANK[by_index[i].kind] for i in self.mixing_order
                 if by_index[i].kind in _KIND_RANK]
        if any(a > b for a, b in zip(ranks, ranks[1:])):
            raise ValueError("mixing_order violates the canonical composition order")

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def probs(self) -> tuple[float, ...]:
        return tuple(c.selection_prob for c in self.components)

    def component(self, index: int) -> ComponentSpec:
        return self.components[index - 1]


def sample_case(policy: SelectionPolicy, rng) -> CaseMask:
    """Independent Bernoulli draw per component, redrawn until non-empty.

    One uniform is consumed per component per attempt, in index order.
    """
    probs = policy.probs
    while True:
        bits = 0
        for i, p in enumerate(probs):
            if rng.random() < p:
                bits |= 1 << i
        if bits:
            return CaseMask(bits=bits, n=len(probs))


def task_policy(task: str, n_components: int = 0) -> SelectionPolicy:
    """Built-in per-task policies.

    task1 takes the component count (2..8) and applies one shared
    probability; the three named tasks have fixed registries.
    """
    if task == "task1":
        if n_components not in TASK1_PROBS:
            raise ValueError(
                f"task1 supports {min(TASK1_PROBS)}..{max(TASK1_PROBS)} "
                f"components, got {n_components}")
        p = TASK1_PROBS[n_components]
        comps = tuple(
            ComponentSpec(i, f"domain{i}", "image-domain", p)
            for i in range(1, n_components + 1))
        return SelectionPolicy(comps, tuple(range(1, n_components + 1)))
    if task == "task2a":
        comps = (
            ComponentSpec(1, "rain_streak", "rain-streak-mask", 1.0),
            ComponentSpec(2, "snow", "snow-mask", 0.5),
            ComponentSpec(3, "haze", "haze-transmission", 0.5),
            ComponentSpec(4, "raindrop", "raindrop", 0.5),
        )
        return SelectionPolicy(comps, (1, 2, 3, 4))
    if task == "task2b":
        comps = (
            ComponentSpec(1, "rain_streak", "rain-streak-mask", 0.6),
            ComponentSpec(2, "snow", "snow-mask", 0.5),
            ComponentSpec(3, "raindrop", "raindrop", 0.5),
        )
        return SelectionPolicy(comps, (1, 2, 3))
    if task == "task3":
        comps = (
            ComponentSpec(1, "shadow", "shadow-pair", 0.6),
            ComponentSpec(2, "reflection", "reflection-layer", 0.5),
            ComponentSpec(3, "watermark", "watermark", 0.5),
        )
        return SelectionPolicy(comps, (1, 2, 3))
    raise ValueError(f"unknown task {task!r}; expected one of {TASK_NAMES}")


@dataclass
class ComposeResult:
    """Mixture plus everything the manifest records about it."""

    mixed: np.ndarray
    gt_base: np.ndarray | None
    gts: dict  # component name -> ground-truth raster, selected only
    params: dict  # JSON-ready parameter block


def _as_mask(obj, kind: str) -> MaskLayer:
    if isinstance(obj, MaskLayer):
        return obj
    return MaskLayer(mask=np.asarray(obj, dtype=np.float64), kind=kind)


def _as_transmission(obj) -> TransmissionMap:
    if isinstance(obj, TransmissionMap):
        return obj
    return TransmissionMap(t=np.asarray(obj, dtype=np.float64), intensity="moderate")


def compose(case: CaseMask, assets: dict, policy: SelectionPolicy, rng, *,
            mode: str = "test", drop_rng=None, drop_cfg: DropConfig | None = None,
            vignette_strength: float = DEFAULT_VIGNETTE_STRENGTH) -> ComposeResult:
    """Mix one sample.

    `assets` maps component names to their inputs: a source image for
    image domains, mask / transmission arrays for weather components, a
    ShadowTriplet under the shadow component's name (required for the
    overlay chain even when shadow is unselected, since it supplies the
    base scene), a reflection scene image, a WatermarkAsset.  Mask-chain
    tasks take the clean scene under the reserved key "base".  The
    raindrop component has no asset; geometry is drawn from `drop_rng`
    (falls back to `rng`).

    Draw order on `rng` is fixed: atmospheric light first (when any
    selected component blends toward it), then per-component parameters
    in mixing order.  Ground truths carry one entry per selected
    component; the clean base travels separately.
    """
    if case.n != policy.n:
        raise ValueError(f"case is over {case.n} components, policy over {policy.n}")
    selected = [policy.component(i) for i in case.indices()]
    for comp in selected:
        if comp.kind != "raindrop" and comp.name not in assets:
            raise KeyError(f"missing asset for selected component {comp.name!r}")

    kinds = {c.kind for c in selected}
    params: dict = {"probs": list(policy.probs), "mode": mode}
    gts: dict = {}

    if kinds == {"image-domain"}:
        sources = []
        for comp in selected:
            img = check_image(np.asarray(assets[comp.name], dtype=np.float64),
                              comp.name)
            sources.append(img)
            gts[comp.name] = img.copy()
        return ComposeResult(linear_mix(sources), None, gts, params)
    if "image-domain" in kinds:
        raise ValueError("image domains cannot mix with physical components")

    # both physical chains run below; ranks were validated on the policy
    order = [policy.component(i) for i in policy.mixing_order
             if case.contains(i) or policy.component(i).kind == "shadow-pair"]

    if any(c.kind in _NEEDS_ATMOSPHERE for c in selected):
        atmo = sample_atmosphere(rng, mode)
        params["A"] = atmo.A
    else:
        atmo = None

    if any(c.kind == "shadow-pair" for c in policy.components):
        shadow_comp = next(c for c in policy.components if c.kind == "shadow-pair")
        if shadow_comp.name not in assets:
            raise KeyError(f"overlay chain needs {shadow_comp.name!r} scene asset")
        triplet: ShadowTriplet = assets[shadow_comp.name]
        img, gt_mask = shadow_base(triplet, case.contains(shadow_comp.index))
        gt_base = triplet.shadow_free.copy()
        if case.contains(shadow_comp.index):
            gts[shadow_comp.name] = gt_mask
    else:
        if "base" not in assets:
            raise KeyError("mask-chain tasks need the clean scene under 'base'")
        base = check_image(np.asarray(assets["base"], dtype=np.float64), "base")
        img = base.copy()
        gt_base = base.copy()

    h, w = img.shape[:2]
    for comp in order:
        if comp.kind == "shadow-pair":
            continue  # consumed above as the base
        if comp.kind in ("rain-streak-mask", "snow-mask"):
            layer = _as_mask(assets[comp.name], comp.kind.removesuffix("-mask"))
            img = apply_mask_composite(img, layer, atmo)
            gts[comp.name] = layer.mask.copy()
        elif comp.kind == "haze-transmission":
            tmap = _as_transmission(assets[comp.name])
            img = apply_haze(img, tmap, atmo)
            gts[comp.name] = np.asarray(tmap.t, dtype=np.float64).copy()
            params["haze_intensity"] = tmap.intensity
        elif comp.kind == "raindrop":
            cfg = drop_cfg if drop_cfg is not None else DropConfig()
            rate = sample_rate(rng, mode)
            drops = sample_raindrops(drop_rng if drop_rng is not None else rng,
                                     cfg, w, h)
            gain = sample_gain(cfg, drops)
            img, coverage = apply_raindrop_pipeline(img, drops, gain, rate)
            gts[comp.name] = coverage
            params["raindrop"] = {
                "rate": rate,
                "gain": gain,
                "count": len(drops),
                "digest": drops_digest(drops),
            }
        elif comp.kind == "reflection-layer":
            kernel = sample_reflection_kernel(rng, mode)
            scene = check_image(np.asarray(assets[comp.name], dtype=np.float64),
                                comp.name)
            layer = ReflectionLayer(scene, vignette_mask(h, w, vignette_strength))
            img, contribution = apply_reflection(img, layer, kernel)
            gts[comp.name] = contribution
            params["reflection_kernel"] = kernel
            params["vignette_strength"] = vignette_strength
        elif comp.kind == "watermark":
            wm: WatermarkAsset = assets[comp.name]
            img = apply_watermark(img, wm, atmo)
            gts[comp.name] = wm.mask.copy()
        else:
            raise ValueError(f"unhandled component kind {comp.kind!r}")

    if len(gts) != case.popcount:
        raise AssertionError("ground-truth count does not match the case")
    return ComposeResult(img, gt_base, gts, params)


@dataclass(frozen=True)
class MixManifest:
    """One dataset sample: identity, case, parameters, and file paths.

    Paths are POSIX-relative to the dataset root.  `gt_components` holds
    exactly one path per selected component; the clean base travels in
    `gt_base` (absent for the linear-mix task, whose sources are their
    own ground truths).
    """

    sample_id: str
    index: int
    master_seed: int
    task: str
    mode: str
    n_components: int
    case_bits: int
    components: tuple[str, ...]
    params: dict
    mixed: str
    gt_components: dict
    gt_base: str | None = None
    assets: dict = field(default_factory=dict)

    def __post_init__(self):
        case = CaseMask(self.case_bits, self.n_components)
        if len(self.components) != case.popcount:
            raise ValueError("selected-component list does not match the case")
        if set(self.gt_components) != set(self.components):
            raise ValueError("every selected component needs a ground-truth path")

    @property
    def case(self) -> CaseMask:
        return CaseMask(self.case_bits, self.n_components)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "index": self.index,
            "master_seed": self.master_seed,
            "task": self.task,
            "mode": self.mode,
            "n_components": self.n_components,
            "case_bits": self.case_bits,
            "case_letters": self.case.letters(),
            "components": list(self.components),
            "params": self.params,
            "mixed": self.mixed,
            "gt_base": self.gt_base,
            "gt_components": self.gt_components,
            "assets": self.assets,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixManifest":
        return cls(
            sample_id=d["sample_id"],
            index=d["index"],
            master_seed=d["master_seed"],
            task=d["task"],
            mode=d["mode"],
            n_components=d["n_components"],
            case_bits=d["case_bits"],
            components=tuple(d["components"]),
            params=d["params"],
            mixed=d["mixed"],
            gt_base=d.get("gt_base"),
            gt_components=dict(d["gt_components"]),
            assets=dict(d.get("assets", {})),
        )


def write_manifests(path, manifests) -> int:
    """Write manifests as JSONL with sorted keys; returns the line count."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for m in manifests:
            fh.write(json.dumps(m.to_dict(), sort_keys=True))
            fh.write("\n")
            count += 1
    return count


def read_manifests(path) -> list[MixManifest]:
    with open(path, "r", encoding="utf-8") as fh:
        return [MixManifest.from_dict(json.loads(line))
                for line in fh if line.strip()]
