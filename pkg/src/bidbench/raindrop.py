"""Procedural raindrop rendering.

Pipeline: statistical drop placement -> metaball coverage field ->
refraction lookup table (texture x/y in red/green, thickness in blue) ->
displacement warp -> light attenuation and blur -> alpha merge with the
original image.  Drop interiors show the distorted image; pixels with zero
coverage pass through bit-identically.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .imgcore import bilinear_sample, check_image, gaussian_blur

__all__ = [
    "Raindrop",
    "DropConfig",
    "RefractionTable",
    "sample_raindrops",
    "metaball_coverage",
    "build_refraction_table",
    "distort",
    "attenuate_and_blur",
    "merge_raindrop",
    "apply_raindrop_pipeline",
    "sample_rate",
    "sample_gain",
    "drops_digest",
]

# Metaball field threshold band: coverage ramps smoothly from 0 at
# FIELD_LO to 1 at FIELD_HI, centered on the classic F = 1 iso-surface.
FIELD_LO = 0.8
FIELD_HI = 1.2
FIELD_EPS = 1e-6

TRAIN_RATE_RANGE = (0.8, 0.98)
TEST_RATE = 0.9

# Satellite placement (invented shape constants, fixed for reproducibility)
_SAT_RADIUS_FRAC = (0.3, 0.7)
_SAT_DIST_FRAC = (0.6, 1.1)


@dataclass(frozen=True)
class Raindrop:
    """One drop: center in pixels, radius, fall speed, child satellites."""

    x: float
    y: float
    radius: float
    velocity_y: float
    satellites: tuple = field(default_factory=tuple)


@dataclass(frozen=True)
class DropConfig:
    count_range: tuple[int, int] = (5, 25)
    radius_range: tuple[float, float] = (4.0, 24.0)
    time_steps: int = 8
    velocity_k: float = 0.5  # px per time step per px of radius
    gain_base: float = 30.0  # displacement gain at the maximum radius


def _flatten(drops) -> list[Raindrop]:
    flat = []
    for d in drops:
        flat.append(d)
        flat.extend(d.satellites)
    return flat


def sample_raindrops(rng, cfg: DropConfig, width: int, height: int) -> list[Raindrop]:
    """Sample a scene's drops and advance them to a random time index.

    Count is uniform in the configured range, centers uniform over the
    grid, each parent carries 1-3 satellites near its rim, and the whole
    scene is advanced by one shared time index tau in [0, time_steps):
    composites fall rigidly at the parent's speed, which is proportional
    to the parent radius.
    """
    lo, hi = cfg.count_range
    count = rng.randrange(lo, hi)
    tau = rng.randint(cfg.time_steps)
    drops = []
    for _ in range(count):
        cx = rng.random() * width
        cy = rng.random() * height
        r = rng.uniform(*cfg.radius_range)
        vy = cfg.velocity_k * r
        fall = vy * tau
        n_sat = rng.randrange(1, 3)
        sats = []
        for _ in range(n_sat):
            ang = rng.random() * 2.0 * np.pi
            dist = r * rng.uniform(*_SAT_DIST_FRAC)
            sr = r * rng.uniform(*_SAT_RADIUS_FRAC)
            sats.append(
                Raindrop(
                    x=cx + dist * np.cos(ang),
                    y=cy + dist * np.sin(ang) + fall,
                    radius=sr,
                    velocity_y=cfg.velocity_k * sr,
                )
            )
        drops.append(
            Raindrop(x=cx, y=cy + fall, radius=r, velocity_y=vy,
                     satellites=tuple(sats))
        )
    return drops


def _field(drops, width: int, height: int) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    F = np.zeros((height, width))
    for d in _flatten(drops):
        d2 = (xs - d.x) ** 2 + (ys - d.y) ** 2
        F += d.radius**2 / (d2 + FIELD_EPS)
    return F


def metaball_coverage(drops, width: int, height: int) -> np.ndarray:
    """Blinn-style coverage: summed inverse-square fields through a
    smoothstep over [FIELD_LO, FIELD_HI], so touching drops merge."""
    if width < 1 or height < 1:
        raise ValueError("empty grid")
    F = _field(drops, width, height)
    t = np.clip((F - FIELD_LO) / (FIELD_HI - FIELD_LO), 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


@dataclass(frozen=True)
class RefractionTable:
    """Per-pixel refraction lookup.

    r/g hold the lateral surface-normal projection mapped to [0, 1] with
    0.5 meaning no deflection, b the normalized cap thickness, coverage
    the metaball alpha.  All channels are 0 outside coverage.
    """

    r: np.ndarray
    g: np.ndarray
    b: np.ndarray
    coverage: np.ndarray


def build_refraction_table(drops, width: int, height: int) -> RefractionTable:
    """Spherical-cap model over the locally dominant drop.

    For each covered pixel the drop with the strongest field contribution
    supplies the cap: thickness sqrt(max(0, r^2 - d^2))/r and lateral unit
    normal (dx/r, dy/r) remapped so 0.5 is zero deflection.
    """
    coverage = metaball_coverage(drops, width, height)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    best = np.full((height, width), -1.0)
    dom_dx = np.zeros((height, width))
    dom_dy = np.zeros((height, width))
    dom_r = np.ones((height, width))
    for d in _flatten(drops):
        dx = xs - d.x
        dy = ys - d.y
        contrib = d.radius**2 / (dx**2 + dy**2 + FIELD_EPS)
        take = contrib > best
        best = np.where(take, contrib, best)
        dom_dx = np.where(take, dx, dom_dx)
        dom_dy = np.where(take, dy, dom_dy)
        dom_r = np.where(take, d.radius, dom_r)
    covered = coverage > 0.0
    d2 = dom_dx**2 + dom_dy**2
    thickness = np.sqrt(np.maximum(0.0, dom_r**2 - d2)) / dom_r
    r_chan = np.clip(0.5 + 0.5 * dom_dx / dom_r, 0.0, 1.0)
    g_chan = np.clip(0.5 + 0.5 * dom_dy / dom_r, 0.0, 1.0)
    zero = np.zeros_like(thickness)
    return RefractionTable(
        r=np.where(covered, r_chan, zero),
        g=np.where(covered, g_chan, zero),
        b=np.where(covered, thickness, zero),
        coverage=coverage,
    )


def distort(O: np.ndarray, table: RefractionTable, gain: float) -> np.ndarray:
    """Warp through the refraction table.

    Pixel (u, v) samples the source at x = u + gain*(R-0.5)*B,
    y = v + gain*(G-0.5)*B (bilinear, clamped); uncovered pixels copy O.
    """
    O = check_image(O, "O")
    h, w = O.shape[:2]
    if table.b.shape != (h, w):
        raise ValueError(f"table grid {table.b.shape} != image grid {(h, w)}")
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = xs + gain * (table.r - 0.5) * table.b
    sy = ys + gain * (table.g - 0.5) * table.b
    warped = bilinear_sample(O, sx, sy)
    covered = table.coverage > 0.0
    if O.ndim == 3:
        covered = covered[:, :, None]
    return np.where(covered, warped, O)


def attenuate_and_blur(D: np.ndarray, rate: float, coverage: np.ndarray) -> np.ndarray:
    """Dim the covered region by rate, then 3x3 Gaussian blur."""
    D = check_image(D, "D")
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must be in (0, 1], got {rate}")
    covered = coverage > 0.0
    if D.ndim == 3:
        covered = covered[:, :, None]
    dimmed = np.where(covered, rate * D, D)
    return gaussian_blur(dimmed, 3)


def merge_raindrop(O: np.ndarray, D: np.ndarray, coverage: np.ndarray) -> np.ndarray:
    """I = (1-c)*O + c*D with c the drop coverage."""
    O = check_image(O, "O")
    D = check_image(D, "D")
    if O.shape != D.shape or coverage.shape != O.shape[:2]:
        raise ValueError("merge_raindrop: size mismatch")
    c = coverage[:, :, None] if O.ndim == 3 else coverage
    return (1.0 - c) * O + c * D


def apply_raindrop_pipeline(O: np.ndarray, drops, gain: float, rate: float):
    """Full render for one scene; returns (image, coverage mask)."""
    h, w = O.shape[:2]
    table = build_refraction_table(drops, w, h)
    D = distort(O, table, gain)
    D = attenuate_and_blur(D, rate, table.coverage)
    return merge_raindrop(O, D, table.coverage), table.coverage


def sample_rate(rng, mode: str, lo: float = TRAIN_RATE_RANGE[0],
                hi: float = TRAIN_RATE_RANGE[1]) -> float:
    """Light-reduction rate: uniform in [lo, hi] train, fixed at test."""
    if mode == "test":
        return TEST_RATE
    if mode != "train":
        raise ValueError(f"mode must be 'train' or 'test', got {mode!r}")
    return rng.uniform(lo, hi)


def sample_gain(cfg: DropConfig, drops) -> float:
    """Per-scene displacement gain: the base scaled by mean parent radius
    over the maximum configured radius."""
    if not drops:
        return 0.0
    mean_r = sum(d.radius for d in drops) / len(drops)
    return cfg.gain_base * mean_r / cfg.radius_range[1]


def drops_digest(drops) -> str:
    """Stable short hash of the drop geometry, for manifest verification."""
    h = hashlib.sha256()
    for d in _flatten(drops):
        for v in (d.x, d.y, d.radius, d.velocity_y):
            h.update(np.float64(v).tobytes())
    return h.hexdigest()[:16]
