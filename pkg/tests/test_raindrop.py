"""Raindrop pipeline: placement draw order, metaball closed forms, cap
geometry, warp arithmetic, and the untouched-pixel guarantee."""

import numpy as np
import pytest

from bidbench.raindrop import (
    DropConfig,
    Raindrop,
    RefractionTable,
    apply_raindrop_pipeline,
    attenuate_and_blur,
    build_refraction_table,
    distort,
    drops_digest,
    merge_raindrop,
    metaball_coverage,
    sample_gain,
    sample_raindrops,
    sample_rate,
)
from bidbench.streams import Stream

CFG = DropConfig(count_range=(2, 6), radius_range=(2.0, 8.0))


def _expected_drops(seed, cfg, width, height):
    """Replay of the documented draw order; freezes the stream layout."""
    rng = Stream(seed)
    count = rng.randrange(*cfg.count_range)
    tau = rng.randint(cfg.time_steps)
    out = []
    for _ in range(count):
        cx = rng.random() * width
        cy = rng.random() * height
        r = rng.uniform(*cfg.radius_range)
        fall = cfg.velocity_k * r * tau
        n_sat = rng.randrange(1, 3)
        sats = []
        for _ in range(n_sat):
            ang = rng.random() * 2.0 * np.pi
            dist = r * rng.uniform(0.6, 1.1)
            sr = r * rng.uniform(0.3, 0.7)
            sats.append((cx + dist * np.cos(ang), cy + dist * np.sin(ang) + fall, sr))
        out.append((cx, cy + fall, r, tuple(sats)))
    return out


def test_sampling_follows_documented_draw_order():
    for seed in (0, 1, 99):
        drops = sample_raindrops(Stream(seed), CFG, 64, 48)
        expected = _expected_drops(seed, CFG, 64, 48)
        assert len(drops) == len(expected)
        for d, (ex, ey, er, esats) in zip(drops, expected):
            assert (d.x, d.y, d.radius) == (ex, ey, er)
            assert [(s.x, s.y, s.radius) for s in d.satellites] == list(esats)


def test_sampling_determinism():
    a = sample_raindrops(Stream(7), CFG, 64, 64)
    b = sample_raindrops(Stream(7), CFG, 64, 64)
    assert a == b


def test_velocity_proportional_to_radius():
    drops = sample_raindrops(Stream(3), CFG, 64, 64)
    for d in drops:
        assert d.velocity_y == CFG.velocity_k * d.radius
        for s in d.satellites:
            assert s.velocity_y == CFG.velocity_k * s.radius


def test_satellite_counts_and_geometry():
    rng = Stream(5)
    for _ in range(50):
        for d in sample_raindrops(rng, CFG, 64, 64):
            assert 1 <= len(d.satellites) <= 3
            for s in d.satellites:
                assert 0.3 * d.radius <= s.radius <= 0.7 * d.radius
                dist = np.hypot(s.x - d.x, s.y - d.y)
                assert 0.6 * d.radius - 1e-9 <= dist <= 1.1 * d.radius + 1e-9


def test_single_time_step_means_no_fall():
    cfg = DropConfig(count_range=(2, 6), radius_range=(2.0, 8.0), time_steps=1)
    drops = sample_raindrops(Stream(11), cfg, 64, 64)
    expected = _expected_drops(11, cfg, 64, 64)
    for d, (ex, ey, _, _) in zip(drops, expected):
        assert (d.x, d.y) == (ex, ey)


def test_drop_counts_cover_inclusive_range():
    counts = {len(sample_raindrops(Stream(s), CFG, 64, 64)) for s in range(300)}
    assert counts == set(range(2, 7))


# ---------------------------------------------------------------------------
# Metaball coverage

def test_coverage_closed_forms():
    drop = Raindrop(x=16.0, y=16.0, radius=5.0, velocity_y=2.5)
    cov = metaball_coverage([drop], 33, 33)
    assert cov[16, 16] == 1.0            # field r^2/eps at the center
    assert cov[16, 26] == 0.0            # distance 2r: field 0.25 < 0.8
    # distance r: field ~1.0, halfway through the smoothstep band
    assert cov[16, 21] == pytest.approx(0.5, abs=1e-6)


def test_touching_drops_merge():
    r = 5.0
    d = r / np.sqrt(0.6)  # each drop contributes 0.6 at the midpoint
    a = Raindrop(x=16.0 - d, y=16.0, radius=r, velocity_y=0.0)
    b = Raindrop(x=16.0 + d, y=16.0, radius=r, velocity_y=0.0)
    both = metaball_coverage([a, b], 33, 33)
    alone = metaball_coverage([a], 33, 33)
    assert both[16, 16] > 0.99
    assert alone[16, 16] == 0.0


def test_coverage_four_fold_symmetry():
    drop = Raindrop(x=16.0, y=16.0, radius=4.0, velocity_y=2.0)
    cov = metaball_coverage([drop], 33, 33)
    np.testing.assert_array_equal(cov, cov[:, ::-1])
    np.testing.assert_array_equal(cov, cov[::-1, :])


def test_coverage_includes_satellites():
    sat = Raindrop(x=28.0, y=16.0, radius=3.0, velocity_y=1.5)
    drop = Raindrop(x=10.0, y=16.0, radius=4.0, velocity_y=2.0, satellites=(sat,))
    cov = metaball_coverage([drop], 33, 33)
    assert cov[16, 28] == 1.0


def test_coverage_monotone_in_radius():
    rng = Stream(13)
    for _ in range(20):
        drops = sample_raindrops(rng, CFG, 48, 48)
        cov = metaball_coverage(drops, 48, 48)
        grown = [Raindrop(d.x, d.y, d.radius * 1.25, d.velocity_y, d.satellites)
                 for d in drops]
        cov2 = metaball_coverage(grown, 48, 48)
        assert np.all(cov2 >= cov)


def test_empty_grid_rejected():
    with pytest.raises(ValueError):
        metaball_coverage([], 0, 4)


# ---------------------------------------------------------------------------
# Refraction table

def test_table_apex_and_rim():
    # r^2 = 32 puts the pixel 4 to the right at d = r/sqrt(2)
    r = np.sqrt(32.0)
    drop = Raindrop(x=16.0, y=16.0, radius=r, velocity_y=0.0)
    table = build_refraction_table([drop], 33, 33)
    assert table.b[16, 16] == 1.0
    assert table.r[16, 16] == 0.5
    assert table.g[16, 16] == 0.5
    assert table.b[16, 20] == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-9)
    assert table.g[16, 20] == 0.5
    assert table.r[16, 20] == pytest.approx(0.5 + 0.5 * 4.0 / r, abs=1e-9)
    assert table.r[16, 12] < 0.5  # deflection flips sign across the center


def test_table_zero_outside_coverage():
    drop = Raindrop(x=8.0, y=8.0, radius=3.0, velocity_y=1.5)
    table = build_refraction_table([drop], 33, 33)
    far = table.coverage == 0.0
    assert far[30, 30]
    for chan in (table.r, table.g, table.b):
        assert np.all(chan[far] == 0.0)


def test_nearest_drop_dominates():
    big = Raindrop(x=2.0, y=16.0, radius=10.0, velocity_y=5.0)
    small = Raindrop(x=24.0, y=16.0, radius=2.0, velocity_y=1.0)
    table = build_refraction_table([big, small], 33, 33)
    # at the small drop's center its own cap wins: full thickness
    assert table.b[16, 24] == 1.0
    assert table.r[16, 24] == 0.5


# ---------------------------------------------------------------------------
# Distortion, attenuation, merge

def test_distort_without_coverage_is_bit_copy():
    rng = np.random.default_rng(20)
    O = rng.random((16, 16, 3))
    zeros = np.zeros((16, 16))
    table = RefractionTable(r=zeros, g=zeros, b=zeros, coverage=zeros)
    np.testing.assert_array_equal(distort(O, table, gain=25.0), O)


def test_distort_single_pixel_arithmetic():
    rng = np.random.default_rng(21)
    O = rng.random((9, 9))
    r = np.zeros((9, 9))
    g = np.zeros((9, 9))
    b = np.zeros((9, 9))
    cov = np.zeros((9, 9))
    r[4, 3] = 1.0   # full rightward deflection
    g[4, 3] = 0.5   # no vertical deflection
    b[4, 3] = 1.0
    cov[4, 3] = 1.0
    out = distort(O, RefractionTable(r, g, b, cov), gain=4.0)
    assert out[4, 3] == O[4, 5]  # sampled at u + 4*(1.0-0.5)*1.0 = u+2
    mask = np.ones((9, 9), dtype=bool)
    mask[4, 3] = False
    np.testing.assert_array_equal(out[mask], O[mask])


def test_distort_displacement_bound():
    # encode source x in the pixel value; displacement <= gain/2 * max(b)
    w = 33
    ramp = np.tile(np.arange(w, dtype=np.float64) / (w - 1), (w, 1))
    rng = Stream(17)
    for _ in range(10):
        drops = sample_raindrops(rng, CFG, w, w)
        table = build_refraction_table(drops, w, w)
        gain = sample_gain(CFG, drops)
        out = distort(ramp, table, gain)
        shift = np.abs(out - ramp) * (w - 1)
        assert shift.max() <= 0.5 * gain * table.b.max() + 1e-9


def test_attenuate_arithmetic():
    ones = np.ones((12, 12))
    cov = np.ones((12, 12))
    out = attenuate_and_blur(ones, 0.9, cov)
    np.testing.assert_allclose(out, 0.9, atol=1e-12)
    out = attenuate_and_blur(ones, 1.0, cov)
    np.testing.assert_allclose(out, 1.0, atol=1e-12)


def test_attenuate_rejects_bad_rate():
    img = np.ones((4, 4))
    cov = np.ones((4, 4))
    for rate in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            attenuate_and_blur(img, rate, cov)


def test_merge_endpoints_and_midpoint():
    rng = np.random.default_rng(22)
    O = rng.random((8, 8, 3))
    D = rng.random((8, 8, 3))
    np.testing.assert_array_equal(merge_raindrop(O, D, np.zeros((8, 8))), O)
    np.testing.assert_array_equal(merge_raindrop(O, D, np.ones((8, 8))), D)
    half = merge_raindrop(np.full((8, 8, 3), 0.2), np.full((8, 8, 3), 0.8),
                          np.full((8, 8), 0.5))
    np.testing.assert_allclose(half, 0.5, atol=1e-12)


def test_merge_size_mismatch():
    with pytest.raises(ValueError):
        merge_raindrop(np.zeros((4, 4)), np.zeros((4, 5)), np.zeros((4, 4)))


def test_pipeline_leaves_uncovered_pixels_untouched():
    rng = np.random.default_rng(23)
    O = rng.random((48, 48, 3))
    drop = Raindrop(x=8.0, y=8.0, radius=4.0, velocity_y=2.0)
    out, cov = apply_raindrop_pipeline(O, [drop], gain=10.0, rate=0.9)
    untouched = cov == 0.0
    assert untouched.sum() > 0
    np.testing.assert_array_equal(out[untouched], O[untouched])


def test_pipeline_with_no_drops_is_identity():
    rng = np.random.default_rng(24)
    O = rng.random((16, 16, 3))
    out, cov = apply_raindrop_pipeline(O, [], gain=0.0, rate=0.9)
    np.testing.assert_array_equal(out, O)
    np.testing.assert_array_equal(cov, 0.0)


# ---------------------------------------------------------------------------
# Scene parameters

def test_sample_rate_modes():
    assert sample_rate(Stream(0), "test") == 0.9
    rng = Stream(1)
    draws = [sample_rate(rng, "train") for _ in range(5000)]
    assert all(0.8 <= r < 0.98 for r in draws)
    assert abs(np.mean(draws) - 0.89) < 0.005
    with pytest.raises(ValueError):
        sample_rate(Stream(0), "validate")


def test_sample_gain_scaling():
    drops = [Raindrop(0, 0, 4.0, 2.0), Raindrop(0, 0, 24.0, 12.0)]
    cfg = DropConfig()
    assert sample_gain(cfg, drops) == pytest.approx(30.0 * 14.0 / 24.0)
    assert sample_gain(cfg, []) == 0.0


def test_digest_is_stable_and_sensitive():
    drops = sample_raindrops(Stream(9), CFG, 64, 64)
    again = sample_raindrops(Stream(9), CFG, 64, 64)
    assert drops_digest(drops) == drops_digest(again)
    assert len(drops_digest(drops)) == 16
    moved = [Raindrop(d.x + 1e-9, d.y, d.radius, d.velocity_y, d.satellites)
             for d in drops]
    assert drops_digest(moved) != drops_digest(drops)
