"""Distance-ordered diffusion fill for unseen texels."""

import numpy as np
import pytest

from matbake.inpaint import inpaint_masked


def disk_hole(n, radius_frac=0.2):
    yy, xx = np.mgrid[0:n, 0:n]
    c = (n - 1) / 2
    return (yy - c) ** 2 + (xx - c) ** 2 > (radius_frac * n) ** 2


def test_all_known_returns_bitwise_copy():
    rng = np.random.default_rng(0)
    vals = rng.uniform(0, 1, (16, 16)).astype(np.float32)
    out = inpaint_masked(vals, np.ones((16, 16), bool))
    assert out is not vals
    assert np.array_equal(out, vals)


def test_constant_field_fills_exactly():
    vals = np.full((32, 32), 0.625, np.float32)
    known = disk_hole(32)
    vals[~known] = 0.0
    out = inpaint_masked(vals, known, radius=6)
    assert np.all(out == 0.625)


def test_linear_gradient_small_hole_error_bound():
    # fill quality target on a smooth field: a linear ramp with a small
    # disk punched out comes back within 0.05 of the plane everywhere
    n = 64
    u = np.linspace(0.0, 1.0, n, dtype=np.float32)
    truth = np.outer(np.ones(n, np.float32), u)
    known = disk_hole(n, 0.08)
    vals = np.where(known, truth, np.float32(0.0))
    out = inpaint_masked(vals, known, radius=4)
    assert np.array_equal(out[known], truth[known])
    assert np.abs(out - truth).max() <= 0.05


def test_multichannel_fill_matches_per_channel():
    rng = np.random.default_rng(5)
    smooth = rng.uniform(0.3, 0.7, (24, 24, 3)).astype(np.float32)
    smooth[:] = smooth.mean(axis=(0, 1))  # constant per channel
    known = disk_hole(24, 0.25)
    vals = np.where(known[:, :, None], smooth, np.float32(0.0))
    out = inpaint_masked(vals, known, radius=5)
    for c in range(3):
        alone = inpaint_masked(vals[:, :, c], known, radius=5)
        assert np.array_equal(out[:, :, c], alone)
    assert np.isfinite(out).all()


def test_fill_values_stay_within_known_range():
    rng = np.random.default_rng(9)
    vals = rng.uniform(0.2, 0.8, (48, 48)).astype(np.float32)
    known = disk_hole(48, 0.3)
    lo, hi = vals[known].min(), vals[known].max()
    out = inpaint_masked(np.where(known, vals, np.float32(9.0)), known)
    assert out.min() >= lo - 1e-6
    assert out.max() <= hi + 1e-6


def test_no_known_texels_returns_input_unchanged():
    # nothing to propagate from: documented pass-through, callers handle it
    vals = np.full((8, 8), 0.3, np.float32)
    out = inpaint_masked(vals, np.zeros((8, 8), bool))
    assert np.array_equal(out, vals)


def test_bad_radius_is_an_error():
    vals = np.zeros((8, 8), np.float32)
    known = np.ones((8, 8), bool)
    known[4, 4] = False
    with pytest.raises(ValueError, match="radius"):
        inpaint_masked(vals, known, radius=0)


def test_shape_mismatch_is_an_error():
    with pytest.raises(ValueError, match="shape"):
        inpaint_masked(np.zeros((8, 8), np.float32), np.ones((4, 4), bool))


def test_deterministic_across_runs():
    rng = np.random.default_rng(2)
    vals = rng.uniform(0, 1, (32, 32)).astype(np.float32)
    known = rng.uniform(0, 1, (32, 32)) > 0.4
    a = inpaint_masked(vals, known, radius=4)
    b = inpaint_masked(vals, known, radius=4)
    assert np.array_equal(a, b)


def test_far_texels_still_filled_regardless_of_radius():
    # radius shapes the weighting window, not the reach: every unknown
    # texel receives a finite value even far from the boundary
    n = 40
    vals = np.zeros((n, n), np.float32)
    known = np.zeros((n, n), bool)
    known[0, :] = True
    vals[0, :] = 0.75
    out = inpaint_masked(vals, known, radius=2)
    assert np.isfinite(out).all()
    assert np.abs(out - 0.75).max() < 1e-4
