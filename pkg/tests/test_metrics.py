"""PSNR and SSIM against brute-force loop implementations."""

import numpy as np
import pytest

from matbake import fixtures
from matbake.metrics import compare_material_sets, psnr, ssim


def psnr_loops(a, b, max_value=1.0):
    total = 0.0
    count = 0
    flat_a = np.asarray(a, np.float64).ravel()
    flat_b = np.asarray(b, np.float64).ravel()
    for x, y in zip(flat_a, flat_b):
        total += (x - y) ** 2
        count += 1
    mse = total / count
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(max_value ** 2 / mse)


def ssim_loops(a, b, window=8, k1=0.01, k2=0.03, max_value=1.0):
    h, w = a.shape
    c1 = (k1 * max_value) ** 2
    c2 = (k2 * max_value) ** 2
    scores = []
    for y in range(h - window + 1):
        for x in range(w - window + 1):
            pa = a[y:y + window, x:x + window].astype(np.float64)
            pb = b[y:y + window, x:x + window].astype(np.float64)
            mu_a, mu_b = pa.mean(), pb.mean()
            var_a = pa.var()
            var_b = pb.var()
            cov = ((pa - mu_a) * (pb - mu_b)).mean()
            scores.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                          / ((mu_a ** 2 + mu_b ** 2 + c1)
                             * (var_a + var_b + c2)))
    return float(np.mean(scores))


def test_constant_offset_psnr_is_exactly_twenty():
    a = np.full((32, 32), 0.5)
    b = a + 0.1
    # mse = 0.01 -> 10 log10(1 / 0.01) = 20 dB
    assert psnr(a, b) == pytest.approx(20.0, abs=1e-12)


def test_identical_images_are_infinite_psnr_and_unit_ssim():
    rng = np.random.default_rng(0)
    img = rng.uniform(0, 1, (24, 24))
    assert psnr(img, img.copy()) == float("inf")
    assert ssim(img, img.copy()) == 1.0


@pytest.mark.parametrize("seed", range(4))
def test_psnr_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, (17, 13))
    b = np.clip(a + rng.normal(0, 0.05, a.shape), 0, 1)
    assert psnr(a, b) == pytest.approx(psnr_loops(a, b), rel=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_ssim_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed + 10)
    a = rng.uniform(0, 1, (14, 19))
    b = np.clip(a + rng.normal(0, 0.08, a.shape), 0, 1)
    assert ssim(a, b) == pytest.approx(ssim_loops(a, b), rel=1e-9)


def test_psnr_mask_selects_pixels():
    a = np.zeros((8, 8))
    b = np.zeros((8, 8))
    b[0, 0] = 0.5  # damage one pixel
    mask = np.ones((8, 8), bool)
    mask[0, 0] = False
    assert psnr(a, b, mask) == float("inf")
    assert psnr(a, b) < 40.0
    # multichannel: mask indexes pixels, all channels compared
    a3 = np.zeros((8, 8, 3))
    b3 = np.zeros((8, 8, 3))
    b3[0, 0, 2] = 0.3
    assert psnr(a3, b3, mask) == float("inf")
    assert psnr(a3, b3, ~mask) == pytest.approx(
        10 * np.log10(1.0 / (0.3 ** 2 / 3.0)), rel=1e-12)


def test_psnr_max_value_scaling():
    a = np.zeros((4, 4))
    b = np.full((4, 4), 25.5)
    assert psnr(a, b, max_value=255.0) == pytest.approx(20.0, abs=1e-12)


def test_metric_input_validation():
    with pytest.raises(ValueError, match="shape mismatch"):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))
    with pytest.raises(ValueError, match="mask shape"):
        psnr(np.zeros((4, 4)), np.zeros((4, 4)), np.ones((2, 2), bool))
    with pytest.raises(ValueError, match="no pixels"):
        psnr(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros((4, 4), bool))
    with pytest.raises(ValueError, match="shape mismatch"):
        ssim(np.zeros((9, 9)), np.zeros((9, 8)))
    with pytest.raises(ValueError, match="2-d"):
        ssim(np.zeros((9, 9, 3)), np.zeros((9, 9, 3)))
    with pytest.raises(ValueError, match="smaller than window"):
        ssim(np.zeros((4, 4)), np.zeros((4, 4)), window=8)


def test_ssim_decreases_with_structural_damage():
    rng = np.random.default_rng(3)
    a = rng.uniform(0, 1, (32, 32))
    light = np.clip(a + rng.normal(0, 0.02, a.shape), 0, 1)
    heavy = rng.uniform(0, 1, (32, 32))
    assert ssim(a, heavy) < ssim(a, light) <= 1.0


def test_compare_material_sets_wires_channels():
    truth = fixtures.make_material_set(32)
    baked = fixtures.make_material_set(32)
    baked.roughness = np.clip(truth.roughness + 0.1, 0, 1)

    report = compare_material_sets(baked, truth)
    d = report.as_dict()
    assert set(d) == {"psnr_base_color", "psnr_roughness", "psnr_metallicity",
                      "psnr_height", "ssim_roughness", "ssim_height"}
    assert d["psnr_base_color"] == float("inf")
    assert d["psnr_height"] == float("inf")
    assert d["psnr_roughness"] < 25.0
    assert d["ssim_height"] == 1.0
    # clipping at 1.0 makes the offset non-constant, so psnr uses the mask
    manual = psnr(baked.roughness, truth.roughness, baked.mask)
    assert d["psnr_roughness"] == pytest.approx(manual, rel=1e-12)


def test_compare_material_sets_explicit_mask():
    truth = fixtures.make_material_set(16)
    baked = fixtures.make_material_set(16)
    baked.height = truth.height.copy()
    baked.height[0, 0] += 0.5
    mask = np.ones((16, 16), bool)
    mask[0, 0] = False
    report = compare_material_sets(baked, truth, mask=mask)
    assert report.psnr_height == float("inf")
    assert report.ssim_height < 1.0  # ssim ignores the mask by contract
