"""Image comparison metrics: masked PSNR and windowed SSIM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None,
         max_value: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB over the masked region (all pixels
    if no mask). Identical inputs give inf. Multichannel images compare all
    channels of a masked pixel."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape[:mask.ndim]:
            raise ValueError(f"mask shape {mask.shape} does not match {a.shape}")
        a = a[mask]
        b = b[mask]
        if a.size == 0:
            raise ValueError("mask selects no pixels")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(max_value * max_value / mse)


def ssim(a: np.ndarray, b: np.ndarray, window: int = 8,
         k1: float = 0.01, k2: float = 0.03, max_value: float = 1.0) -> float:
    """Mean structural similarity over all full sliding windows.

    Uniform window statistics (population variance), constants
    C1 = (k1 L)^2 and C2 = (k2 L)^2. Grayscale input only; average the
    channel scores for color. Identical inputs score exactly 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError(f"ssim expects a 2-d image, got shape {a.shape}")
    if min(a.shape) < window:
        raise ValueError(f"image {a.shape} smaller than window {window}")

    wa = np.lib.stride_tricks.sliding_window_view(a, (window, window))
    wb = np.lib.stride_tricks.sliding_window_view(b, (window, window))
    mu_a = wa.mean(axis=(2, 3))
    mu_b = wb.mean(axis=(2, 3))
    var_a = (wa * wa).mean(axis=(2, 3)) - mu_a * mu_a
    var_b = (wb * wb).mean(axis=(2, 3)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(2, 3)) - mu_a * mu_b

    c1 = (k1 * max_value) ** 2
    c2 = (k2 * max_value) ** 2
    score = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / \
        ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
    return float(score.mean())


@dataclass
class MetricReport:
    """Per-channel PSNR plus SSIM on the luminance-free scalar channels."""

    psnr_base_color: float
    psnr_roughness: float
    psnr_metallicity: float
    psnr_height: float
    ssim_roughness: float
    ssim_height: float

    def as_dict(self) -> dict:
        return {
            "psnr_base_color": self.psnr_base_color,
            "psnr_roughness": self.psnr_roughness,
            "psnr_metallicity": self.psnr_metallicity,
            "psnr_height": self.psnr_height,
            "ssim_roughness": self.ssim_roughness,
            "ssim_height": self.ssim_height,
        }


def compare_material_sets(baked, truth, mask: np.ndarray | None = None) -> MetricReport:
    """PSNR per channel on masked texels (defaults to the baked mask) and
    SSIM on the full roughness and height channels."""
    if mask is None:
        mask = baked.mask
    return MetricReport(
        psnr_base_color=psnr(baked.base_color, truth.base_color, mask),
        psnr_roughness=psnr(baked.roughness, truth.roughness, mask),
        psnr_metallicity=psnr(baked.metallicity, truth.metallicity, mask),
        psnr_height=psnr(baked.height, truth.height, mask),
        ssim_roughness=ssim(baked.roughness, truth.roughness),
        ssim_height=ssim(baked.height, truth.height),
    )
