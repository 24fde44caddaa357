"""Height map to tangent normal map conversion and its inverse.

Heights live in [0, 1] on the atlas with a separate world amplitude; the
surface is z = amplitude * h(u, v) over the unit UV square. Normals are
stored encoded as n * 0.5 + 0.5 with n_z > 0.

The inverse integrates the slope field p = -nx/nz, q = -ny/nz: the mean
slope is removed and reattached as an exact linear term (so pure ramps
survive the periodic solver), the fluctuation is integrated by a least
squares FFT Poisson solve whose frequency response matches the forward
central differences, and the result is renormalized to [0, 1] with the
value range becoming the new amplitude.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class HeightMap:
    """Scalar height field in [0, 1] plus its world-space amplitude."""

    values: np.ndarray  # (H, W) float64
    amplitude: float = 1.0
    diagnostics: dict = field(default_factory=dict)

    def validate(self) -> None:
        v = self.values
        if v.ndim != 2:
            raise ValueError(f"height map must be 2-d, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("height map contains non-finite values")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("height map values must lie in [0, 1]")
        if not (self.amplitude > 0.0 and np.isfinite(self.amplitude)):
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")


@dataclass
class TangentNormalMap:
    """Encoded tangent-space normals, values = n * 0.5 + 0.5, n_z > 0."""

    values: np.ndarray  # (H, W, 3) float64

    def validate(self) -> None:
        v = self.values
        if v.ndim != 3 or v.shape[2] != 3:
            raise ValueError(f"normal map must be (H, W, 3), got {v.shape}")
        if not np.isfinite(v).all():
            raise ValueError("normal map contains non-finite values")
        n = decode_normal(v)
        length = np.sqrt((n * n).sum(axis=2))
        if np.abs(length - 1.0).max() > 1e-3:
            raise ValueError("normal map vectors are not unit length")
        if n[:, :, 2].min() <= 0.0:
            raise ValueError("normal map has non-positive z components")


def encode_normal(n: np.ndarray) -> np.ndarray:
    """Map unit vectors (..., 3) to [0, 1] storage as n * 0.5 + 0.5."""
    return np.asarray(n, dtype=np.float64) * 0.5 + 0.5


def decode_normal(values: np.ndarray) -> np.ndarray:
    """Inverse of encode_normal (no renormalization)."""
    return np.asarray(values, dtype=np.float64) * 2.0 - 1.0


def _grad_uv(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient per UV unit: interior texels use the
    half step (h[i+1] - h[i-1]) / 2, borders the full one-sided step, both
    scaled by texels-per-UV so a ramp h = u has constant gradient 1."""
    rows, cols = h.shape
    gv, gu = np.gradient(h)
    return gu * cols, gv * rows


def height_to_normal(height: HeightMap) -> TangentNormalMap:
    """Differentiate the height field into a tangent normal map."""
    height.validate()
    h = np.asarray(height.values, dtype=np.float64)
    gu, gv = _grad_uv(h)
    a = float(height.amplitude)
    n = np.stack([-a * gu, -a * gv, np.ones_like(h)], axis=2)
    n /= np.sqrt((n * n).sum(axis=2))[:, :, None]
    return TangentNormalMap(encode_normal(n))


def _poisson_solve(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Least squares periodic integration of per-texel slopes (p, q).

    Central differences act on DFT modes by i*sin(2*pi*k/N); solving the
    normal equations per mode gives H = -i (sx P + sy Q) / (sx^2 + sy^2).
    Modes the operator cannot see (DC and the Nyquist combinations where
    both sines vanish) are set to zero, the minimum-norm choice.
    """
    rows, cols = p.shape
    pf = np.fft.fft2(p)
    qf = np.fft.fft2(q)
    sx = np.sin(2.0 * np.pi * np.fft.fftfreq(cols))[None, :]
    sy = np.sin(2.0 * np.pi * np.fft.fftfreq(rows))[:, None]
    denom = sx * sx + sy * sy
    with np.errstate(invalid="ignore", divide="ignore"):
        hf = -1j * (sx * pf + sy * qf) / denom
    hf = np.where(denom > 0.0, hf, 0.0)
    return np.real(np.fft.ifft2(hf))


def normal_to_height(normals: TangentNormalMap) -> HeightMap:
    """Integrate a tangent normal map back into a height field.

    The output is defined up to an additive constant; it is renormalized to
    span [0, 1] and the spanned range is returned as the amplitude. A flat
    input gives constant 0.5 with amplitude 1. The RMS curl of the slope
    field (0 for any true gradient field) is reported in diagnostics.
    """
    normals.validate()
    n = decode_normal(normals.values)
    rows, cols = n.shape[:2]
    nz = np.maximum(n[:, :, 2], 1e-9)
    # slopes per texel step
    p = -n[:, :, 0] / nz / cols
    q = -n[:, :, 1] / nz / rows

    mp = float(p.mean())
    mq = float(q.mean())
    h = _poisson_solve(p - mp, q - mq)
    h += mp * np.arange(cols, dtype=np.float64)[None, :]
    h += mq * np.arange(rows, dtype=np.float64)[:, None]

    gv, gu = np.gradient(h)
    curl = np.gradient(q, axis=1) - np.gradient(p, axis=0)
    diag = {
        "curl_rms": float(np.sqrt((curl ** 2).mean())),
        "residual_rms": float(np.sqrt(((gu - p) ** 2 + (gv - q) ** 2).mean())),
    }

    rng = float(h.max() - h.min())
    if rng < 1e-12:
        return HeightMap(np.full_like(h, 0.5), 1.0, diag)
    values = (h - h.min()) / rng
    np.clip(values, 0.0, 1.0, out=values)
    return HeightMap(values, rng, diag)


def pack_hrm(height: np.ndarray, roughness: np.ndarray,
             metallicity: np.ndarray) -> np.ndarray:
    """Interleave three scalar maps into one (H, W, 3) array in the channel
    order height, roughness, metallicity."""
    h = np.asarray(height)
    r = np.asarray(roughness)
    m = np.asarray(metallicity)
    if not (h.shape == r.shape == m.shape) or h.ndim != 2:
        raise ValueError(
            f"pack_hrm needs three equal 2-d maps, got {h.shape}, {r.shape}, {m.shape}")
    return np.stack([h, r, m], axis=2)


def unpack_hrm(packed: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split an (H, W, 3) array back into (height, roughness, metallicity)."""
    p = np.asarray(packed)
    if p.ndim != 3 or p.shape[2] != 3:
        raise ValueError(f"packed map must be (H, W, 3), got {p.shape}")
    return p[:, :, 0].copy(), p[:, :, 1].copy(), p[:, :, 2].copy()
