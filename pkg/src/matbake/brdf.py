"""GGX microfacet BRDF terms and low-discrepancy sampling helpers.

All functions are vectorized over leading dimensions. Roughness r maps to
alpha = max(r*r, MIN_ALPHA); the floor keeps the distribution and its
sample pdfs finite at r = 0 and is applied identically by the prefilter,
the environment lookup table and the reference integrator.
"""

from __future__ import annotations

import numpy as np

MIN_ALPHA = 1e-3


def roughness_to_alpha(roughness):
    """Squared roughness with a floor of MIN_ALPHA."""
    r = np.asarray(roughness, dtype=np.float64)
    return np.maximum(r * r, MIN_ALPHA)


def ggx_d(noh, alpha):
    """GGX normal distribution (Trowbridge-Reitz)."""
    noh = np.clip(noh, 0.0, 1.0)
    a2 = np.asarray(alpha, dtype=np.float64) ** 2
    d = noh * noh * (a2 - 1.0) + 1.0
    return a2 / (np.pi * d * d)


def smith_g1(nox, alpha):
    """Exact Smith masking term for GGX, one direction."""
    nox = np.clip(nox, 0.0, 1.0)
    a2 = np.asarray(alpha, dtype=np.float64) ** 2
    return 2.0 * nox / (nox + np.sqrt(a2 + (1.0 - a2) * nox * nox))


def smith_g(nol, nov, alpha):
    """Separable Smith geometry term G1(l) * G1(v)."""
    return smith_g1(nol, alpha) * smith_g1(nov, alpha)


def fresnel_schlick(f0, voh):
    """Schlick Fresnel; f0 broadcasts against voh[..., None] for RGB."""
    voh = np.clip(np.asarray(voh, dtype=np.float64), 0.0, 1.0)
    return f0 + (1.0 - f0) * (1.0 - voh) ** 5


def hammersley(count: int) -> np.ndarray:
    """First ``count`` points of the Hammersley set in [0, 1)^2: u1 = i/n,
    u2 = bit-reversed i (radical inverse base 2)."""
    i = np.arange(count, dtype=np.uint32)
    bits = i.copy()
    bits = ((bits << np.uint32(16)) | (bits >> np.uint32(16)))
    bits = ((bits & np.uint32(0x55555555)) << np.uint32(1)) | \
           ((bits & np.uint32(0xAAAAAAAA)) >> np.uint32(1))
    bits = ((bits & np.uint32(0x33333333)) << np.uint32(2)) | \
           ((bits & np.uint32(0xCCCCCCCC)) >> np.uint32(2))
    bits = ((bits & np.uint32(0x0F0F0F0F)) << np.uint32(4)) | \
           ((bits & np.uint32(0xF0F0F0F0)) >> np.uint32(4))
    bits = ((bits & np.uint32(0x00FF00FF)) << np.uint32(8)) | \
           ((bits & np.uint32(0xFF00FF00)) >> np.uint32(8))
    u2 = bits.astype(np.float64) * 2.3283064365386963e-10  # / 2^32
    u1 = i.astype(np.float64) / count
    return np.stack([u1, u2], axis=1)


def sample_ggx_half(u1, u2, alpha):
    """Map uniform (u1, u2) to GGX half vectors in tangent space (z up).

    pdf over half vectors is D(h) * cos(theta_h).
    """
    a2 = np.asarray(alpha, dtype=np.float64) ** 2
    phi = 2.0 * np.pi * np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    cos_t = np.sqrt(np.clip((1.0 - u2) / (1.0 + (a2 - 1.0) * u2), 0.0, 1.0))
    sin_t = np.sqrt(np.clip(1.0 - cos_t * cos_t, 0.0, 1.0))
    return np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=-1)


def sample_cosine(u1, u2):
    """Map uniform (u1, u2) to cosine-weighted directions in tangent space.

    pdf = cos(theta) / pi.
    """
    phi = 2.0 * np.pi * np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    sin_t = np.sqrt(np.clip(u2, 0.0, 1.0))
    cos_t = np.sqrt(np.clip(1.0 - u2, 0.0, 1.0))
    return np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=-1)


def make_onb(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Branchless orthonormal basis (tangent, bitangent) around unit normals
    (..., 3)."""
    n = np.asarray(n, dtype=np.float64)
    nx, ny, nz = n[..., 0], n[..., 1], n[..., 2]
    s = np.where(nz >= 0.0, 1.0, -1.0)
    a = -1.0 / (s + nz)
    b = nx * ny * a
    t = np.stack([1.0 + s * nx * nx * a, s * b, -s * nx], axis=-1)
    bt = np.stack([b, s + ny * ny * a, -ny], axis=-1)
    return t, bt


def to_world(local: np.ndarray, t: np.ndarray, bt: np.ndarray,
             n: np.ndarray) -> np.ndarray:
    """Rotate tangent-space vectors (..., 3) into the frame (t, bt, n)."""
    return (local[..., 0:1] * t + local[..., 1:2] * bt + local[..., 2:3] * n)


def reflect(v: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Mirror direction: 2 (v.n) n - v, both arguments pointing away from
    the surface."""
    vn = (v * n).sum(axis=-1, keepdims=True)
    return 2.0 * vn * n - v
