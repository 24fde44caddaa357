"""Image-based relighting: split-sum approximation and its Monte Carlo
reference.

Environment probes are equirectangular HDR images with +Y up: a direction
maps to u = atan2(z, x) / 2pi (wrapping) and v = acos(y) / pi, so the top
image row looks straight up. Probe width must be twice its height.

The split-sum path precomputes a GGX-prefiltered mip chain indexed by
roughness, a cosine-weighted irradiance map and a scale/bias BRDF lookup
table, then shades each pixel with two texture fetches. The reference path
integrates the same BRDF against the same probe by multiple importance
sampling (luminance-weighted light sampling balanced against cosine + GGX
BRDF sampling) with a seeded generator. Both paths share the GGX terms and
the alpha floor from the brdf module, so they converge to each other as
sample counts grow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np

from . import brdf
from .geometry import Camera
from .io import read_hdr, srgb_encode
from .raster import IntrinsicViews
from .sampling import bilinear_sample

_LUM = np.array([0.2126, 0.7152, 0.0722])


@dataclass
class EnvironmentProbe:
    """Equirectangular radiance map, linear RGB, width = 2 * height."""

    radiance: np.ndarray  # (H, 2H, 3) float32
    name: str = "probe"

    @property
    def width(self) -> int:
        return self.radiance.shape[1]

    @property
    def height(self) -> int:
        return self.radiance.shape[0]

    def validate(self) -> None:
        r = self.radiance
        if r.ndim != 3 or r.shape[2] != 3:
            raise ValueError(f"probe radiance must be (H, W, 3), got {r.shape}")
        if r.shape[1] != 2 * r.shape[0]:
            raise ValueError(
                f"probe must be 2:1 equirectangular, got {r.shape[1]}x{r.shape[0]}")
        if not np.isfinite(r).all() or r.min() < 0.0:
            raise ValueError("probe radiance must be finite and non-negative")


def load_probe(path, name: str | None = None) -> EnvironmentProbe:
    """Read a radiance HDR file as an environment probe."""
    img = read_hdr(path)
    probe = EnvironmentProbe(img.data.astype(np.float32),
                             name or str(path))
    probe.validate()
    return probe


def dir_to_uv(dirs: np.ndarray) -> np.ndarray:
    """Unit directions (..., 3) to equirectangular (u, v) in [0, 1]."""
    d = np.asarray(dirs, dtype=np.float64)
    u = np.arctan2(d[..., 2], d[..., 0]) / (2.0 * np.pi)
    u = np.mod(u, 1.0)
    v = np.arccos(np.clip(d[..., 1], -1.0, 1.0)) / np.pi
    return np.stack([u, v], axis=-1)


def uv_to_dir(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Equirectangular (u, v) to unit directions, inverse of dir_to_uv."""
    phi = 2.0 * np.pi * np.asarray(u, dtype=np.float64)
    theta = np.pi * np.asarray(v, dtype=np.float64)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), np.cos(theta), st * np.sin(phi)], axis=-1)


def sample_probe(radiance: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Bilinear probe lookup along directions; wraps in azimuth, clamps at
    the poles."""
    h, w = radiance.shape[:2]
    uv = dir_to_uv(dirs)
    x = uv[..., 0] * w - 0.5
    y = uv[..., 1] * h - 0.5
    return bilinear_sample(radiance, x, y, wrap_x=True)


def _latlong_solid_angles(height: int, width: int) -> np.ndarray:
    """Exact per-texel solid angles of an equirectangular grid, (H,) per
    row; rows sum to 4pi over the full grid."""
    i = np.arange(height, dtype=np.float64)
    return (2.0 * np.pi / width) * (
        np.cos(np.pi * i / height) - np.cos(np.pi * (i + 1) / height))


def _texel_dirs(height: int, width: int) -> np.ndarray:
    """Directions through texel centers of an equirectangular grid."""
    u = (np.arange(width, dtype=np.float64) + 0.5) / width
    v = (np.arange(height, dtype=np.float64) + 0.5) / height
    uu, vv = np.meshgrid(u, v)
    return uv_to_dir(uu, vv)


@dataclass
class PrefilteredProbe:
    """Split-sum shading tables for one probe."""

    mips: list          # level l: (H_l, W_l, 3) float32, l = 0 sharpest
    mip_roughness: np.ndarray  # (L,) roughness of each level, 0 .. 1
    irradiance: np.ndarray     # (Hi, Wi, 3) float32, = integral(L cos)/pi
    lut: np.ndarray            # (N, N, 2) float32, [nov_row, rough_col]
    name: str = "probe"
    meta: dict = field(default_factory=dict)

    @property
    def levels(self) -> int:
        return len(self.mips)


def _prefilter_level(base: np.ndarray, out_h: int, out_w: int,
                     roughness: float, samples: int) -> np.ndarray:
    """GGX-filter the base probe toward one mip level.

    Treats view = normal = reflection per output texel and averages sampled
    radiance with NoL weights normalized to sum one, so a constant probe
    prefilters to the same constant.
    """
    alpha = brdf.roughness_to_alpha(roughness)
    ham = brdf.hammersley(samples)
    h_local = brdf.sample_ggx_half(ham[:, 0], ham[:, 1], alpha)  # (S, 3)

    dirs = _texel_dirs(out_h, out_w).reshape(-1, 3)
    out = np.zeros((out_h * out_w, 3))
    chunk = 4096
    for s in range(0, dirs.shape[0], chunk):
        r = dirs[s:s + chunk]                       # (M, 3)
        t, bt = brdf.make_onb(r)
        h = (h_local[None, :, 0:1] * t[:, None]
             + h_local[None, :, 1:2] * bt[:, None]
             + h_local[None, :, 2:3] * r[:, None])  # (M, S, 3)
        l = brdf.reflect(r[:, None, :], h)
        nol = np.clip((r[:, None, :] * l).sum(axis=-1), 0.0, None)
        li = sample_probe(base, l)                  # (M, S, 3)
        wsum = nol.sum(axis=1)
        num = (li * nol[:, :, None]).sum(axis=1)
        out[s:s + chunk] = num / np.maximum(wsum, 1e-12)[:, None]
    return out.reshape(out_h, out_w, 3).astype(np.float32)


def _irradiance_map(base: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Cosine-weighted average radiance per normal direction. Dividing the
    cosine-weighted integral by the integral of the cosine (pi) makes the
    diffuse term albedo * E with no extra factors."""
    in_h, in_w = min(32, base.shape[0]), min(64, base.shape[1])
    if (in_h, in_w) != base.shape[:2]:
        src = cv2.resize(base, (in_w, in_h), interpolation=cv2.INTER_AREA)
    else:
        src = base
    l_in = src.reshape(-1, 3).astype(np.float64)
    d_in = _texel_dirs(in_h, in_w).reshape(-1, 3)
    omega = np.repeat(_latlong_solid_angles(in_h, in_w), in_w)

    n_out = _texel_dirs(out_h, out_w).reshape(-1, 3)
    cosw = np.clip(n_out @ d_in.T, 0.0, None) * omega[None, :]
    num = cosw @ l_in
    den = cosw.sum(axis=1)
    out = num / np.maximum(den, 1e-12)[:, None]
    return out.reshape(out_h, out_w, 3).astype(np.float32)


def _brdf_lut(size: int, samples: int) -> np.ndarray:
    """Scale/bias table for the split-sum specular term, indexed by
    [nov row, roughness col] at cell centers."""
    ham = brdf.hammersley(samples)
    grid = (np.arange(size, dtype=np.float64) + 0.5) / size
    lut = np.zeros((size, size, 2))
    for j, rough in enumerate(grid):
        alpha = brdf.roughness_to_alpha(rough)
        h = brdf.sample_ggx_half(ham[:, 0], ham[:, 1], alpha)  # (S, 3)
        nov = grid                                              # (N,)
        v = np.stack([np.sqrt(np.clip(1 - nov**2, 0, 1)),
                      np.zeros_like(nov), nov], axis=1)         # (N, 3)
        l = brdf.reflect(v[:, None, :], h[None, :, :])          # (N, S, 3)
        nol = l[:, :, 2]
        noh = np.clip(h[None, :, 2], 0.0, 1.0)
        voh = np.clip((v[:, None, :] * h[None, :, :]).sum(-1), 1e-9, 1.0)
        good = nol > 0.0
        g = brdf.smith_g(np.clip(nol, 0, 1), nov[:, None], alpha)
        gvis = np.where(good, g * voh / np.maximum(noh * nov[:, None], 1e-9), 0.0)
        fc = (1.0 - voh) ** 5
        lut[:, j, 0] = ((1.0 - fc) * gvis).mean(axis=1)
        lut[:, j, 1] = (fc * gvis).mean(axis=1)
    return lut.astype(np.float32)


def prefilter(probe: EnvironmentProbe, *, levels: int = 6, samples: int = 256,
              base_width: int = 256, irradiance_width: int = 32,
              lut_size: int = 64, lut_samples: int = 512) -> PrefilteredProbe:
    """Build the split-sum tables for a probe.

    Level l gets roughness l / (levels - 1); level 0 is the base probe
    itself (a mirror needs no filtering), resampled to base_width columns.
    """
    probe.validate()
    if levels < 2:
        raise ValueError(f"need at least 2 mip levels, got {levels}")
    w0 = int(base_width)
    h0 = w0 // 2
    if (h0, w0) == probe.radiance.shape[:2]:
        base = probe.radiance.astype(np.float32)
    else:
        interp = cv2.INTER_AREA if w0 < probe.width else cv2.INTER_LINEAR
        base = cv2.resize(probe.radiance.astype(np.float32), (w0, h0),
                          interpolation=interp)

    rough = np.arange(levels, dtype=np.float64) / (levels - 1)
    mips = [base.copy()]
    for lv in range(1, levels):
        w = max(w0 >> lv, 8)
        mips.append(_prefilter_level(base, w // 2, w, float(rough[lv]), samples))

    irr = _irradiance_map(base, irradiance_width // 2, irradiance_width)
    lut = _brdf_lut(lut_size, lut_samples)
    meta = {"levels": levels, "samples": samples, "base_width": w0,
            "irradiance_width": irradiance_width, "lut_size": lut_size,
            "lut_samples": lut_samples}
    return PrefilteredProbe(mips, rough, irr, lut, probe.name, meta)


def _shading_inputs(views: IntrinsicViews, camera: Camera):
    """Per-covered-pixel unit normals, view vectors and material scalars."""
    gb = views.gbuffer
    mask = gb.mask
    n = gb.normal[mask].astype(np.float64)
    n /= np.maximum(np.sqrt((n * n).sum(axis=1)), 1e-12)[:, None]
    p = gb.position[mask].astype(np.float64)
    v = camera.position[None, :] - p
    v /= np.maximum(np.sqrt((v * v).sum(axis=1)), 1e-12)[:, None]
    base = views.base_color[mask].astype(np.float64)
    rough = views.roughness[mask].astype(np.float64)
    metal = views.metallicity[mask].astype(np.float64)
    return mask, n, v, base, rough, metal


def shade_splitsum(views: IntrinsicViews, pref: PrefilteredProbe,
                   camera: Camera) -> np.ndarray:
    """Relight one view with the prefiltered tables. Returns linear RGB
    (H, W, 3) float32, zero on background pixels."""
    mask, n, v, base, rough, metal = _shading_inputs(views, camera)
    nov = np.clip((n * v).sum(axis=1), 1e-4, 1.0)
    r_dir = brdf.reflect(v, n)
    r_dir /= np.maximum(np.sqrt((r_dir * r_dir).sum(axis=1)), 1e-12)[:, None]

    diffuse = (1.0 - metal)[:, None] * base * \
        sample_probe(pref.irradiance, n)

    lv = rough * (pref.levels - 1)
    lo = np.clip(np.floor(lv).astype(np.int64), 0, pref.levels - 2)
    frac = np.clip(lv - lo, 0.0, 1.0)
    pre = np.zeros_like(diffuse)
    for m in range(pref.levels):
        sel_lo = lo == m
        sel_hi = (lo + 1) == m
        if sel_lo.any():
            pre[sel_lo] += (1.0 - frac[sel_lo, None]) * \
                sample_probe(pref.mips[m], r_dir[sel_lo])
        if sel_hi.any():
            pre[sel_hi] += frac[sel_hi, None] * \
                sample_probe(pref.mips[m], r_dir[sel_hi])

    size = pref.lut.shape[0]
    ab = bilinear_sample(pref.lut, rough * size - 0.5, nov * size - 0.5)
    f0 = 0.04 * (1.0 - metal)[:, None] + base * metal[:, None]
    spec = pre * (f0 * ab[:, 0:1] + ab[:, 1:2])

    out = np.zeros(mask.shape + (3,), dtype=np.float32)
    out[mask] = (diffuse + spec).astype(np.float32)
    return out


class _ProbeSampler:
    """Luminance-proportional texel sampling over an equirectangular probe.

    Texels are drawn with probability proportional to luminance times
    solid angle; the sampled direction is uniform in the texel's (u, v)
    rectangle, giving the solid-angle density P * W * H / (2 pi^2 sin
    theta). A black probe falls back to solid-angle-uniform sampling.
    """

    def __init__(self, radiance: np.ndarray):
        self.h, self.w = radiance.shape[:2]
        lum = np.maximum(radiance.astype(np.float64) @ _LUM, 0.0)
        omega = _latlong_solid_angles(self.h, self.w)
        weight = lum * omega[:, None]
        total = weight.sum()
        if total <= 0.0:
            weight = np.repeat(omega[:, None], self.w, axis=1)
            total = weight.sum()
        self.prob = (weight / total).reshape(-1)
        self.cdf = np.cumsum(self.prob)
        self.cdf[-1] = 1.0

    def sample(self, u_pick, u_u, u_v):
        """Map uniforms to directions and their pdf (per steradian)."""
        idx = np.searchsorted(self.cdf, u_pick, side="right")
        idx = np.minimum(idx, self.prob.size - 1)
        ty, tx = np.divmod(idx, self.w)
        u = (tx + u_u) / self.w
        v = (ty + u_v) / self.h
        d = uv_to_dir(u, v)
        return d, self._pdf_from_texel(idx, d)

    def _pdf_from_texel(self, idx, d):
        sin_t = np.maximum(np.sqrt(np.clip(1.0 - d[..., 1] ** 2, 0.0, 1.0)), 1e-9)
        return self.prob[idx] * (self.w * self.h) / (2.0 * np.pi ** 2 * sin_t)

    def pdf(self, d):
        """Density of ``sample`` at arbitrary directions."""
        uv = dir_to_uv(d)
        tx = np.minimum((uv[..., 0] * self.w).astype(np.int64), self.w - 1)
        ty = np.minimum((uv[..., 1] * self.h).astype(np.int64), self.h - 1)
        return self._pdf_from_texel(ty * self.w + tx, d)


def _eval_brdf(n, v, l, base, rough_alpha, metal, nov):
    """Cook-Torrance f(v, l) per channel and the combined sampling pdf of
    the 0.5 cosine + 0.5 GGX mixture. Returns (f, pdf, nol)."""
    nol = (n * l).sum(axis=-1)
    h = l + v
    h /= np.maximum(np.sqrt((h * h).sum(axis=-1, keepdims=True)), 1e-12)
    noh = np.clip((n * h).sum(axis=-1), 0.0, 1.0)
    voh = np.clip((v * h).sum(axis=-1), 1e-9, 1.0)

    lit = nol > 0.0
    noln = np.clip(nol, 0.0, 1.0)
    d = brdf.ggx_d(noh, rough_alpha)
    g = brdf.smith_g(noln, nov, rough_alpha)
    f0 = 0.04 * (1.0 - metal)[..., None] + base * metal[..., None]
    fr = brdf.fresnel_schlick(f0, voh[..., None])
    spec = fr * (d * g / np.maximum(4.0 * nov * noln, 1e-9))[..., None]
    diff = (1.0 - metal)[..., None] * base / np.pi
    f = np.where(lit[..., None], diff + spec, 0.0)

    pdf_cos = noln / np.pi
    pdf_ggx = d * noh / np.maximum(4.0 * voh, 1e-9)
    pdf = np.where(lit, 0.5 * pdf_cos + 0.5 * pdf_ggx, 0.0)
    return f, pdf, noln


def shade_reference_mc(views: IntrinsicViews, probe: EnvironmentProbe,
                       camera: Camera, *, samples: int = 1024, seed: int = 0,
                       chunk: int = 64) -> np.ndarray:
    """Relight one view by multiple importance sampling the probe.

    Half the samples pick probe texels by luminance, half sample the BRDF
    (cosine and GGX lobes in equal shares); both halves are combined with
    the balance heuristic. Deterministic for a given seed. Returns linear
    RGB (H, W, 3) float32.
    """
    probe.validate()
    if samples < 2 or samples % 2:
        raise ValueError(f"sample count must be even and >= 2, got {samples}")
    mask, n, v, base, rough, metal = _shading_inputs(views, camera)
    count = n.shape[0]
    out = np.zeros(mask.shape + (3,), dtype=np.float32)
    if count == 0:
        return out

    alpha = brdf.roughness_to_alpha(rough)[:, None]
    nov = np.clip((n * v).sum(axis=1), 1e-4, 1.0)[:, None]
    dist = _ProbeSampler(probe.radiance)
    rng = np.random.default_rng(seed)
    t, bt = brdf.make_onb(n)
    half = samples // 2
    acc = np.zeros((count, 3))

    n3, v3 = n[:, None, :], v[:, None, :]
    done = 0
    while done < half:  # light-sampling half
        s = min(chunk, half - done)
        l, pl = dist.sample(rng.random((count, s)), rng.random((count, s)),
                            rng.random((count, s)))
        li = sample_probe(probe.radiance, l)
        f, pb, nol = _eval_brdf(n3, v3, l, base[:, None, :], alpha,
                                metal[:, None], nov)
        w = pl / np.maximum(pl + pb, 1e-300)
        good = (pl > 0.0) & (nol > 0.0)
        contrib = np.where(good[..., None],
                           f * (w * nol / np.maximum(pl, 1e-300))[..., None] * li,
                           0.0)
        acc += contrib.sum(axis=1)
        done += s

    done = 0
    while done < half:  # BRDF-sampling half
        s = min(chunk, half - done)
        u1 = rng.random((count, s))
        u2 = rng.random((count, s))
        pick_ggx = rng.random((count, s)) < 0.5
        loc_cos = brdf.sample_cosine(u1, u2)
        loc_h = brdf.sample_ggx_half(u1, u2, alpha)
        l_cos = brdf.to_world(loc_cos, t[:, None], bt[:, None], n3)
        h_w = brdf.to_world(loc_h, t[:, None], bt[:, None], n3)
        l_ggx = brdf.reflect(v3, h_w)
        l = np.where(pick_ggx[..., None], l_ggx, l_cos)
        f, pb, nol = _eval_brdf(n3, v3, l, base[:, None, :], alpha,
                                metal[:, None], nov)
        pl = dist.pdf(l)
        li = sample_probe(probe.radiance, l)
        w = pb / np.maximum(pl + pb, 1e-300)
        good = (pb > 0.0) & (nol > 0.0)
        contrib = np.where(good[..., None],
                           f * (w * nol / np.maximum(pb, 1e-300))[..., None] * li,
                           0.0)
        acc += contrib.sum(axis=1)
        done += s

    out[mask] = (acc / half).astype(np.float32)
    return out


def filmic_curve(x: np.ndarray) -> np.ndarray:
    """Reinhard-style rational curve x / (1 + x), applied per channel."""
    x = np.asarray(x, dtype=np.float64)
    return x / (1.0 + x)


def tonemap(linear: np.ndarray, exposure: float = 1.0) -> np.ndarray:
    """Exposure, filmic curve, then sRGB encoding; output in [0, 1]."""
    if not (exposure > 0.0 and np.isfinite(exposure)):
        raise ValueError(f"exposure must be positive, got {exposure}")
    x = np.clip(np.asarray(linear, dtype=np.float64), 0.0, None) * exposure
    return srgb_encode(filmic_curve(x)).astype(np.float32)
