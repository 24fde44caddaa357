"""Derivative-weighted splatting of per-view intrinsics into a UV atlas.

Every covered view pixel lands in exactly one atlas texel (point splatting
at the pixel's interpolated UV). Its weight is the inverse of the UV
footprint of the pixel measured in texels, so views that sample a surface
region densely (seen head-on, up close) dominate views that smear many
texels across one pixel (grazing, far away).

Views can be upscaled before splatting so that more than one sample lands
per texel. Upscaling interpolates the rasterized G-buffer; at silhouettes
and UV chart seams interpolation would blend unrelated surface points, so
each source 2x2 cell is checked for UV coherence against its own
derivatives and incoherent cells fall back to nearest-neighbor samples.

Accumulation is float64. Per-view partial sums are merged per texel in
ascending value order, which makes the result bit-identical under any
permutation of the input view list and any thread count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .inpaint import inpaint_masked
from .raster import IntrinsicViews
from .sampling import upscale_field

log = logging.getLogger(__name__)

WEIGHT_EPS = 1e-8
WEIGHT_CAP = 1e4
N_CHANNELS = 6  # base rgb, roughness, metallicity, height


@dataclass
class AccumAtlas:
    """Running weighted sums for one atlas. ``sums`` holds weight*value per
    channel, ``wsum`` the total weight; value = sums / wsum on normalize."""

    resolution: int
    sums: np.ndarray  # (R, R, 6) float64
    wsum: np.ndarray  # (R, R) float64
    dropped_uv: int = 0

    @classmethod
    def empty(cls, resolution: int) -> "AccumAtlas":
        if resolution < 1:
            raise ValueError(f"atlas resolution must be positive, got {resolution}")
        r = int(resolution)
        return cls(r, np.zeros((r, r, N_CHANNELS)), np.zeros((r, r)))


@dataclass
class MaterialSet:
    """Baked PBR channels on a square UV atlas, all values in [0, 1].

    ``mask`` marks texels carrying defined values. After normalize() it
    equals splat coverage; after inpainting it is all True and the original
    coverage moves to diagnostics["covered_mask"].
    """

    resolution: int
    base_color: np.ndarray    # (R, R, 3) float64
    roughness: np.ndarray     # (R, R) float64
    metallicity: np.ndarray   # (R, R) float64
    height: np.ndarray        # (R, R) float64
    mask: np.ndarray          # (R, R) bool
    diagnostics: dict = field(default_factory=dict)

    def channels(self) -> np.ndarray:
        """Stack all six channels into an (R, R, 6) array."""
        return np.concatenate(
            [self.base_color,
             self.roughness[:, :, None],
             self.metallicity[:, :, None],
             self.height[:, :, None]], axis=2)

    @classmethod
    def from_channels(cls, chan: np.ndarray, mask: np.ndarray,
                      diagnostics: dict | None = None) -> "MaterialSet":
        r = chan.shape[0]
        return cls(r, chan[:, :, 0:3].copy(), chan[:, :, 3].copy(),
                   chan[:, :, 4].copy(), chan[:, :, 5].copy(),
                   mask.copy(), dict(diagnostics or {}))

    def validate(self) -> None:
        r = self.resolution
        shapes = {
            "base_color": (self.base_color, (r, r, 3)),
            "roughness": (self.roughness, (r, r)),
            "metallicity": (self.metallicity, (r, r)),
            "height": (self.height, (r, r)),
            "mask": (self.mask, (r, r)),
        }
        for name, (arr, want) in shapes.items():
            if arr.shape != want:
                raise ValueError(f"{name} has shape {arr.shape}, expected {want}")
        for name in ("base_color", "roughness", "metallicity", "height"):
            arr = shapes[name][0]
            vals = arr[self.mask]
            if vals.size and (not np.isfinite(vals).all()
                              or vals.min() < 0.0 or vals.max() > 1.0):
                raise ValueError(f"{name} has values outside [0, 1] on masked texels")


def splat_weight(duv_dx: np.ndarray, duv_dy: np.ndarray,
                 atlas_resolution: int) -> np.ndarray:
    """Inverse-footprint splat weight.

    Derivatives are per-pixel UV steps; multiplied by the atlas resolution
    they become texel steps. Weight is 1 / (max footprint + 1e-8) capped at
    1e4; non-finite derivatives give weight 0.
    """
    dx = np.asarray(duv_dx, dtype=np.float64) * atlas_resolution
    dy = np.asarray(duv_dy, dtype=np.float64) * atlas_resolution
    fx = np.sqrt(dx[..., 0] ** 2 + dx[..., 1] ** 2)
    fy = np.sqrt(dy[..., 0] ** 2 + dy[..., 1] ** 2)
    foot = np.maximum(fx, fy)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.minimum(1.0 / (foot + WEIGHT_EPS), WEIGHT_CAP)
    return np.where(np.isfinite(foot), w, 0.0)


def _coherent_cells(mask: np.ndarray, uv: np.ndarray,
                    duv_dx: np.ndarray, duv_dy: np.ndarray) -> np.ndarray:
    """Flag 2x2 source cells whose corner UVs agree with the cell's own
    derivatives. Returns (H-1, W-1) bool; incoherent cells straddle chart
    seams or silhouettes where interpolation would invent texels."""
    uv64 = uv.astype(np.float64)
    all4 = mask[:-1, :-1] & mask[:-1, 1:] & mask[1:, :-1] & mask[1:, 1:]

    def step_err(actual, predicted):
        d = actual - predicted
        return np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)

    dx = duv_dx[:-1, :-1].astype(np.float64)
    dy = duv_dy[:-1, :-1].astype(np.float64)
    err = np.maximum(
        np.maximum(step_err(uv64[:-1, 1:], uv64[:-1, :-1] + dx),
                   step_err(uv64[1:, 1:], uv64[1:, :-1] + dx)),
        np.maximum(step_err(uv64[1:, :-1], uv64[:-1, :-1] + dy),
                   step_err(uv64[1:, 1:], uv64[:-1, 1:] + dy)))
    ndx = np.sqrt(dx[..., 0] ** 2 + dx[..., 1] ** 2)
    ndy = np.sqrt(dy[..., 0] ** 2 + dy[..., 1] ** 2)
    tol = 2.0 * (ndx + ndy) + 1e-7
    return all4 & (err <= tol)


def _upscaled_fields(views: IntrinsicViews, chan: np.ndarray, factor: int):
    """Interpolate G-buffer fields by ``factor`` with per-cell coherence
    gating. Returns (chan, uv, duv_dx, duv_dy, mask) at the upscaled size."""
    gb = views.gbuffer
    mask = gb.mask
    lin = {
        "chan": upscale_field(chan, factor, "bilinear"),
        "uv": upscale_field(gb.uv, factor, "bilinear"),
        "dx": upscale_field(gb.duv_dx, factor, "bilinear"),
        "dy": upscale_field(gb.duv_dy, factor, "bilinear"),
    }
    nea = {
        "chan": upscale_field(chan, factor, "nearest"),
        "uv": upscale_field(gb.uv, factor, "nearest"),
        "dx": upscale_field(gb.duv_dx, factor, "nearest"),
        "dy": upscale_field(gb.duv_dy, factor, "nearest"),
    }
    mask_up = upscale_field(mask.astype(np.float32), factor, "nearest") > 0.5

    # a destination sample interpolates source cell (floor(s), floor(s)+1)
    # with s = (d + 0.5)/factor - 0.5; mark it linear only if that cell is
    # coherent, clamping cell indices at the borders like the resampler does
    h, w = mask.shape
    coherent = _coherent_cells(mask, gb.uv, gb.duv_dx, gb.duv_dy)
    didx = np.arange(h * factor, dtype=np.float64)
    src = (didx + 0.5) / factor - 0.5
    cell_y = np.clip(np.floor(src).astype(np.int64), 0, h - 2)
    didx = np.arange(w * factor, dtype=np.float64)
    src = (didx + 0.5) / factor - 0.5
    cell_x = np.clip(np.floor(src).astype(np.int64), 0, w - 2)
    use_lin = coherent[np.ix_(cell_y, cell_x)]

    sel3 = use_lin[:, :, None]
    out_chan = np.where(sel3, lin["chan"], nea["chan"])
    out_uv = np.where(sel3, lin["uv"], nea["uv"])
    out_dx = np.where(sel3, lin["dx"], nea["dx"])
    out_dy = np.where(sel3, lin["dy"], nea["dy"])
    return out_chan, out_uv, out_dx, out_dy, mask_up


def splat_view(views: IntrinsicViews, atlas: AccumAtlas, upscale: int = 1) -> AccumAtlas:
    """Splat one view's intrinsics into ``atlas`` (mutated and returned)."""
    if upscale < 1:
        raise ValueError(f"upscale factor must be >= 1, got {upscale}")
    gb = views.gbuffer
    hw = gb.mask.shape
    if views.base_color.shape != hw + (3,):
        raise ValueError(
            f"base_color shape {views.base_color.shape} does not match "
            f"G-buffer {hw} with 3 channels")
    for name in ("roughness", "metallicity", "height"):
        if getattr(views, name).shape != hw:
            raise ValueError(
                f"{name} shape {getattr(views, name).shape} does not match "
                f"G-buffer {hw}")
    res = atlas.resolution
    chan = np.concatenate(
        [views.base_color,
         views.roughness[:, :, None],
         views.metallicity[:, :, None],
         views.height[:, :, None]], axis=2).astype(np.float32)

    if upscale == 1:
        c, uv, dx, dy, m = chan, gb.uv, gb.duv_dx, gb.duv_dy, gb.mask
    else:
        c, uv, dx, dy, m = _upscaled_fields(views, chan, upscale)
        # one source pixel becomes upscale^2 samples; its UV footprint in
        # texels is unchanged but the per-sample step shrinks accordingly
        dx = dx / upscale
        dy = dy / upscale

    m = m.reshape(-1)
    uv = uv.reshape(-1, 2).astype(np.float64)
    w = splat_weight(dx.reshape(-1, 2), dy.reshape(-1, 2), res)
    c = c.reshape(-1, N_CHANNELS).astype(np.float64)

    u, v = uv[:, 0], uv[:, 1]
    in_range = (u >= 0.0) & (u <= 1.0) & (v >= 0.0) & (v <= 1.0)
    atlas.dropped_uv += int(np.count_nonzero(m & ~in_range))
    keep = m & in_range & (w > 0.0)
    if not keep.any():
        return atlas

    u, v, w, c = u[keep], v[keep], w[keep], c[keep]
    col = np.minimum((u * res).astype(np.int64), res - 1)
    row = np.minimum((v * res).astype(np.int64), res - 1)
    idx = row * res + col
    n = res * res
    atlas.wsum += np.bincount(idx, weights=w, minlength=n).reshape(res, res)
    for k in range(N_CHANNELS):
        atlas.sums[:, :, k] += np.bincount(
            idx, weights=w * c[:, k], minlength=n).reshape(res, res)
    return atlas


def normalize(atlas: AccumAtlas) -> MaterialSet:
    """Divide accumulated sums by weights. Uncovered texels get value 0 and
    mask False; covered values are clipped to [0, 1]."""
    mask = atlas.wsum > 0.0
    denom = np.where(mask, atlas.wsum, 1.0)
    chan = atlas.sums / denom[:, :, None]
    chan[~mask] = 0.0
    np.clip(chan, 0.0, 1.0, out=chan)
    diag = {
        "coverage_fraction": float(np.count_nonzero(mask)) / mask.size,
        "dropped_uv": atlas.dropped_uv,
    }
    return MaterialSet.from_channels(chan, mask, diag)


def inpaint_uncovered(materials: MaterialSet, radius: int = 4) -> MaterialSet:
    """Fill unmasked texels by fast-marching from the covered region.

    Covered texels are bit-identical to the input; the returned mask is all
    True and the pre-fill coverage is kept in diagnostics["covered_mask"].
    A fully uncovered set is returned unchanged with a warning.
    """
    diag = dict(materials.diagnostics)
    diag["covered_mask"] = materials.mask.copy()
    if not materials.mask.any():
        log.warning("inpaint: no covered texels, returning input unchanged")
        out = MaterialSet.from_channels(materials.channels(), materials.mask, diag)
        return out
    filled = inpaint_masked(materials.channels(), materials.mask, radius)
    np.clip(filled, 0.0, 1.0, out=filled)
    filled[materials.mask] = materials.channels()[materials.mask]
    mask = np.ones_like(materials.mask)
    return MaterialSet.from_channels(filled, mask, diag)


def merge_atlases(partials: list[AccumAtlas]) -> AccumAtlas:
    """Combine per-view partial sums into one atlas.

    Each texel's addends are sorted ascending before summation. Floating
    point addition is commutative, so the sorted order is a canonical one
    and the merged atlas is bit-identical under any reordering of
    ``partials`` (hence of the input views, and of thread schedules).
    """
    if not partials:
        raise ValueError("merge_atlases needs at least one partial atlas")
    res = partials[0].resolution
    for p in partials:
        if p.resolution != res:
            raise ValueError("partial atlases disagree on resolution")
    out = AccumAtlas.empty(res)
    out.dropped_uv = sum(p.dropped_uv for p in partials)
    sums = np.sort(np.stack([p.sums for p in partials]), axis=0)
    wsum = np.sort(np.stack([p.wsum for p in partials]), axis=0)
    for i in range(len(partials)):
        out.sums += sums[i]
        out.wsum += wsum[i]
    return out


def bake(mesh, cameras, views: list[IntrinsicViews], atlas_resolution: int,
         upscale: int = 4, inpaint_radius: int = 4, *,
         threads: int = 1) -> MaterialSet:
    """Full bake: splat every view, merge canonically, normalize, inpaint.

    ``mesh`` and ``cameras`` are the scene the views were rendered from;
    they are used for validation and coverage diagnostics only, the pixel
    data comes from ``views``. Output is independent of view order and of
    ``threads``.
    """
    if len(views) == 0:
        raise ValueError("bake needs at least one view")
    if len(cameras) != len(views):
        raise ValueError(
            f"got {len(cameras)} cameras for {len(views)} views")

    def one(view: IntrinsicViews) -> AccumAtlas:
        return splat_view(view, AccumAtlas.empty(atlas_resolution), upscale)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(one, views))
    else:
        partials = [one(v) for v in views]

    merged = merge_atlases(partials)
    materials = normalize(merged)
    if materials.diagnostics["dropped_uv"]:
        log.warning("bake: dropped %d samples with UV outside [0,1]^2",
                    materials.diagnostics["dropped_uv"])
    materials = inpaint_uncovered(materials, inpaint_radius)
    materials.diagnostics["atlas_resolution"] = int(atlas_resolution)
    materials.diagnostics["upscale"] = int(upscale)
    materials.diagnostics["inpaint_radius"] = int(inpaint_radius)
    materials.diagnostics["view_count"] = len(views)
    return materials
