"""Software rasterizer producing G-buffers with analytic UV screen derivatives.

Z-buffered, perspective-correct, sampled at pixel centers, no anti-aliasing,
back-face culling disabled (test surfaces may be open), black background.
Perspective-correct interpolation follows the standard construction: each
attribute A is interpolated as the screen-affine function A/w divided by the
screen-affine 1/w, where w is the camera-space depth. The UV derivative per
pixel is the exact derivative of that quotient, not a 2x2 quad difference:

    du/dx = (d(u/w)/dx - u * d(1/w)/dx) * depth

Ties on shared triangle edges resolve to the earlier triangle in the input
order (strict z test), so output is deterministic and independent of any
parallelism outside this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Camera, Mesh, unproject
from .sampling import bilinear_sample


@dataclass
class GBuffer:
    """Per-pixel geometry images. ``mask`` is the coverage; all payload
    channels are zero (and ``tri`` is -1) wherever mask is False."""

    width: int
    height: int
    normal: np.ndarray     # (H, W, 3) float32, unit where covered
    position: np.ndarray   # (H, W, 3) float32, world space
    uv: np.ndarray         # (H, W, 2) float32
    duv_dx: np.ndarray     # (H, W, 2) float32, d(uv)/d(pixel x)
    duv_dy: np.ndarray     # (H, W, 2) float32, d(uv)/d(pixel y)
    depth: np.ndarray      # (H, W) float32, 0 where uncovered
    mask: np.ndarray       # (H, W) bool
    tri: np.ndarray        # (H, W) int32, source triangle id, -1 background


@dataclass
class IntrinsicViews:
    """Per-view material images paired with the G-buffer they align with."""

    base_color: np.ndarray    # (H, W, 3) float32
    roughness: np.ndarray     # (H, W) float32
    metallicity: np.ndarray   # (H, W) float32
    height: np.ndarray        # (H, W) float32
    gbuffer: GBuffer


def _near_clip(cam_pts, attrs, near):
    """Clip one camera-space triangle against depth > near.

    cam_pts: (3, 3) camera-space positions; attrs: (3, A) per-vertex payload.
    Returns a list of (cam_pts, attrs) triangles (0, 1 or 2 entries).
    """
    depth = -cam_pts[:, 2]
    inside = depth > near
    if inside.all():
        return [(cam_pts, attrs)]
    if not inside.any():
        return []
    poly_p, poly_a = [], []
    for i in range(3):
        j = (i + 1) % 3
        pi, pj = cam_pts[i], cam_pts[j]
        ai, aj = attrs[i], attrs[j]
        if inside[i]:
            poly_p.append(pi)
            poly_a.append(ai)
        if inside[i] != inside[j]:
            t = (near - depth[i]) / (depth[j] - depth[i])
            poly_p.append(pi + t * (pj - pi))
            poly_a.append(ai + t * (aj - ai))
    out = []
    for k in range(1, len(poly_p) - 1):
        out.append((np.stack([poly_p[0], poly_p[k], poly_p[k + 1]]),
                    np.stack([poly_a[0], poly_a[k], poly_a[k + 1]])))
    return out


def _plane_coeffs(sx, sy, values):
    """Affine fit a(x, y) = g x + h y + k through three screen points.

    sx, sy: (T, 3); values: (T, 3, A). Returns g, h, k each (T, A).
    Degenerate screen triangles produce zero coefficients (they are also
    rejected by the area threshold in the raster loop).
    """
    x0, x1, x2 = sx[:, 0], sx[:, 1], sx[:, 2]
    y0, y1, y2 = sy[:, 0], sy[:, 1], sy[:, 2]
    det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
    safe = np.where(np.abs(det) < 1e-14, 1.0, det)[:, None]
    f0, f1, f2 = values[:, 0], values[:, 1], values[:, 2]
    g = ((f1 - f0) * (y2 - y0)[:, None] - (f2 - f0) * (y1 - y0)[:, None]) / safe
    h = ((f2 - f0) * (x1 - x0)[:, None] - (f1 - f0) * (x2 - x0)[:, None]) / safe
    k = f0 - g * x0[:, None] - h * y0[:, None]
    return g, h, k


def rasterize(mesh: Mesh, camera: Camera, *, near: float = 1e-6) -> GBuffer:
    w, h = camera.width, camera.height
    cam_all = (mesh.positions - camera.position) @ camera.rotation
    depth_all = -cam_all[:, 2]

    # attribute payload per vertex: uv, world position, world normal
    attr_all = np.concatenate([mesh.uvs, mesh.positions, mesh.normals], axis=1)

    tri_cam = cam_all[mesh.triangles]          # (T, 3, 3)
    tri_attr = attr_all[mesh.triangles]        # (T, 3, 8)
    tri_depth = depth_all[mesh.triangles]      # (T, 3)

    need_clip = ~(tri_depth > near).all(axis=1)
    work_cam = [tri_cam[~need_clip]]
    work_attr = [tri_attr[~need_clip]]
    work_orig = [np.nonzero(~need_clip)[0]]
    for t in np.nonzero(need_clip)[0]:
        for cp, ca in _near_clip(tri_cam[t], tri_attr[t], near):
            work_cam.append(cp[None])
            work_attr.append(ca[None])
            work_orig.append(np.array([t]))
    cam_tris = np.concatenate(work_cam, axis=0)
    attr_tris = np.concatenate(work_attr, axis=0)
    orig_ids = np.concatenate(work_orig, axis=0).astype(np.int32)

    gbuf = GBuffer(
        width=w, height=h,
        normal=np.zeros((h, w, 3), np.float32),
        position=np.zeros((h, w, 3), np.float32),
        uv=np.zeros((h, w, 2), np.float32),
        duv_dx=np.zeros((h, w, 2), np.float32),
        duv_dy=np.zeros((h, w, 2), np.float32),
        depth=np.zeros((h, w), np.float32),
        mask=np.zeros((h, w), bool),
        tri=np.full((h, w), -1, np.int32),
    )
    if len(cam_tris) == 0:
        return gbuf

    t_depth = -cam_tris[:, :, 2]
    f = camera.focal
    sx = 0.5 * w + f * cam_tris[:, :, 0] / t_depth
    sy = 0.5 * h - f * cam_tris[:, :, 1] / t_depth
    winv_v = 1.0 / t_depth                     # (T, 3)

    # screen-affine coefficient planes for 1/w and every attribute/w
    over_w = np.concatenate([winv_v[:, :, None],
                             attr_tris * winv_v[:, :, None]], axis=2)  # (T,3,9)
    cg, ch, ck = _plane_coeffs(sx, sy, over_w)

    # pass 1: depth + working-triangle id per pixel
    det = ((sx[:, 1] - sx[:, 0]) * (sy[:, 2] - sy[:, 0])
           - (sx[:, 2] - sx[:, 0]) * (sy[:, 1] - sy[:, 0]))
    zbuf = np.full((h, w), np.inf, np.float64)
    tid = np.full((h, w), -1, np.int64)

    x0s = np.clip(np.floor(sx.min(axis=1) - 0.5).astype(np.int64), 0, w - 1)
    x1s = np.clip(np.ceil(sx.max(axis=1) - 0.5).astype(np.int64), 0, w - 1)
    y0s = np.clip(np.floor(sy.min(axis=1) - 0.5).astype(np.int64), 0, h - 1)
    y1s = np.clip(np.ceil(sy.max(axis=1) - 0.5).astype(np.int64), 0, h - 1)
    offscreen = (sx.max(axis=1) < 0) | (sx.min(axis=1) > w) \
        | (sy.max(axis=1) < 0) | (sy.min(axis=1) > h)

    gw, hw, kw = cg[:, 0], ch[:, 0], ck[:, 0]
    for t in range(len(cam_tris)):
        if offscreen[t] or abs(det[t]) < 1e-12:
            continue
        xs = np.arange(x0s[t], x1s[t] + 1, dtype=np.float64) + 0.5
        ys = np.arange(y0s[t], y1s[t] + 1, dtype=np.float64) + 0.5
        px = xs[None, :]
        py = ys[:, None]
        sign = 1.0 if det[t] > 0 else -1.0
        inside = np.ones((len(ys), len(xs)), bool)
        for k in range(3):
            ax, ay = sx[t, k], sy[t, k]
            bx, by = sx[t, (k + 1) % 3], sy[t, (k + 1) % 3]
            e = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
            inside &= (sign * e) >= 0.0
        if not inside.any():
            continue
        winv = gw[t] * px + hw[t] * py + kw[t]
        depth = 1.0 / np.maximum(winv, 1e-300)
        blk = (slice(y0s[t], y1s[t] + 1), slice(x0s[t], x1s[t] + 1))
        closer = inside & (depth < zbuf[blk]) & (winv > 0)
        if closer.any():
            zb = zbuf[blk]
            tb = tid[blk]
            zb[closer] = depth[closer]
            tb[closer] = t
            zbuf[blk] = zb
            tid[blk] = tb

    rows, cols = np.nonzero(tid >= 0)
    if len(rows) == 0:
        return gbuf
    t = tid[rows, cols]
    px = cols.astype(np.float64) + 0.5
    py = rows.astype(np.float64) + 0.5

    winv = cg[t, 0] * px + ch[t, 0] * py + ck[t, 0]
    depth = 1.0 / winv
    vals = (cg[t, 1:] * px[:, None] + ch[t, 1:] * py[:, None] + ck[t, 1:]) \
        * depth[:, None]                       # (P, 8): u, v, pos, normal
    uv = vals[:, 0:2]
    pos = vals[:, 2:5]
    nrm = vals[:, 5:8]
    nlen = np.linalg.norm(nrm, axis=1, keepdims=True)
    nrm = nrm / np.maximum(nlen, 1e-20)

    # exact derivative of the perspective-correct quotient
    du_dx = (cg[t, 1] - uv[:, 0] * cg[t, 0]) * depth
    dv_dx = (cg[t, 2] - uv[:, 1] * cg[t, 0]) * depth
    du_dy = (ch[t, 1] - uv[:, 0] * ch[t, 0]) * depth
    dv_dy = (ch[t, 2] - uv[:, 1] * ch[t, 0]) * depth

    gbuf.mask[rows, cols] = True
    gbuf.tri[rows, cols] = orig_ids[t]
    gbuf.depth[rows, cols] = depth.astype(np.float32)
    gbuf.uv[rows, cols] = uv.astype(np.float32)
    gbuf.position[rows, cols] = pos.astype(np.float32)
    gbuf.normal[rows, cols] = nrm.astype(np.float32)
    gbuf.duv_dx[rows, cols] = np.stack([du_dx, dv_dx], axis=1).astype(np.float32)
    gbuf.duv_dy[rows, cols] = np.stack([du_dy, dv_dy], axis=1).astype(np.float32)
    return gbuf


def world_position_from_depth(camera: Camera, depth: np.ndarray) -> np.ndarray:
    """Unproject a depth image back to world positions (zeros where the depth
    is non-positive, i.e. background)."""
    d = np.asarray(depth, dtype=np.float64)
    h, w = d.shape
    xs = np.arange(w, dtype=np.float64) + 0.5
    ys = np.arange(h, dtype=np.float64) + 0.5
    px, py = np.meshgrid(xs, ys)
    pts = unproject(camera, np.stack([px, py], axis=-1), d)
    pts[d <= 0] = 0.0
    return pts.astype(np.float32)


def _sample_atlas(atlas: np.ndarray, uv: np.ndarray) -> np.ndarray:
    r_y, r_x = atlas.shape[0], atlas.shape[1]
    return bilinear_sample(atlas, uv[..., 0] * r_x - 0.5, uv[..., 1] * r_y - 0.5)


def render_intrinsics_from_gbuffer(gbuffer: GBuffer, materials) -> IntrinsicViews:
    """Bilinear-sample a MaterialSet's channels at the G-buffer UVs. Uncovered
    pixels stay zero (black background)."""
    m = gbuffer.mask
    uv = gbuffer.uv[m].astype(np.float64)
    h, w = gbuffer.height, gbuffer.width

    base = np.zeros((h, w, 3), np.float32)
    rough = np.zeros((h, w), np.float32)
    metal = np.zeros((h, w), np.float32)
    height = np.zeros((h, w), np.float32)
    base[m] = _sample_atlas(np.asarray(materials.base_color), uv).astype(np.float32)
    rough[m] = _sample_atlas(np.asarray(materials.roughness), uv).astype(np.float32)
    metal[m] = _sample_atlas(np.asarray(materials.metallicity), uv).astype(np.float32)
    height[m] = _sample_atlas(np.asarray(materials.height), uv).astype(np.float32)
    return IntrinsicViews(base_color=base, roughness=rough, metallicity=metal,
                          height=height, gbuffer=gbuffer)


def render_intrinsics(mesh: Mesh, camera: Camera, materials) -> IntrinsicViews:
    return render_intrinsics_from_gbuffer(rasterize(mesh, camera), materials)
