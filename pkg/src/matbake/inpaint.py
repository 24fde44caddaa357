"""Fast-marching hole fill for multi-channel float atlases.

Propagates from the known-region boundary in increasing-distance order
(an eikonal front). Each unknown texel is filled by a distance-, direction-
and level-weighted average of the already-valued texels within ``radius``.
The fill is computed as v0 + sum(w * (v - v0)) / sum(w), so constant regions
fill with exactly that constant. Known texels are never touched.
"""

from __future__ import annotations

import heapq

import numpy as np

_KNOWN, _BAND, _INSIDE = 0, 1, 2
_BIG = 1e12


def _solve_eikonal(y1, x1, y2, x2, t, flags):
    """Closed-form solution of |grad T| = 1 from two candidate neighbors."""
    h, w = t.shape
    ok1 = 0 <= y1 < h and 0 <= x1 < w and flags[y1, x1] != _INSIDE
    ok2 = 0 <= y2 < h and 0 <= x2 < w and flags[y2, x2] != _INSIDE
    if ok1 and ok2:
        t1 = t[y1, x1]
        t2 = t[y2, x2]
        if abs(t1 - t2) >= 1.0:
            return 1.0 + min(t1, t2)
        return 0.5 * (t1 + t2 + np.sqrt(2.0 - (t1 - t2) ** 2))
    if ok1:
        return 1.0 + t[y1, x1]
    if ok2:
        return 1.0 + t[y2, x2]
    return _BIG


def _fill_texel(y, x, values, t, flags, radius, yy, xx):
    h, w = flags.shape
    y0, y1 = max(0, y - radius), min(h, y + radius + 1)
    x0, x1 = max(0, x - radius), min(w, x + radius + 1)
    win = (slice(y0, y1), slice(x0, x1))
    valued = flags[win] != _INSIDE

    # front normal: gradient of T at (y, x) over valued neighbors
    def grad_1d(a, b, c, va, vb, vc):
        # one-sided / central differences depending on availability
        if va and vc:
            return 0.5 * (c - a)
        if vc:
            return c - b
        if va:
            return b - a
        return 0.0

    def t_at(py, px):
        if 0 <= py < h and 0 <= px < w:
            return t[py, px], flags[py, px] != _INSIDE
        return 0.0, False

    tl, vl = t_at(y, x - 1)
    tr, vr = t_at(y, x + 1)
    tu, vu = t_at(y - 1, x)
    td, vd = t_at(y + 1, x)
    gx = grad_1d(tl, t[y, x], tr, vl, True, vr)
    gy = grad_1d(tu, t[y, x], td, vu, True, vd)

    ry = y - yy[win]
    rx = x - xx[win]
    dist2 = ry * ry + rx * rx
    near = valued & (dist2 > 0) & (dist2 <= radius * radius)
    if not near.any():
        return  # cannot happen for radius >= 1 next to a valued texel
    ry = ry[near].astype(np.float64)
    rx = rx[near].astype(np.float64)
    d2 = dist2[near].astype(np.float64)
    d = np.sqrt(d2)

    direction = np.abs(ry * gy + rx * gx) / d
    direction = np.maximum(direction, 1e-6)
    dst = 1.0 / d2
    lev = 1.0 / (1.0 + np.abs(t[win][near] - t[y, x]))
    wgt = direction * dst * lev

    vals = values[win][near]  # (K, C)
    v0 = vals[0]
    num = (wgt[:, None] * (vals - v0)).sum(axis=0)
    values[y, x] = v0 + num / wgt.sum()


def inpaint_masked(values: np.ndarray, known: np.ndarray, radius: int = 4) -> np.ndarray:
    """Fill ``values`` (H, W, C) wherever ``known`` is False. Returns a new
    array; known texels are bit-identical to the input. A fully unknown input
    is returned unchanged (nothing to propagate from)."""
    if radius < 1:
        raise ValueError(f"inpaint radius must be >= 1, got {radius}")
    vals = np.array(values, dtype=np.float64, copy=True)
    squeeze = vals.ndim == 2
    if squeeze:
        vals = vals[:, :, None]
    known = np.asarray(known, dtype=bool)
    if known.shape != vals.shape[:2]:
        raise ValueError(
            f"known mask shape {known.shape} does not match values "
            f"{vals.shape[:2]}")
    if known.all() or not known.any():
        out = vals[:, :, 0] if squeeze else vals
        return out

    h, w = known.shape
    flags = np.where(known, _KNOWN, _INSIDE).astype(np.int8)
    t = np.where(known, 0.0, _BIG)

    # seed the front with known texels that touch the unknown region
    inside = ~known
    pad = np.pad(inside, 1, constant_values=False)
    touch = pad[:-2, 1:-1] | pad[2:, 1:-1] | pad[1:-1, :-2] | pad[1:-1, 2:]
    boundary = known & touch

    heap = []
    for y, x in zip(*np.nonzero(boundary)):
        heapq.heappush(heap, (0.0, int(y), int(x)))
    flags[boundary] = _BAND

    yy, xx = np.mgrid[0:h, 0:w]
    neighbors = ((-1, 0), (1, 0), (0, -1), (0, 1))
    while heap:
        _, y, x = heapq.heappop(heap)
        if flags[y, x] == _KNOWN:
            continue  # stale duplicate entry
        flags[y, x] = _KNOWN
        for dy, dx in neighbors:
            ny, nx = y + dy, x + dx
            if not (0 <= ny < h and 0 <= nx < w) or flags[ny, nx] == _KNOWN:
                continue
            if flags[ny, nx] == _INSIDE:
                _fill_texel(ny, nx, vals, t, flags, radius, yy, xx)
                flags[ny, nx] = _BAND
            sol = min(
                _solve_eikonal(ny - 1, nx, ny, nx - 1, t, flags),
                _solve_eikonal(ny + 1, nx, ny, nx + 1, t, flags),
                _solve_eikonal(ny - 1, nx, ny, nx + 1, t, flags),
                _solve_eikonal(ny + 1, nx, ny, nx - 1, t, flags),
            )
            if sol < t[ny, nx]:
                t[ny, nx] = sol
                heapq.heappush(heap, (float(sol), int(ny), int(nx)))

    return vals[:, :, 0] if squeeze else vals
