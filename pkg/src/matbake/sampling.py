"""Interpolation helpers shared by the raster, bake, and shade stages.

Convention: sample positions are in pixel-center coordinates, i.e. the center
of texel (row r, column c) is at (x=c, y=r). Callers converting from UV in
[0, 1] use x = u * W - 0.5.
"""

from __future__ import annotations

import cv2
import numpy as np


def lerp(a, b, t):
    # a + t*(b - a): reproduces a exactly when a == b, which downstream
    # exactness tests rely on
    return a + t * (b - a)


def bilinear_sample(img: np.ndarray, x: np.ndarray, y: np.ndarray,
                    *, wrap_x: bool = False) -> np.ndarray:
    """Bilinear lookup at pixel-center coordinates with edge clamp.

    ``img`` is (H, W) or (H, W, C); x/y are broadcastable index arrays.
    ``wrap_x`` wraps horizontally (lat-long azimuth seam).
    """
    h, w = img.shape[:2]
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    x0f = np.floor(x)
    y0f = np.floor(y)
    fx = x - x0f
    fy = y - y0f
    x0 = x0f.astype(np.int64)
    y0 = np.clip(y0f.astype(np.int64), 0, h - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    if wrap_x:
        x0 = x0 % w
        x1 = (x0 + 1) % w
    else:
        x0 = np.clip(x0, 0, w - 1)
        x1 = np.minimum(x0 + 1, w - 1)
    v00 = img[y0, x0]
    v10 = img[y0, x1]
    v01 = img[y1, x0]
    v11 = img[y1, x1]
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    return lerp(lerp(v00, v10, fx), lerp(v01, v11, fx), fy)


def upscale_field(arr: np.ndarray, factor: int, mode: str = "bilinear") -> np.ndarray:
    """Upscale by an integer factor with the (dst+0.5)/f - 0.5 source mapping.

    bilinear: edge-clamped separable interpolation (cv2 INTER_LINEAR).
    nearest:  aligned f x f blocks (cv2 INTER_NEAREST).
    """
    if factor == 1:
        return arr
    if factor < 1:
        raise ValueError(f"upscale factor must be >= 1, got {factor}")
    interp = {"bilinear": cv2.INTER_LINEAR, "nearest": cv2.INTER_NEAREST}[mode]
    if arr.ndim == 2 or arr.shape[2] <= 4:
        out = cv2.resize(arr, None, fx=factor, fy=factor, interpolation=interp)
        if arr.ndim == 3 and out.ndim == 2:
            out = out[:, :, None]
        return out
    planes = [
        cv2.resize(arr[:, :, c], None, fx=factor, fy=factor, interpolation=interp)
        for c in range(arr.shape[2])
    ]
    return np.stack(planes, axis=-1)
