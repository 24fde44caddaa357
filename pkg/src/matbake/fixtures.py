"""Procedural test scenes: meshes with clean UV charts, smooth material
atlases and synthetic environment probes.

These exist so the pipeline can be exercised end to end without any asset
files; everything is deterministic and analytic.
"""

from __future__ import annotations

import numpy as np

from .bake import MaterialSet
from .geometry import Mesh
from .shade import EnvironmentProbe, _texel_dirs


def make_quad(size: float = 1.0) -> Mesh:
    """Unit square in the XY plane facing +Z, UVs spanning [0, 1]^2."""
    s = 0.5 * size
    positions = np.array([
        [-s, -s, 0.0], [s, -s, 0.0], [s, s, 0.0], [-s, s, 0.0]])
    uvs = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    normals = np.tile([0.0, 0.0, 1.0], (4, 1))
    triangles = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int32)
    return Mesh(positions, normals, uvs, triangles)


_CUBE_FACES = (
    # normal, tangent, bitangent with tangent x bitangent = normal
    ((1, 0, 0), (0, 1, 0), (0, 0, 1)),
    ((-1, 0, 0), (0, 0, 1), (0, 1, 0)),
    ((0, 1, 0), (0, 0, 1), (1, 0, 0)),
    ((0, -1, 0), (1, 0, 0), (0, 0, 1)),
    ((0, 0, 1), (1, 0, 0), (0, 1, 0)),
    ((0, 0, -1), (0, 1, 0), (1, 0, 0)),
)


def make_cube(size: float = 1.0, margin: float = 0.02) -> Mesh:
    """Axis-aligned cube with six separate UV islands in a 3 x 2 grid.

    Each face keeps ``margin`` of UV padding inside its grid cell so the
    islands never touch; vertices are duplicated per face for hard normals.
    """
    s = 0.5 * size
    positions, normals, uvs, tris = [], [], [], []
    for face, (n, t, b) in enumerate(_CUBE_FACES):
        n = np.array(n, dtype=np.float64)
        t = np.array(t, dtype=np.float64)
        b = np.array(b, dtype=np.float64)
        col, row = face % 3, face // 3
        u0 = col / 3.0 + margin
        u1 = (col + 1) / 3.0 - margin
        v0 = row / 2.0 + margin
        v1 = (row + 1) / 2.0 - margin
        base = len(positions)
        for tt, bb, uu, vv in ((-1, -1, u0, v0), (1, -1, u1, v0),
                               (1, 1, u1, v1), (-1, 1, u0, v1)):
            positions.append(s * n + s * tt * t + s * bb * b)
            normals.append(n)
            uvs.append([uu, vv])
        tris.append([base, base + 1, base + 2])
        tris.append([base, base + 2, base + 3])
    return Mesh(np.array(positions), np.array(normals), np.array(uvs),
                np.array(tris, dtype=np.int32))


def make_sphere_band(segments: int = 64, rings: int = 32,
                     lat_degrees: float = 45.0, radius: float = 1.0) -> Mesh:
    """Sphere surface between latitudes +/- lat_degrees, one UV chart.

    The polar caps are left open because no single-elevation camera orbit
    can see them; a camera at elevation e and distance d only ever sees
    latitudes above e - arccos(1/d), so the default band stops at 45
    degrees to stay comfortably visible from the standard orbits. The band
    unwraps to the full [0, 1]^2 with u along azimuth (seam duplicated)
    and v from the top ring down.
    """
    if not 0.0 < lat_degrees < 90.0:
        raise ValueError(f"lat_degrees must be in (0, 90), got {lat_degrees}")
    lat_max = np.deg2rad(lat_degrees)
    u = np.arange(segments + 1, dtype=np.float64) / segments
    v = np.arange(rings + 1, dtype=np.float64) / rings
    lat = lat_max - v * (2.0 * lat_max)  # v = 0 at the top ring
    az = 2.0 * np.pi * u

    uu, vv = np.meshgrid(u, v)
    aa, ll = np.meshgrid(az, lat)
    y = np.sin(ll)
    horiz = np.cos(ll)
    pos = np.stack([horiz * np.sin(aa), y, horiz * np.cos(aa)], axis=2)
    normals = pos.reshape(-1, 3)
    positions = (radius * pos).reshape(-1, 3)
    uvs = np.stack([uu, vv], axis=2).reshape(-1, 2)

    tris = []
    cols = segments + 1
    for i in range(rings):
        for j in range(segments):
            a = i * cols + j
            b = a + 1
            d = a + cols
            c = d + 1
            tris.append([a, d, c])
            tris.append([a, c, b])
    return Mesh(positions, normals, uvs, np.array(tris, dtype=np.int32))


def make_material_set(resolution: int) -> MaterialSet:
    """Smooth band-limited material channels on a fully covered atlas.

    All channels are sums of low-frequency cosines that stay inside
    [0.05, 0.95] and tile periodically, so resampling and reintegration
    errors stay interpretable.
    """
    r = int(resolution)
    u = (np.arange(r, dtype=np.float64) + 0.5) / r
    uu, vv = np.meshgrid(u, u)
    tau = 2.0 * np.pi

    base = np.stack([
        0.55 + 0.25 * np.cos(tau * 2 * uu) * np.cos(tau * vv),
        0.50 + 0.20 * np.cos(tau * (uu + 2 * vv)),
        0.45 + 0.25 * np.cos(tau * (3 * uu - vv)),
    ], axis=2)
    rough = 0.50 + 0.35 * np.cos(tau * 2 * uu) * np.cos(tau * 2 * vv)
    metal = 0.40 + 0.30 * np.cos(tau * (uu - vv))
    height = 0.50 + 0.22 * np.cos(tau * uu) * np.cos(tau * vv) \
        + 0.10 * np.sin(tau * 3 * uu) * np.sin(tau * 2 * vv)
    mask = np.ones((r, r), dtype=bool)
    return MaterialSet(r, base, rough, metal, height, mask)


def _gaussian_lobe(dirs: np.ndarray, center: np.ndarray,
                   sharpness: float) -> np.ndarray:
    """Smooth directional bump: exp(sharpness * (dot - 1)), peak 1."""
    c = np.asarray(center, dtype=np.float64)
    c = c / np.sqrt((c * c).sum())
    return np.exp(sharpness * ((dirs * c).sum(axis=-1) - 1.0))


def make_probe(width: int = 128, kind: str = "sky") -> EnvironmentProbe:
    """Synthetic equirectangular probe. Kinds: "sky" (sun, blue gradient,
    warm ground), "studio" (three neutral softboxes), "const" (unit white).
    """
    if width % 2:
        raise ValueError(f"probe width must be even, got {width}")
    h = width // 2
    dirs = _texel_dirs(h, width)
    y = dirs[..., 1]

    if kind == "sky":
        sky = np.clip(y, 0.0, 1.0)[..., None] * np.array([0.25, 0.35, 0.65]) \
            + np.array([0.30, 0.32, 0.38])
        ground = np.clip(-y, 0.0, 1.0)[..., None] * np.array([0.25, 0.18, 0.10])
        sun = _gaussian_lobe(dirs, np.array([0.4, 0.72, 0.3]), 60.0)
        img = sky + ground + sun[..., None] * np.array([9.0, 7.5, 5.5])
    elif kind == "studio":
        img = np.full(dirs.shape[:2] + (3,), 0.06)
        for center, power in (((1.0, 0.8, 0.2), 5.0),
                              ((-0.7, 0.6, -0.5), 3.5),
                              ((0.1, 0.3, -1.0), 2.0)):
            img = img + _gaussian_lobe(dirs, np.array(center), 24.0)[..., None] \
                * np.array([power, power, power])
    elif kind == "const":
        img = np.ones(dirs.shape[:2] + (3,))
    else:
        raise ValueError(f"unknown probe kind {kind!r}")
    return EnvironmentProbe(img.astype(np.float32), name=kind)
