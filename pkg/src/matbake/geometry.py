"""Meshes, cameras, projection, and UV atlas validation.

Coordinate conventions (stated once, used everywhere):

- world space is right-handed with +Y up
- camera space: x right, y up, the camera looks down -Z; depth is the
  distance along -Z, so visible points have positive depth
- image space: origin at the top-left corner, x right, y down, pixel centers
  at half-integer coordinates ((0.5, 0.5) is the center of the top-left pixel)
- ``fov`` is the vertical field of view in radians
- UV space: u right, v down in atlas images; texel (row i, col j) of an R x R
  atlas covers [j/R, (j+1)/R) x [i/R, (i+1)/R)

Mesh files are a plain-text OBJ subset: ``v``, ``vt``, ``vn``, ``f`` with
1-based ``p``, ``p/t``, ``p//n`` or ``p/t/n`` face tuples (n-gons are
fan-triangulated). Faces must reference UVs; normals are optional and are
recomputed area-weighted when any face vertex lacks one.

Camera files are line-oriented text (decimal numbers, locale independent):

    camera <name>
    position <x> <y> <z>
    rotation <r00> <r01> <r02> <r10> ... <r22>   # world-from-camera, row-major
    fov <radians>
    size <width> <height>
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Raised for malformed mesh files or invalid mesh data."""


class CameraError(ValueError):
    """Raised for malformed camera files or invalid camera parameters."""


# ---------------------------------------------------------------------------
# cameras

@dataclass
class Camera:
    """Pinhole camera. ``rotation`` is world-from-camera: its columns are the
    camera x/y/z axes expressed in world coordinates."""

    rotation: np.ndarray
    position: np.ndarray
    fov: float
    width: int
    height: int
    name: str = ""

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)

    def validate(self) -> None:
        rtr = self.rotation.T @ self.rotation
        if not np.allclose(rtr, np.eye(3), atol=1e-6):
            raise CameraError("rotation is not orthonormal")
        if np.linalg.det(self.rotation) < 0:
            raise CameraError("rotation must be right-handed (det +1)")
        if not (0.0 < self.fov < np.pi):
            raise CameraError(f"fov must be in (0, pi), got {self.fov}")
        if self.width < 1 or self.height < 1:
            raise CameraError("image size must be at least 1x1")

    @property
    def focal(self) -> float:
        """Focal length in pixels (vertical fov against image height)."""
        return 0.5 * self.height / np.tan(0.5 * self.fov)


def project(camera: Camera, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World points (..., 3) -> pixel coordinates (..., 2) and depth (...).

    Depth is the camera-space distance along -Z; points behind the camera get
    a non-positive depth (flag, not an exception) and their pixel coordinates
    are not meaningful.
    """
    pts = np.asarray(points, dtype=np.float64)
    rel = pts - camera.position
    cam = rel @ camera.rotation  # p_cam[i] = axis_i . rel
    depth = -cam[..., 2]
    f = camera.focal
    with np.errstate(divide="ignore", invalid="ignore"):
        px = 0.5 * camera.width + f * cam[..., 0] / depth
        py = 0.5 * camera.height - f * cam[..., 1] / depth
    return np.stack([px, py], axis=-1), depth


def unproject(camera: Camera, pixels: np.ndarray, depth: np.ndarray) -> np.ndarray:
    """Inverse of :func:`project` for positive depth."""
    pix = np.asarray(pixels, dtype=np.float64)
    d = np.asarray(depth, dtype=np.float64)
    f = camera.focal
    x = (pix[..., 0] - 0.5 * camera.width) * d / f
    y = (0.5 * camera.height - pix[..., 1]) * d / f
    cam = np.stack([x, y, -d], axis=-1)
    return camera.position + cam @ camera.rotation.T


def look_at(position, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """World-from-camera rotation for a camera at ``position`` looking at
    ``target``. Falls back to +Z as up when the view direction is vertical."""
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    norm = np.linalg.norm(forward)
    if norm < 1e-12:
        raise CameraError("camera position coincides with the look-at target")
    forward = forward / norm
    up = np.asarray(up, dtype=np.float64)
    right = np.cross(forward, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(forward, np.array([0.0, 0.0, 1.0]))
    right = right / np.linalg.norm(right)
    z_cam = -forward
    y_cam = np.cross(z_cam, right)
    return np.column_stack([right, y_cam, z_cam])


def orbit_cameras(count: int, radius: float, elevation: float, fov: float,
                  resolution: tuple[int, int],
                  center=(0.0, 0.0, 0.0)) -> list[Camera]:
    """Evenly spaced azimuth ring at fixed elevation, all looking at ``center``.

    Azimuth i is 2*pi*i/count measured from +Z toward +X; elevation is the
    angle above the XZ plane (+Y up), both in radians. ``resolution`` is
    (width, height).
    """
    if count < 1:
        raise CameraError(f"orbit needs at least one camera, got {count}")
    if radius <= 0:
        raise CameraError(f"orbit radius must be positive, got {radius}")
    center = np.asarray(center, dtype=np.float64)
    width, height = resolution
    cams = []
    for i in range(count):
        az = 2.0 * np.pi * i / count
        offset = radius * np.array([
            np.cos(elevation) * np.sin(az),
            np.sin(elevation),
            np.cos(elevation) * np.cos(az),
        ])
        pos = center + offset
        cam = Camera(rotation=look_at(pos, center), position=pos,
                     fov=fov, width=width, height=height, name=f"orbit{i:03d}")
        cam.validate()
        cams.append(cam)
    return cams


def save_cameras(path, cameras: list[Camera]) -> None:
    lines = []
    for i, cam in enumerate(cameras):
        rot = " ".join(f"{v:.17g}" for v in cam.rotation.reshape(9))
        pos = " ".join(f"{v:.17g}" for v in cam.position)
        lines += [
            f"camera {cam.name or f'view{i:03d}'}",
            f"position {pos}",
            f"rotation {rot}",
            f"fov {cam.fov:.17g}",
            f"size {cam.width} {cam.height}",
            "",
        ]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines))


def load_cameras(path) -> list[Camera]:
    cams: list[Camera] = []
    current: dict | None = None

    def finish():
        nonlocal current
        if current is None:
            return
        missing = {"position", "rotation", "fov", "size"} - current.keys()
        if missing:
            raise CameraError(
                f"{path}: camera {current.get('name', '?')} is missing {sorted(missing)}")
        cam = Camera(rotation=np.array(current["rotation"]).reshape(3, 3),
                     position=np.array(current["position"]),
                     fov=current["fov"],
                     width=current["size"][0], height=current["size"][1],
                     name=current["name"])
        cam.validate()
        cams.append(cam)
        current = None

    with open(path, "r", encoding="ascii") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tok = line.split()
            try:
                if tok[0] == "camera":
                    finish()
                    current = {"name": tok[1] if len(tok) > 1 else ""}
                elif current is None:
                    raise CameraError(f"{path}:{ln}: field before any 'camera' line")
                elif tok[0] == "position":
                    if len(tok) != 4:
                        raise ValueError("position needs 3 values")
                    current["position"] = [float(v) for v in tok[1:]]
                elif tok[0] == "rotation":
                    if len(tok) != 10:
                        raise ValueError("rotation needs 9 values")
                    current["rotation"] = [float(v) for v in tok[1:]]
                elif tok[0] == "fov":
                    current["fov"] = float(tok[1])
                elif tok[0] == "size":
                    current["size"] = (int(tok[1]), int(tok[2]))
                else:
                    raise CameraError(f"{path}:{ln}: unknown field {tok[0]!r}")
            except (IndexError, ValueError) as exc:
                raise CameraError(f"{path}:{ln}: malformed line {line!r}") from exc
    finish()
    if not cams:
        raise CameraError(f"{path}: no cameras found")
    return cams


# ---------------------------------------------------------------------------
# meshes

@dataclass
class Mesh:
    positions: np.ndarray  # (V, 3) float64
    normals: np.ndarray    # (V, 3) float64, unit length
    uvs: np.ndarray        # (V, 2) float64
    triangles: np.ndarray  # (T, 3) int32

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.normals = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
        self.uvs = np.asarray(self.uvs, dtype=np.float64).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, dtype=np.int32).reshape(-1, 3)

    def validate(self, uv_area_eps: float = 1e-12) -> np.ndarray:
        """Raise on hard violations; return indices of triangles whose UV area
        is at or below ``uv_area_eps`` (flagged, not rejected)."""
        v = len(self.positions)
        if len(self.normals) != v or len(self.uvs) != v:
            raise MeshError("positions, normals and uvs must have equal length")
        if len(self.triangles) and (self.triangles.min() < 0 or self.triangles.max() >= v):
            raise MeshError("triangle index out of range")
        if not (np.all(np.isfinite(self.positions)) and np.all(np.isfinite(self.uvs))
                and np.all(np.isfinite(self.normals))):
            raise MeshError("mesh carries non-finite values")
        lengths = np.linalg.norm(self.normals, axis=1)
        if len(lengths) and np.abs(lengths - 1.0).max() > 1e-4:
            raise MeshError("vertex normals must be unit length within 1e-4")
        return self.degenerate_uv_triangles(uv_area_eps)

    def degenerate_uv_triangles(self, eps: float = 1e-12) -> np.ndarray:
        uv = self.uvs[self.triangles]
        e1 = uv[:, 1] - uv[:, 0]
        e2 = uv[:, 2] - uv[:, 0]
        area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        return np.nonzero(area <= eps)[0].astype(np.int32)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.positions.min(axis=0), self.positions.max(axis=0)

    def bbox_center(self) -> np.ndarray:
        lo, hi = self.bbox()
        return 0.5 * (lo + hi)

    def bbox_diagonal(self) -> float:
        lo, hi = self.bbox()
        return float(np.linalg.norm(hi - lo))

    def uv_charts(self) -> np.ndarray:
        """Chart id per triangle: connected components of triangles that share
        a vertex index (identity by index, not by UV value)."""
        parent = np.arange(len(self.positions), dtype=np.int64)

        def find(a):
            root = a
            while parent[root] != root:
                root = parent[root]
            while parent[a] != root:
                parent[a], a = root, parent[a]
            return root

        for tri in self.triangles:
            a = find(tri[0])
            for idx in tri[1:]:
                b = find(idx)
                if a != b:
                    parent[b] = a
        roots = np.array([find(t[0]) for t in self.triangles], dtype=np.int64)
        _, chart = np.unique(roots, return_inverse=True)
        # renumber in order of first appearance so ids are deterministic
        order = {}
        out = np.empty(len(chart), dtype=np.int32)
        for i, c in enumerate(chart):
            out[i] = order.setdefault(int(c), len(order))
        return out


def _area_weighted_normals(positions: np.ndarray, pos_index_tris: np.ndarray) -> np.ndarray:
    """Smooth normals per position index: sum of (unnormalized) face cross
    products, i.e. area-weighted face normals."""
    acc = np.zeros_like(positions)
    p = positions[pos_index_tris]
    face = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    for k in range(3):
        np.add.at(acc, pos_index_tris[:, k], face)
    lengths = np.linalg.norm(acc, axis=1, keepdims=True)
    bad = lengths[:, 0] < 1e-20
    lengths[bad] = 1.0
    acc = acc / lengths
    acc[bad] = np.array([0.0, 1.0, 0.0])  # isolated or fully degenerate vertex
    return acc


def load_mesh(path) -> Mesh:
    """Parse the OBJ subset. Hard error when faces lack UV indices."""
    raw_v: list[list[float]] = []
    raw_vt: list[list[float]] = []
    raw_vn: list[list[float]] = []
    faces: list[list[tuple[int, int, int]]] = []  # (pos, uv, normal) 0-based, normal -1 if absent

    def parse_index(tok: str, count: int, what: str, ln: int) -> int:
        idx = int(tok)
        if idx < 0:
            raise MeshError(f"{path}:{ln}: negative {what} indices are not supported")
        if idx == 0 or idx > count:
            raise MeshError(f"{path}:{ln}: {what} index {idx} out of range (have {count})")
        return idx - 1

    with open(path, "r", encoding="ascii", errors="replace") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tok = line.split()
            try:
                if tok[0] == "v":
                    raw_v.append([float(t) for t in tok[1:4]])
                elif tok[0] == "vt":
                    raw_vt.append([float(t) for t in tok[1:3]])
                elif tok[0] == "vn":
                    raw_vn.append([float(t) for t in tok[1:4]])
                elif tok[0] == "f":
                    corners = []
                    for part in tok[1:]:
                        fields = part.split("/")
                        pi = parse_index(fields[0], len(raw_v), "vertex", ln)
                        if len(fields) < 2 or fields[1] == "":
                            raise MeshError(
                                f"{path}:{ln}: face vertex {part!r} has no UV index; "
                                "meshes must carry a UV channel")
                        ti = parse_index(fields[1], len(raw_vt), "uv", ln)
                        ni = -1
                        if len(fields) > 2 and fields[2] != "":
                            ni = parse_index(fields[2], len(raw_vn), "normal", ln)
                        corners.append((pi, ti, ni))
                    if len(corners) < 3:
                        raise MeshError(f"{path}:{ln}: face with fewer than 3 vertices")
                    for k in range(1, len(corners) - 1):  # fan triangulation
                        faces.append([corners[0], corners[k], corners[k + 1]])
                # all other directives (o, g, s, usemtl, mtllib, ...) are ignored
            except MeshError:
                raise
            except (ValueError, IndexError) as exc:
                raise MeshError(f"{path}:{ln}: malformed line {line!r}") from exc

    if not faces:
        raise MeshError(f"{path}: no faces found")

    positions = np.asarray(raw_v, dtype=np.float64)
    uvs_raw = np.asarray(raw_vt, dtype=np.float64)
    normals_raw = np.asarray(raw_vn, dtype=np.float64) if raw_vn else np.zeros((0, 3))

    # unify (pos, uv, normal) triples into vertices
    index_of: dict[tuple[int, int, int], int] = {}
    tris = np.empty((len(faces), 3), dtype=np.int32)
    keys: list[tuple[int, int, int]] = []
    for t, corners in enumerate(faces):
        for k, key in enumerate(corners):
            idx = index_of.get(key)
            if idx is None:
                idx = len(keys)
                index_of[key] = idx
                keys.append(key)
            tris[t, k] = idx

    pos_ids = np.array([k[0] for k in keys], dtype=np.int64)
    uv_ids = np.array([k[1] for k in keys], dtype=np.int64)
    n_ids = np.array([k[2] for k in keys], dtype=np.int64)

    v_pos = positions[pos_ids]
    v_uv = uvs_raw[uv_ids]
    if np.all(n_ids >= 0):
        v_n = normals_raw[n_ids]
        lengths = np.linalg.norm(v_n, axis=1, keepdims=True)
        if np.any(lengths < 1e-12):
            raise MeshError(f"{path}: zero-length vertex normal")
        v_n = v_n / lengths
    else:
        # recompute smooth normals; accumulate per position id so UV seams
        # do not split the shading normal
        per_pos = _area_weighted_normals(positions, pos_ids[tris])
        v_n = per_pos[pos_ids]

    mesh = Mesh(positions=v_pos, normals=v_n, uvs=v_uv, triangles=tris)
    mesh.validate()
    return mesh


def save_mesh(path, mesh: Mesh) -> None:
    """Write the OBJ subset with fully indexed p/t/n faces. Floats use %.17g
    so a load/save cycle reproduces the arrays bit-exactly."""
    with open(path, "w", encoding="ascii") as fh:
        for p in mesh.positions:
            fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for t in mesh.uvs:
            fh.write(f"vt {t[0]:.17g} {t[1]:.17g}\n")
        for n in mesh.normals:
            fh.write(f"vn {n[0]:.17g} {n[1]:.17g} {n[2]:.17g}\n")
        for tri in mesh.triangles:
            a, b, c = (int(i) + 1 for i in tri)
            fh.write(f"f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}\n")


# ---------------------------------------------------------------------------
# atlas validation

@dataclass
class ChartReport:
    resolution: int
    chart_count: int
    overlap_texel_count: int
    covered_fraction: float
    chart_bboxes: np.ndarray          # (C, 4): umin, vmin, umax, vmax
    covered_mask: np.ndarray = field(repr=False, default=None)  # (R, R) bool


def validate_atlas(mesh: Mesh, resolution: int) -> ChartReport:
    """Conservatively rasterize every UV triangle at ``resolution``.

    overlap_texel_count counts texels claimed by triangles from two or more
    distinct charts (conservative box-vs-triangle test, so seams between
    charts that merely touch can be flagged). covered_fraction counts texels
    whose center lies inside some triangle.
    """
    r = int(resolution)
    if r < 1:
        raise ValueError(f"atlas resolution must be >= 1, got {resolution}")
    charts = mesh.uv_charts()
    chart_count = int(charts.max()) + 1 if len(charts) else 0

    claim = np.full((r, r), -1, dtype=np.int32)
    overlap = np.zeros((r, r), dtype=bool)
    covered = np.zeros((r, r), dtype=bool)

    uv_px = mesh.uvs * r  # texel units
    for t, tri in enumerate(mesh.triangles):
        p = uv_px[tri]
        area2 = ((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1])
                 - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0]))
        if abs(area2) < 1e-14:
            continue  # degenerate in UV, claims nothing
        if area2 < 0:
            p = p[::-1]  # make CCW so edge functions are inside-positive
        x0 = max(int(np.floor(p[:, 0].min())), 0)
        x1 = min(int(np.ceil(p[:, 0].max())), r - 1)
        y0 = max(int(np.floor(p[:, 1].min())), 0)
        y1 = min(int(np.ceil(p[:, 1].max())), r - 1)
        if x1 < x0 or y1 < y0:
            continue
        xs = np.arange(x0, x1 + 1, dtype=np.float64) + 0.5
        ys = np.arange(y0, y1 + 1, dtype=np.float64) + 0.5
        cx, cy = np.meshgrid(xs, ys)
        inside = np.ones(cx.shape, dtype=bool)
        claim_ok = np.ones(cx.shape, dtype=bool)
        for k in range(3):
            ax, ay = p[k]
            bx, by = p[(k + 1) % 3]
            ex, ey = bx - ax, by - ay
            e = ex * (cy - ay) - ey * (cx - ax)  # inward-positive edge function
            inside &= e >= 0.0
            claim_ok &= e + 0.5 * (abs(ex) + abs(ey)) >= 0.0  # texel-box SAT
        block = (slice(y0, y1 + 1), slice(x0, x1 + 1))
        covered[block] |= inside
        prev = claim[block]
        c = int(charts[t])
        overlap[block] |= claim_ok & (prev >= 0) & (prev != c)
        claim[block] = np.where(claim_ok & (prev < 0), c, prev)

    bboxes = np.zeros((chart_count, 4), dtype=np.float64)
    for c in range(chart_count):
        uv = mesh.uvs[np.unique(mesh.triangles[charts == c])]
        bboxes[c] = [uv[:, 0].min(), uv[:, 1].min(), uv[:, 0].max(), uv[:, 1].max()]

    return ChartReport(resolution=r,
                       chart_count=chart_count,
                       overlap_texel_count=int(overlap.sum()),
                       covered_fraction=float(covered.mean()),
                       chart_bboxes=bboxes,
                       covered_mask=covered)
