"""Command-line front end wiring the pipeline stages into batch runs.

Subcommands
    gbuffer    rasterize per-view geometry buffers to float-raw files
    bake       splat per-view intrinsic images into a material atlas
    relight    render baked materials under environment probes
    roundtrip  render views from known materials, bake back, report metrics
    convert    height map to normal map and back

Every run writes a manifest.json into the output directory recording the
semantic configuration and output files. Thread count is an execution
detail that never changes results, so it is not part of the manifest and
reruns with different --threads are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import geometry, heightfield, io, metrics, raster, shade
from .bake import MaterialSet, bake as bake_atlas

log = logging.getLogger(__name__)

DEFAULT_FOV_DEG = 45.0
DEFAULT_ORBIT_ELEV_DEG = 15.0
DEFAULT_ORBIT_RADIUS_SCALE = 2.5  # times the mesh bbox diagonal
DEFAULT_RELIGHT_VIEWS = 4

_CHANNEL_FILES = ("basecolor", "roughness", "metallicity", "height")


def _parse_orbit(text: str) -> tuple[int, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"--orbit expects N,RADIUS,ELEV_DEG, got {text!r}")
    try:
        return int(parts[0]), float(parts[1]), float(parts[2])
    except ValueError as exc:
        raise ValueError(f"--orbit expects N,RADIUS,ELEV_DEG, got {text!r}") from exc


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, _, h = text.partition("x")
        return int(w), int(h)
    except ValueError as exc:
        raise ValueError(f"--size expects WIDTHxHEIGHT, got {text!r}") from exc


def _resolve_cameras(args, mesh, default_count: int | None = None):
    """Cameras from --cameras file, --orbit string, or the default orbit."""
    if getattr(args, "cameras", None) and getattr(args, "orbit", None):
        raise ValueError("give either --cameras or --orbit, not both")
    if getattr(args, "cameras", None):
        return geometry.load_cameras(args.cameras)
    size = _parse_size(args.size)
    fov = np.deg2rad(args.fov)
    if getattr(args, "orbit", None):
        n, radius, elev = _parse_orbit(args.orbit)
    elif default_count is not None:
        n = default_count
        radius = DEFAULT_ORBIT_RADIUS_SCALE * mesh.bbox_diagonal()
        elev = DEFAULT_ORBIT_ELEV_DEG
    else:
        raise ValueError("no cameras given: pass --cameras FILE or --orbit N,R,ELEV")
    return geometry.orbit_cameras(n, radius, np.deg2rad(elev), fov, size,
                                  center=mesh.bbox_center())


def _camera_config(args) -> dict:
    cfg = {}
    for key in ("cameras", "orbit", "size", "fov"):
        if getattr(args, key, None) is not None:
            cfg[key] = getattr(args, key)
    return cfg


def _render_gbuffers(mesh, cameras, threads: int):
    def one(cam):
        return raster.rasterize(mesh, cam)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, cameras))
    return [one(c) for c in cameras]


def _write_manifest(outdir: Path, command: str, config: dict,
                    outputs: list, diagnostics: dict | None = None) -> None:
    clean = {}
    for key, val in (diagnostics or {}).items():
        if isinstance(val, (bool, int, float, str)) or val is None:
            clean[key] = val
    doc = {"command": command, "config": config,
           "outputs": sorted(outputs)}
    if clean:
        doc["diagnostics"] = clean
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    (outdir / "manifest.json").write_text(text, encoding="ascii")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def save_material_set(outdir: Path, materials: MaterialSet,
                      height_amplitude: float = 1.0) -> list:
    """Write atlas channels as 16-bit linear PNGs plus the coverage mask and
    a normal map derived from the height channel."""
    names = []
    channels = {
        "basecolor": materials.base_color,
        "roughness": materials.roughness,
        "metallicity": materials.metallicity,
        "height": materials.height,
    }
    for name, data in channels.items():
        io.write_png(outdir / f"{name}.png", data, bit_depth=16)
        names.append(f"{name}.png")
    io.write_png(outdir / "mask.png", materials.mask.astype(np.float64),
                 bit_depth=8)
    names.append("mask.png")
    hm = heightfield.HeightMap(materials.height.astype(np.float64),
                               amplitude=height_amplitude)
    nm = heightfield.height_to_normal(hm)
    io.write_png(outdir / "normal.png", nm.values, bit_depth=16)
    names.append("normal.png")
    return names


def load_material_set(indir) -> MaterialSet:
    """Read a material set directory written by save_material_set."""
    indir = Path(indir)
    maps = {}
    for name in _CHANNEL_FILES:
        path = indir / f"{name}.png"
        if not path.exists():
            raise FileNotFoundError(f"missing {name} atlas image: {path}")
        maps[name] = io.read_png(path).data.astype(np.float64)
    res = maps["basecolor"].shape[0]
    for name, arr in maps.items():
        if arr.shape[:2] != (res, res):
            raise ValueError(
                f"{name}.png is {arr.shape[1]}x{arr.shape[0]}, expected {res}x{res}")
    if maps["basecolor"].ndim != 3:
        raise ValueError("basecolor.png must be RGB")
    mask_path = indir / "mask.png"
    if mask_path.exists():
        mask = io.read_png(mask_path).data > 0.5
    else:
        mask = np.ones((res, res), dtype=bool)
    ms = MaterialSet(res, maps["basecolor"], maps["roughness"],
                              maps["metallicity"], maps["height"], mask)
    ms.validate()
    return ms


def _load_view_images(views_dir, cameras) -> list:
    """Read the per-view intrinsic images for every camera, building
    IntrinsicViews against freshly rasterized G-buffers elsewhere."""
    views_dir = Path(views_dir)
    loaded = []
    for i, cam in enumerate(cameras):
        maps = {}
        for name in _CHANNEL_FILES:
            path = views_dir / f"view{i:03d}_{name}.png"
            if not path.exists():
                raise FileNotFoundError(
                    f"missing {name} image for view {i}: {path}")
            data = maps[name] = io.read_png(path).data.astype(np.float32)
            if data.shape[:2] != (cam.height, cam.width):
                raise ValueError(
                    f"{path} is {data.shape[1]}x{data.shape[0]}, camera "
                    f"{cam.name} renders {cam.width}x{cam.height}")
        if maps["basecolor"].ndim != 3:
            raise ValueError(f"view {i} basecolor must be RGB")
        loaded.append(maps)
    return loaded


def save_view_images(outdir: Path, views: list) -> list:
    """Write IntrinsicViews channel images (16-bit linear PNGs)."""
    names = []
    for i, view in enumerate(views):
        for name, data in (("basecolor", view.base_color),
                           ("roughness", view.roughness),
                           ("metallicity", view.metallicity),
                           ("height", view.height)):
            fname = f"view{i:03d}_{name}.png"
            io.write_png(outdir / fname, data, bit_depth=16)
            names.append(fname)
    return names


def cmd_gbuffer(args) -> int:
    mesh = geometry.load_mesh(args.mesh)
    mesh.validate()
    cameras = _resolve_cameras(args, mesh)
    gbufs = _render_gbuffers(mesh, cameras, args.threads)
    out = _outdir(args)
    names = []
    for i, gb in enumerate(gbufs):
        planes = {
            "normal": (gb.normal, "normal"),
            "position": (gb.position, "world_position"),
            "depth": (gb.depth, "view_depth"),
            "uvderiv": (np.concatenate([gb.uv, gb.duv_dx, gb.duv_dy], axis=2),
                        "uv_duvdx_duvdy"),
        }
        for name, (data, semantic) in planes.items():
            fname = f"view{i:03d}_{name}.fraw"
            io.write_float_raw(out / fname, data, semantic=semantic)
            names.append(fname)
    config = {"mesh": args.mesh, **_camera_config(args),
              "views": len(cameras)}
    _write_manifest(out, "gbuffer", config, names)
    print(f"gbuffer: wrote {len(names)} buffers for {len(cameras)} views to {out}")
    return 0


def _bake_from_args(args, mesh, cameras):
    images = _load_view_images(args.views, cameras)
    gbufs = _render_gbuffers(mesh, cameras, args.threads)
    views = [
        raster.IntrinsicViews(m["basecolor"], m["roughness"],
                              m["metallicity"], m["height"], gb)
        for m, gb in zip(images, gbufs)
    ]
    return bake_atlas(mesh, cameras, views, args.atlas,
                         upscale=args.upscale,
                         inpaint_radius=args.inpaint_radius,
                         threads=args.threads)


def cmd_bake(args) -> int:
    mesh = geometry.load_mesh(args.mesh)
    mesh.validate()
    cameras = _resolve_cameras(args, mesh)
    materials = _bake_from_args(args, mesh, cameras)
    out = _outdir(args)
    names = save_material_set(out, materials, args.height_amplitude)
    config = {"mesh": args.mesh, **_camera_config(args),
              "views_dir": args.views, "atlas": args.atlas,
              "upscale": args.upscale, "inpaint_radius": args.inpaint_radius,
              "height_amplitude": args.height_amplitude}
    _write_manifest(out, "bake", config, names, materials.diagnostics)
    cov = materials.diagnostics.get("coverage_fraction", 0.0)
    print(f"bake: {args.atlas}x{args.atlas} atlas from {len(cameras)} views, "
          f"coverage {cov:.4f}, wrote {len(names)} files to {out}")
    return 0


def cmd_relight(args) -> int:
    mesh = geometry.load_mesh(args.mesh)
    mesh.validate()
    cameras = _resolve_cameras(args, mesh, default_count=DEFAULT_RELIGHT_VIEWS)
    materials = load_material_set(args.materials)
    probes = [shade.load_probe(p) for p in args.probe]
    gbufs = _render_gbuffers(mesh, cameras, args.threads)
    views = [raster.render_intrinsics_from_gbuffer(gb, materials)
             for gb in gbufs]
    out = _outdir(args)
    names = []
    for j, probe in enumerate(probes):
        if args.reference:
            shader = lambda v, c: shade.shade_reference_mc(
                v, probe, c, samples=args.spp, seed=args.seed)
        else:
            pref = shade.prefilter(probe)
            shader = lambda v, c: shade.shade_splitsum(v, pref, c)
        for i, (view, cam) in enumerate(zip(views, cameras)):
            linear = shader(view, cam)
            display = shade.tonemap(linear, exposure=args.exposure)
            fname = f"relight_v{i:03d}_p{j:02d}.png"
            io.write_png(out / fname, display, bit_depth=8)
            names.append(fname)
    config = {"mesh": args.mesh, **_camera_config(args),
              "materials": args.materials, "probes": list(args.probe),
              "exposure": args.exposure, "reference": bool(args.reference),
              "views": len(cameras)}
    if args.reference:
        config["spp"] = args.spp
        config["seed"] = args.seed
    _write_manifest(out, "relight", config, names)
    print(f"relight: {len(cameras)} views x {len(probes)} probes "
          f"-> {len(names)} images in {out}")
    return 0


def cmd_roundtrip(args) -> int:
    mesh = geometry.load_mesh(args.mesh)
    mesh.validate()
    cameras = _resolve_cameras(args, mesh)
    truth = load_material_set(args.materials)
    if truth.resolution != args.atlas:
        raise ValueError(
            f"ground truth atlas is {truth.resolution}, --atlas says {args.atlas}")
    gbufs = _render_gbuffers(mesh, cameras, args.threads)
    views = [raster.render_intrinsics_from_gbuffer(gb, truth) for gb in gbufs]
    baked = bake_atlas(mesh, cameras, views, args.atlas,
                          upscale=args.upscale,
                          inpaint_radius=args.inpaint_radius,
                          threads=args.threads)
    covered = baked.diagnostics["covered_mask"]
    report = metrics.compare_material_sets(baked, truth, mask=covered)

    out = _outdir(args)
    names = save_material_set(out, baked, args.height_amplitude)
    rep = report.as_dict()
    rep["coverage_fraction"] = baked.diagnostics["coverage_fraction"]
    (out / "report.json").write_text(
        json.dumps(rep, indent=2, sort_keys=True) + "\n", encoding="ascii")
    lines = "".join(f"{k}={rep[k]:.6f}\n" for k in sorted(rep))
    (out / "report.txt").write_text(lines, encoding="ascii")
    names += ["report.json", "report.txt"]
    config = {"mesh": args.mesh, **_camera_config(args),
              "materials": args.materials, "atlas": args.atlas,
              "upscale": args.upscale, "inpaint_radius": args.inpaint_radius,
              "height_amplitude": args.height_amplitude}
    _write_manifest(out, "roundtrip", config, names, baked.diagnostics)
    for key in sorted(rep):
        print(f"{key}={rep[key]:.6f}")
    return 0


def cmd_convert(args) -> int:
    out = _outdir(args)
    if args.direction == "height-to-normal":
        buf = io.read_png(args.input)
        if buf.data.ndim != 2:
            raise ValueError(f"{args.input}: height map must be grayscale")
        hm = heightfield.HeightMap(buf.data.astype(np.float64),
                                   amplitude=args.amplitude)
        nm = heightfield.height_to_normal(hm)
        io.write_png(out / "normal.png", nm.values, bit_depth=16)
        names = ["normal.png"]
        diag = {"amplitude": args.amplitude}
    else:
        buf = io.read_png(args.input)
        if buf.data.ndim != 3 or buf.data.shape[2] != 3:
            raise ValueError(f"{args.input}: normal map must be RGB")
        nm = heightfield.TangentNormalMap(buf.data.astype(np.float64))
        hm = heightfield.normal_to_height(nm)
        io.write_png(out / "height.png", hm.values, bit_depth=16)
        names = ["height.png"]
        diag = {"amplitude": hm.amplitude, **hm.diagnostics}
    config = {"direction": args.direction, "input": args.input,
              "amplitude": args.amplitude}
    _write_manifest(out, "convert", config, names, diag)
    print(f"convert: {args.direction} -> {out / names[0]}")
    return 0


def _add_common(p, *, cameras=True):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads (results are identical for any value)")
    if cameras:
        p.add_argument("--mesh", required=True, help="OBJ mesh path")
        p.add_argument("--cameras", help="camera config file")
        p.add_argument("--orbit", help="orbit cameras as N,RADIUS,ELEV_DEG")
        p.add_argument("--size", default="512x512",
                       help="orbit view size WIDTHxHEIGHT (default 512x512)")
        p.add_argument("--fov", type=float, default=DEFAULT_FOV_DEG,
                       help="orbit vertical field of view in degrees")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matbake",
        description="Multi-view PBR material baking toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gbuffer", help="rasterize per-view geometry buffers")
    _add_common(p)
    p.set_defaults(func=cmd_gbuffer)

    p = sub.add_parser("bake", help="bake view intrinsics into an atlas")
    _add_common(p)
    p.add_argument("--views", required=True,
                   help="directory with view{NNN}_{channel}.png images")
    p.add_argument("--atlas", type=int, default=256, help="atlas resolution")
    p.add_argument("--upscale", type=int, default=4,
                   help="view upscale factor before splatting")
    p.add_argument("--inpaint-radius", type=int, default=4)
    p.add_argument("--height-amplitude", type=float, default=1.0,
                   help="height scale for the derived normal map")
    p.set_defaults(func=cmd_bake)

    p = sub.add_parser("relight", help="render baked materials under probes")
    _add_common(p)
    p.add_argument("--materials", required=True,
                   help="baked material set directory")
    p.add_argument("--probe", action="append", required=True,
                   help="HDR probe path (repeatable)")
    p.add_argument("--exposure", type=float, default=1.0)
    p.add_argument("--reference", action="store_true",
                   help="Monte Carlo reference instead of split-sum")
    p.add_argument("--spp", type=int, default=128,
                   help="reference samples per pixel")
    p.add_argument("--seed", type=int, default=0,
                   help="reference sampling seed")
    p.set_defaults(func=cmd_relight)

    p = sub.add_parser("roundtrip",
                       help="render, bake back, compare to ground truth")
    _add_common(p)
    p.add_argument("--materials", required=True,
                   help="ground-truth material set directory")
    p.add_argument("--atlas", type=int, default=256)
    p.add_argument("--upscale", type=int, default=4)
    p.add_argument("--inpaint-radius", type=int, default=4)
    p.add_argument("--height-amplitude", type=float, default=1.0)
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("convert", help="height/normal map conversion")
    p.add_argument("direction",
                   choices=["height-to-normal", "normal-to-height"])
    p.add_argument("--input", required=True, help="input PNG")
    p.add_argument("--amplitude", type=float, default=1.0,
                   help="height amplitude (height-to-normal direction)")
    _add_common(p, cameras=False)
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
