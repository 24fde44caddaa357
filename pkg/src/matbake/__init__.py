"""Multi-view PBR material baking toolkit.

Renders per-view G-buffers and intrinsic channels from a UV-mapped mesh,
splats them into a texture atlas weighted by inverse screen-space UV
footprint, fills uncovered texels by fast marching, converts height maps
to tangent normal maps and back, and validates the result by relighting
under environment probes against a Monte Carlo reference.
"""

from .bake import AccumAtlas, MaterialSet, bake, inpaint_uncovered, normalize, splat_view, splat_weight
from .geometry import Camera, Mesh, load_cameras, load_mesh, orbit_cameras, save_cameras, save_mesh, validate_atlas
from .heightfield import HeightMap, TangentNormalMap, height_to_normal, normal_to_height, pack_hrm, unpack_hrm
from .io import ImageBuffer, read_float_raw, read_hdr, read_png, write_float_raw, write_hdr, write_png
from .metrics import MetricReport, compare_material_sets, psnr, ssim
from .raster import GBuffer, IntrinsicViews, rasterize, render_intrinsics
from .shade import EnvironmentProbe, PrefilteredProbe, load_probe, prefilter, shade_reference_mc, shade_splitsum, tonemap

__version__ = "0.1.0"

__all__ = [
    "AccumAtlas", "Camera", "EnvironmentProbe", "GBuffer", "HeightMap",
    "ImageBuffer", "IntrinsicViews", "MaterialSet", "Mesh", "MetricReport",
    "PrefilteredProbe", "TangentNormalMap", "bake", "compare_material_sets",
    "height_to_normal", "inpaint_uncovered", "load_cameras", "load_mesh",
    "load_probe", "normal_to_height", "normalize", "orbit_cameras",
    "pack_hrm", "prefilter", "psnr", "rasterize", "read_float_raw",
    "read_hdr", "read_png", "render_intrinsics", "save_cameras", "save_mesh",
    "shade_reference_mc", "shade_splitsum", "splat_view", "splat_weight",
    "ssim", "tonemap", "unpack_hrm", "validate_atlas", "write_float_raw",
    "write_hdr", "write_png",
]
