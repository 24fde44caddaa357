"""Shared fixtures: simple scenes and view builders used across modules."""

import numpy as np
import pytest

from matbake import fixtures, geometry, raster


@pytest.fixture
def quad_mesh():
    return fixtures.make_quad()


@pytest.fixture
def front_camera():
    """Camera two units in front of the origin looking down -Z."""
    return geometry.Camera(
        rotation=geometry.look_at((0.0, 0.0, 2.0), (0.0, 0.0, 0.0)),
        position=np.array([0.0, 0.0, 2.0]),
        fov=np.deg2rad(45.0), width=128, height=128, name="front")


def constant_views(gbuffer, value, base=None):
    """IntrinsicViews with every channel equal to ``value`` on the mask."""
    m = gbuffer.mask
    c = np.float32(value)
    scalar = np.where(m, c, np.float32(0.0))
    base_val = np.float32(base if base is not None else value)
    return raster.IntrinsicViews(
        base_color=np.where(m, base_val, np.float32(0.0))[:, :, None]
        * np.ones(3, np.float32),
        roughness=scalar.copy(), metallicity=scalar.copy(),
        height=scalar.copy(), gbuffer=gbuffer)


def frame_filling_quad_camera(resolution):
    """Camera whose frustum cross-section at the quad plane is exactly the
    unit quad, so view pixels and atlas texels align one to one."""
    fov = np.deg2rad(45.0)
    dist = 0.5 / np.tan(0.5 * fov)
    return geometry.Camera(
        rotation=geometry.look_at((0.0, 0.0, dist), (0.0, 0.0, 0.0)),
        position=np.array([0.0, 0.0, dist]),
        fov=fov, width=resolution, height=resolution, name="fitted")
