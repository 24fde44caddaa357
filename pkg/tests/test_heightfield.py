"""Height <-> normal conversion: frozen ramps, Poisson integration oracle."""

import numpy as np
import pytest

from matbake.heightfield import (HeightMap, TangentNormalMap, decode_normal,
                                 encode_normal, height_to_normal,
                                 normal_to_height, pack_hrm, unpack_hrm,
                                 _poisson_solve)


def texel_centers(n):
    return (np.arange(n) + 0.5) / n


def heightmap(values, amplitude=1.0):
    return HeightMap(np.asarray(values, np.float64), amplitude=amplitude)


def test_encode_decode_normal_round_trip():
    rng = np.random.default_rng(0)
    n = rng.normal(size=(8, 8, 3))
    n[..., 2] = np.abs(n[..., 2]) + 0.1
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    assert np.abs(decode_normal(encode_normal(n)) - n).max() < 1e-15
    assert np.allclose(encode_normal([0.0, 0.0, 1.0]), [0.5, 0.5, 1.0])


@pytest.mark.parametrize("axis", [0, 1])
@pytest.mark.parametrize("amplitude", [0.5, 1.0, 2.0])
def test_linear_ramp_gives_constant_normal(axis, amplitude):
    # h = u (texel centers): the uv-space gradient is exactly 1 along the
    # ramp axis, so n = normalize((-a, 0, 1)) at every texel
    r = 16
    ramp = np.tile(texel_centers(r), (r, 1))
    if axis == 0:
        ramp = ramp.T
    nm = height_to_normal(heightmap(ramp, amplitude))
    nm.validate()
    n = decode_normal(nm.values)
    want = np.zeros(3)
    want[1 - axis] = -amplitude  # axis 1 varies u -> slope in x component
    want[2] = 1.0
    want /= np.linalg.norm(want)
    assert np.abs(n - want).max() < 1e-12


def test_flat_height_gives_straight_up_normals():
    nm = height_to_normal(heightmap(np.full((9, 9), 0.42)))
    assert np.abs(nm.values - [0.5, 0.5, 1.0]).max() == 0.0


@pytest.mark.parametrize("k", [1, 2, 4, 8, 16])
def test_sinusoid_normals_match_analytic_gradient(k):
    # band limit k <= resolution / 8: central differences resolve the
    # cosine gradient to 1e-2 in every normal component
    r = 128
    u = texel_centers(r)
    h = 0.5 + 0.5 * np.sin(2 * np.pi * k * u)
    nm = height_to_normal(heightmap(np.tile(h, (r, 1))))
    got = decode_normal(nm.values)
    g = np.pi * k * np.cos(2 * np.pi * k * u)
    want = np.stack([-g, np.zeros(r), np.ones(r)], axis=-1)
    want /= np.linalg.norm(want, axis=-1, keepdims=True)
    assert np.abs(got - want[None, :, :]).max() <= 1e-2


def test_poisson_solve_matches_dense_least_squares():
    # independent oracle: assemble the periodic central-difference operator
    # densely and let lstsq produce the minimum-norm least-squares height
    n = 16
    rng = np.random.default_rng(21)
    p = rng.normal(scale=0.1, size=(n, n))
    q = rng.normal(scale=0.1, size=(n, n))

    idx = np.arange(n * n).reshape(n, n)
    rows = []
    for shift, ax in (((0, 1), 1), ((1, 0), 0)):
        d = np.zeros((n * n, n * n))
        fwd = np.roll(idx, -1, axis=ax).ravel()
        bwd = np.roll(idx, 1, axis=ax).ravel()
        d[np.arange(n * n), fwd] += 0.5
        d[np.arange(n * n), bwd] -= 0.5
        rows.append(d)
    a = np.vstack(rows)
    g = np.concatenate([p.ravel(), q.ravel()])
    want, *_ = np.linalg.lstsq(a, g, rcond=None)

    got = _poisson_solve(p, q).ravel()
    assert np.abs(got - want).max() < 1e-8
    # objective value agrees: both are least-squares minimizers
    assert np.isclose(np.sum((a @ got - g) ** 2), np.sum((a @ want - g) ** 2),
                      rtol=1e-10)


def test_flat_normals_integrate_to_half():
    nm = TangentNormalMap(np.tile(np.float64([0.5, 0.5, 1.0]), (12, 12, 1)))
    hm = normal_to_height(nm)
    assert np.all(hm.values == 0.5)
    assert hm.amplitude == 1.0
    assert hm.diagnostics["curl_rms"] < 1e-12


@pytest.mark.parametrize("seed", [3, 7, 11])
def test_band_limited_round_trip_recovers_height(seed):
    # random height made of low-frequency cosines survives the
    # normal-map round trip to 1e-2 RMSE up to the additive constant
    r = 64
    rng = np.random.default_rng(seed)
    u = texel_centers(r)
    h = np.zeros((r, r))
    for _ in range(6):
        ku, kv = rng.integers(0, r // 8, 2)
        ph_u, ph_v = rng.uniform(0, 2 * np.pi, 2)
        h += rng.uniform(0.2, 1.0) * np.outer(
            np.cos(2 * np.pi * kv * u + ph_v), np.cos(2 * np.pi * ku * u + ph_u))
    h = (h - h.min()) / (h.max() - h.min())
    amp = 0.8
    back = normal_to_height(height_to_normal(heightmap(h, amp)))

    got = back.values * back.amplitude / amp
    want = h
    diff = got - want
    diff -= diff.mean()
    rmse = np.sqrt((diff ** 2).mean())
    assert rmse < 1e-2
    assert abs(back.amplitude - amp) / amp < 0.05
    assert back.diagnostics["curl_rms"] < 1e-10
    assert back.diagnostics["residual_rms"] < 1e-2


def test_round_trip_is_exact_up_to_scale_for_single_mode():
    # one periodic mode is in the span of the central-difference operator:
    # integration inverts differentiation up to interpolation error only
    r = 64
    u = texel_centers(r)
    h = 0.5 + 0.25 * np.sin(2 * np.pi * 2 * u)
    hm = heightmap(np.tile(h, (r, 1)), amplitude=0.5)
    back = normal_to_height(height_to_normal(hm))
    got = back.values - back.values.mean()
    want = np.tile(h, (r, 1)) - 0.5
    scale = back.amplitude / 0.5
    assert np.abs(got * scale - want).max() < 2e-3


def test_flip_equivariance():
    rng = np.random.default_rng(13)
    h = rng.uniform(0.1, 0.9, (32, 32))
    nm = height_to_normal(heightmap(h, 0.7))
    flipped = height_to_normal(heightmap(h[:, ::-1], 0.7))
    n = decode_normal(nm.values)
    f = decode_normal(flipped.values)
    # mirroring u negates the x slope and leaves y, z untouched
    assert np.abs(f[:, ::-1, 0] + n[..., 0]).max() < 1e-12
    assert np.abs(f[:, ::-1, 1] - n[..., 1]).max() < 1e-12
    assert np.abs(f[:, ::-1, 2] - n[..., 2]).max() < 1e-12


def test_curl_diagnostic_flags_non_integrable_field():
    # normals manufactured from a rotational slope field: large curl, and
    # the output is the least-squares projection, not a literal inverse
    n = 24
    yy, xx = np.mgrid[0:n, 0:n] - (n - 1) / 2
    p = -yy / n
    q = xx / n
    vec = np.stack([-p * n, -q * n, np.ones_like(p)], axis=2)
    vec /= np.linalg.norm(vec, axis=2, keepdims=True)
    hm = normal_to_height(TangentNormalMap(encode_normal(vec)))
    assert hm.diagnostics["curl_rms"] > 1e-3
    assert hm.diagnostics["residual_rms"] > 1e-3
    hm.validate()


def test_pack_unpack_hrm_bit_identical():
    rng = np.random.default_rng(4)
    h = rng.uniform(0, 1, (16, 16)).astype(np.float32)
    r = rng.uniform(0, 1, (16, 16)).astype(np.float32)
    m = rng.uniform(0, 1, (16, 16)).astype(np.float32)
    packed = pack_hrm(h, r, m)
    assert packed.shape == (16, 16, 3)
    h2, r2, m2 = unpack_hrm(packed)
    assert np.array_equal(h2, h) and np.array_equal(r2, r)
    assert np.array_equal(m2, m)
    with pytest.raises(ValueError, match="equal 2-d maps"):
        pack_hrm(h, r[:8], m)
    with pytest.raises(ValueError):
        unpack_hrm(np.zeros((4, 4, 2)))


def test_height_map_validation_errors():
    with pytest.raises(ValueError, match="2-d"):
        heightmap(np.zeros((4, 4, 3))).validate()
    with pytest.raises(ValueError, match="0, 1"):
        heightmap(np.full((4, 4), 1.5)).validate()
    with pytest.raises(ValueError, match="finite"):
        heightmap(np.full((4, 4), np.nan)).validate()
    with pytest.raises(ValueError, match="amplitude"):
        heightmap(np.full((4, 4), 0.5), amplitude=0.0).validate()


def test_normal_map_validation_errors():
    flat = np.tile(np.float64([0.5, 0.5, 1.0]), (4, 4, 1))
    TangentNormalMap(flat).validate()
    with pytest.raises(ValueError, match="unit"):
        TangentNormalMap(flat * 0.8).validate()
    down = np.tile(np.float64([0.5, 0.5, 0.0]), (4, 4, 1))
    with pytest.raises(ValueError, match="z component"):
        TangentNormalMap(down).validate()
    with pytest.raises(ValueError, match=r"\(H, W, 3\)"):
        TangentNormalMap(np.zeros((4, 4))).validate()
