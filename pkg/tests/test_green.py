import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stratwave import green, modes, waveguide as wg
from stratwave.special import hankel_h1_0

SRC = np.array([0.0, 0.0, 50.0])


def rotate(p, ang, about):
    c, s = np.cos(ang), np.sin(ang)
    d = p[:2] - about[:2]
    return np.array([about[0] + c * d[0] - s * d[1], about[1] + s * d[0] + c * d[1], p[2]])


@settings(max_examples=20)
@given(st.floats(1.0, 80.0), st.floats(0.0, 100.0), st.floats(0.0, 100.0),
       st.floats(0, 2 * np.pi), st.floats(-50, 50), st.floats(-50, 50))
def test_horizontal_invariance_and_depth_symmetry(r, z, zs, ang, tx, ty):
    b = _basis()
    x, xs = np.array([r, 0.0, z]), np.array([0.0, 0.0, zs])
    g = green.green_series(b, x, xs)
    shift = np.array([tx, ty, 0.0])
    moved = green.green_series(b, rotate(x, ang, xs) + shift, xs + shift)
    swapped = green.green_series(b, np.array([r, 0.0, zs]), np.array([0.0, 0.0, z]))
    assert abs(moved - g) <= 1e-9 * abs(g) + 1e-15
    assert abs(swapped - g) <= 1e-12 * abs(g) + 1e-18


_CACHE = {}


def _basis():
    if "b" not in _CACHE:
        _CACHE["b"] = modes.find_modes(wg.REFERENCE_WAVEGUIDE, r_min=1.0, tol_modes=1e-10)
    return _CACHE["b"]


def test_series_matches_hankel_transform(cfg, basis_far):
    rng = np.random.default_rng(11)
    lam = 2 * np.pi / cfg.q[0]
    for _ in range(3):
        r = rng.uniform(lam, 4 * lam)
        x = np.array([r, 0.0, rng.uniform(2, 98)])
        xs = np.array([0.0, 0.0, rng.uniform(2, 98)])
        gs = green.green_series(basis_far, x, xs)
        go = green.green_hankel_oracle(cfg, x, xs)
        assert abs(gs - go) <= 1e-3 * abs(go)


def test_oracle_symmetric_in_depths(cfg):
    a = green.green_hankel_oracle(cfg, [20.0, 0.0, 10.0], [0.0, 0.0, 75.0])
    b = green.green_hankel_oracle(cfg, [20.0, 0.0, 75.0], [0.0, 0.0, 10.0])
    assert abs(a - b) <= 1e-6 * abs(a)


def homogeneous_modal_sum(k, h, r, z, zs, n_terms=4000):
    mu = (np.arange(1, n_terms + 1) - 0.5) * np.pi / h
    xi = np.sqrt((k * k - mu * mu).astype(complex))
    xi = np.where(xi.imag < 0, -xi, xi)
    return 1j / (2 * h) * np.sum(np.sin(mu * z) * np.sin(mu * zs) * hankel_h1_0(xi * r))


def test_homogeneous_series_and_oracle_match_analytic(homog):
    b = modes.find_modes(homog, r_min=2.0, tol_modes=1e-12)
    for r, z, zs in ((5.0, 30.0, 60.0), (40.0, 10.0, 90.0), (12.0, 50.0, 50.0)):
        ref = homogeneous_modal_sum(0.3, homog.h, r, z, zs)
        gs = green.green_series(b, [r, 0, z], [0, 0, zs])
        assert abs(gs - ref) <= 1e-8 * abs(ref)
        go = green.green_hankel_oracle(homog, [r, 0, z], [0, 0, zs])
        assert abs(go - ref) <= 1e-4 * abs(ref)


def test_boundary_conditions(cfg, basis_far):
    pts = np.array([[r, 0.0, z] for r in (5.0, 20.0, 50.0) for z in np.linspace(0, 100, 101)])
    big = np.abs(green.green_pairs(basis_far, pts, SRC)).max()
    top = green.green_pairs(basis_far, np.array([[r, 0.0, 0.0] for r in (5.0, 20.0, 50.0)]), SRC)
    assert np.abs(top).max() <= 1e-6 * big
    step = 1e-3 * cfg.h
    for r in (5.0, 20.0, 50.0):
        f = green.green_pairs(basis_far, np.array([[r, 0, cfg.h - j * step] for j in range(3)]), SRC)
        slope = (3 * f[0] - 4 * f[1] + f[2]) / (2 * step)
        assert abs(slope) <= 1e-4 * cfg.q[0] * big


@pytest.mark.parametrize("r", [5.0, 25.0])
def test_interface_conditions(cfg, basis_far, r):
    s = 1e-3
    eps = 1e-9
    for i, d in enumerate((cfg.d1, cfg.d2)):
        def g(z):
            return green.green_pairs(basis_far, np.array([[r, 0.0, zz] for zz in z]), SRC)
        up = g([d - eps, d - s, d - 2 * s])
        dn = g([d, d + s, d + 2 * s])
        ra, rb = cfg.rho[i], cfg.rho[i + 1]
        assert abs(ra * up[0] - rb * dn[0]) <= 1e-4 * abs(ra * up[0])
        d_up = (3 * up[0] - 4 * up[1] + up[2]) / (2 * s)
        d_dn = -(3 * dn[0] - 4 * dn[1] + dn[2]) / (2 * s)
        assert abs(d_up - d_dn) <= 1e-4 * max(abs(d_up), abs(d_dn))


@pytest.mark.parametrize("x", [[20, 5, 10], [30, 0, 50], [15, 15, 80], [40, 10, 30], [10, 3, 60]])
def test_helmholtz_residual(cfg, basis_far, x):
    x = np.array(x, dtype=float)
    s = 1e-2
    pts = [x]
    for a in range(3):
        for sign in (1, -1):
            e = np.zeros(3)
            e[a] = sign * s
            pts.append(x + e)
    g = green.green_pairs(basis_far, np.array(pts), SRC)
    lap = (g[1:].sum() - 6 * g[0]) / s ** 2
    q = wg.background_q(cfg, x[2])
    assert abs(lap + q * q * g[0]) <= 1e-2 * q * q * abs(g[0])


def test_short_distance_needs_override(basis_far):
    with pytest.raises(wg.DomainError):
        green.green_series(basis_far, [0.5, 0, 40], [0, 0, 50])
    v = green.green_series(basis_far, [0.5, 0, 40], [0, 0, 50], r_eff=1.0)
    assert v == green.green_series(basis_far, [1.0, 0, 40], [0, 0, 50])


def test_chunked_path_matches_table(basis_far, monkeypatch):
    rng = np.random.default_rng(2)
    x = np.c_[rng.uniform(-40, 40, (50, 2)), rng.uniform(0, 100, 50)]
    xs = np.c_[rng.uniform(-40, 40, (50, 2)), rng.uniform(0, 100, 50)]
    x[:, 0] += 100.0
    ref = green.green_pairs(basis_far, x, xs)
    monkeypatch.setattr(green, "_TABLE_LIMIT", 10)
    np.testing.assert_allclose(green.green_pairs(basis_far, x, xs), ref, rtol=1e-12)


def test_batching_does_not_change_values(basis_far):
    rng = np.random.default_rng(5)
    x = np.c_[rng.uniform(5, 60, (40, 2)), rng.uniform(0, 100, 40)]
    xs = np.array([0.0, 0.0, 45.0])
    batch = green.green_pairs(basis_far, x, xs)
    single = np.array([green.green_series(basis_far, p, xs) for p in x])
    np.testing.assert_allclose(batch, single, rtol=1e-13)


def test_quadrature_failure_is_reported(cfg):
    with pytest.raises(green.QuadratureError):
        green.green_hankel_oracle(cfg, [20, 0, 10], [0, 0, 60], order=2, rtol=1e-12)
