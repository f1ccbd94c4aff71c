"""Point-source Green's function of the layered waveguide.

``green_series`` sums normal modes (fast path).  ``green_hankel_oracle``
integrates the Hankel transform of the depth-separated Green's function along a
contour just below the real axis; it never uses the roots and serves as an
independent check of the series.
"""

from __future__ import annotations

import math

import numpy as np

from .modes import ModalBasis, dispersion
from .special import bessel_j0, hankel_h1_0
from .waveguide import DomainError, WaveguideConfig

# Budget for the (depth x depth x distance x mode) table in green_pairs.
_TABLE_LIMIT = 40_000_000


class QuadratureError(RuntimeError):
    pass


def _split(x, xs):
    x = np.asarray(x, dtype=float)
    xs = np.asarray(xs, dtype=float)
    x, xs = np.broadcast_arrays(x, xs)
    r = np.hypot(x[..., 0] - xs[..., 0], x[..., 1] - xs[..., 1])
    return r, x[..., 2], xs[..., 2]


def series_from_profiles(weights, prof_a, prof_b, hank):
    """``-(i/2) sum_n w_n Phi_n(a) Phi_n(b) H0(xi_n r)`` for tabulated factors.

    ``prof_a`` is ``(n, A)``, ``prof_b`` is ``(n, B)``, ``hank`` is ``(n, R)``;
    returns ``(A, B, R)``.
    """
    wa = prof_a * weights[:, None]
    return -0.5j * np.einsum("na,nb,nr->abr", wa, prof_b, hank, optimize=True)


def _masked_hankel(basis, k, rr):
    """``H0(xi_n r)`` for the leading ``k`` modes, zeroed past each distance's own cutoff.

    The truncation then depends on ``r`` alone, not on how distances are batched.
    """
    hank = hankel_h1_0(basis.xi[:k, None] * rr[None, :])
    if basis.tol_modes < 1:
        cut = math.log(1.0 / basis.tol_modes) / np.asarray(rr, dtype=float)
    else:
        cut = np.zeros(np.size(rr))
    keep = basis.n_propagating + np.searchsorted(basis.xi.imag[basis.n_propagating:], cut, side="right")
    hank[np.arange(k)[:, None] >= keep[None, :]] = 0.0
    return hank


def green_pairs(basis: ModalBasis, x, xs, r_eff=None):
    """Vectorized series evaluation for arrays of targets ``x`` and sources ``xs``.

    Distances below ``basis.r_min`` are replaced by ``r_eff`` when given and
    rejected otherwise.  Depths and distances are tabulated on their unique
    values, so grids with repeated depths or offsets are cheap.
    """
    r, z, zs = _split(x, xs)
    shape = r.shape
    r, z, zs = r.ravel(), z.ravel(), zs.ravel()
    short = r < basis.r_min * (1 - 1e-12)
    if np.any(short):
        if r_eff is None:
            raise DomainError(
                f"horizontal distance {r[short].min():.3g} below r_min={basis.r_min:.3g}; "
                "the modal series is not converged there (pass r_eff to mollify)")
        r = np.where(short, r_eff, r)
    if r.size == 0:
        return np.zeros(shape, dtype=complex)
    if np.any(r <= 0):
        raise DomainError("zero horizontal distance needs a positive r_eff")
    uz, iz = np.unique(z, return_inverse=True)
    us, is_ = np.unique(zs, return_inverse=True)
    ur, ir = np.unique(r, return_inverse=True)
    n = basis.n_needed(float(ur[0]))
    pz = basis.profiles(uz, n)
    ps = basis.profiles(us, n)
    w = basis.weights[:n]
    if uz.size * us.size * ur.size <= _TABLE_LIMIT // 8:
        # unique distances are sorted, so each block truncates at its own nearest distance
        table = np.empty((uz.size, us.size, ur.size), dtype=complex)
        block = max(1, _TABLE_LIMIT // max(1, uz.size * us.size * n))
        for start in range(0, ur.size, block):
            rr = ur[start:start + block]
            k = basis.n_needed(float(rr[0]))
            hank = _masked_hankel(basis, k, rr)
            table[:, :, start:start + rr.size] = series_from_profiles(w[:k], pz[:k], ps[:k], hank)
        return table[iz, is_, ir].reshape(shape)
    order = np.argsort(r, kind="stable")
    out = np.empty(r.size, dtype=complex)
    for start in range(0, r.size, 2048):
        sl = order[start:start + 2048]
        rr = r[sl]
        k = basis.n_needed(float(rr[0]))
        hank = _masked_hankel(basis, k, rr)
        out[sl] = -0.5j * np.sum(w[:k, None] * pz[:k, iz[sl]] * ps[:k, is_[sl]] * hank, axis=0)
    return out.reshape(shape)


def green_series(basis: ModalBasis, x, xs, r_eff=None):
    """Green's function ``G(x; xs)`` by the residue (normal-mode) series.

    ``G = -(i/2) sum_n xi_n Phi_n(x3) Phi_n(xs3) / W_n H0^(1)(xi_n r)``.
    """
    out = green_pairs(basis, x, xs, r_eff=r_eff)
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Hankel-transform oracle

def _step_limit(t2):
    # substep so that the growth exp(|Im tau| s) of one step stays moderate
    return 30.0 / max(float(np.max(np.abs(np.sqrt(t2).imag))), 1e-12)


def _propagate(cfg, t2s, state, logs, z_from, z_to):
    """Carry a depth solution from ``z_from`` to ``z_to`` with renormalization.

    ``state`` is ``(value, slope)`` arrays over the contour nodes and ``logs``
    the accumulated log scale.  Interfaces apply the density jump.
    """
    v, d = state
    rho = cfg.rho
    down = z_to >= z_from
    inner = [b for b in (cfg.d1, cfg.d2) if min(z_from, z_to) < b < max(z_from, z_to)]
    edges = sorted({z_from, z_to, *inner})
    if not down:
        edges = edges[::-1]
        if z_from in (cfg.d1, cfg.d2) and z_to < z_from:
            # states on an interface are deep-side values; step into the upper layer
            i = 0 if z_from == cfg.d1 else 1
            v = v * (rho[i + 1] / rho[i])
    z = z_from
    for target in edges[1:]:
        mid = 0.5 * (z + target)
        layer = cfg.layer_of(mid)
        t2 = t2s[layer]
        length = abs(target - z)
        nsub = max(1, math.ceil(length / _step_limit(t2)))
        ds = length / nsub
        tau = np.sqrt(t2)
        c = np.cos(tau * ds)
        s = ds * np.sinc(tau * ds / np.pi)
        for _ in range(nsub):
            if down:
                v, d = c * v + s * d, -t2 * s * v + c * d
            else:
                v, d = c * v - s * d, t2 * s * v + c * d
            scale = np.maximum(np.abs(v), np.abs(d) / np.maximum(np.abs(tau), 1e-300))
            scale = np.where(scale > 0, scale, 1.0)
            v, d = v / scale, d / scale
            logs = logs + np.log(scale)
        z = target
        # interface crossing
        if target in (cfg.d1, cfg.d2) and target != z_to:
            i = 0 if target == cfg.d1 else 1
            v = v * (rho[i] / rho[i + 1] if down else rho[i + 1] / rho[i])
    if z_to in (cfg.d1, cfg.d2) and z_to != z_from:
        # an endpoint on an interface takes the deep-side value
        i = 0 if z_to == cfg.d1 else 1
        if down:
            v = v * (rho[i] / rho[i + 1])
    return (v, d), logs


def transformed_green(cfg: WaveguideConfig, xi, x3, xs3):
    """Depth-separated Green's function ``-phi1(x3<) phi2(x3>) / W`` on nodes ``xi``.

    Overflow-safe for large ``|xi|``: each solution is propagated with
    renormalization and only log-ratio scale factors are exponentiated.
    """
    xi = np.asarray(xi, dtype=complex)
    a, b = min(x3, xs3), max(x3, xs3)
    t2s = tuple(q * q - xi * xi for q in cfg.q)
    one = np.ones_like(xi)
    zero = np.zeros_like(xi)
    (va, _), la = _propagate(cfg, t2s, (zero, one), np.zeros(xi.shape), 0.0, a)
    (vb, db), lb = _propagate(cfg, t2s, (one, zero), np.zeros(xi.shape), cfg.h, b)
    (v0, _), l0 = _propagate(cfg, t2s, (vb, db), lb.copy(), b, 0.0)
    return va * vb / v0 * np.exp(la + lb - l0)


def _gauss_panels(edges, order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    a = edges[:-1, None]
    b = edges[1:, None]
    t = 0.5 * (b - a) * nodes[None, :] + 0.5 * (a + b)
    w = 0.5 * (b - a) * weights[None, :]
    return t.ravel(), w.ravel()


def _real_poles(cfg, upper, n=20000):
    grid = np.linspace(upper * 1e-9, upper, n)
    f = np.real(dispersion(cfg, grid))
    idx = np.nonzero(np.sign(f[:-1]) != np.sign(f[1:]))[0]
    lo, hi, flo = grid[idx], grid[idx + 1], f[idx]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = np.real(dispersion(cfg, mid))
        left = np.sign(fm) == np.sign(flo)
        lo, flo, hi = np.where(left, mid, lo), np.where(left, fm, flo), np.where(left, hi, mid)
    return 0.5 * (lo + hi)


def _panel_edges(poles, upper_dense, xi_max, eps, width_dense, width_far):
    edges = [np.arange(0.0, upper_dense, width_dense), [upper_dense]]
    for p in poles:
        g = eps * 2.0 ** np.arange(0, 40)
        g = g[g < 4 * width_dense]
        edges.append(p - g)
        edges.append(p + g)
        edges.append([p])
    edges.append(np.arange(upper_dense, xi_max, width_far))
    edges.append([xi_max])
    e = np.unique(np.concatenate([np.asarray(x, dtype=float).ravel() for x in edges]))
    return e[(e >= 0) & (e <= xi_max)]


def green_hankel_oracle(cfg: WaveguideConfig, x, xs, eps_c=None, xi_max=None,
                        order=20, rtol=1e-4, subtract_direct=True):
    """``G(r, x3, xs3) = (1/2pi) int_0^inf J0(xi r) Ghat(xi, x3, xs3) xi dxi``.

    The path is ``xi = t - i eps_c w(t)`` with ``w`` a trapezoidal bump that is
    1 across the real poles and 0 at both ends.  Panels are graded
    geometrically towards each pole.  When both depths share a layer, the
    smooth surrogate ``s exp(-sqrt(xi^2 + q^2)|dz|) / (2 sqrt(xi^2 + q^2))``,
    whose transform is ``s exp(-q R) / (4 pi R)``, is subtracted and added
    back in closed form so the truncated tail beyond ``xi_max`` is small.

    The quadrature is repeated with doubled panels; a relative disagreement
    above ``rtol`` raises :class:`QuadratureError`.
    """
    x = np.asarray(x, dtype=float)
    xs = np.asarray(xs, dtype=float)
    r = float(np.hypot(x[0] - xs[0], x[1] - xs[1]))
    if not r > 0:
        raise DomainError("the oracle needs a positive horizontal distance")
    z, zs = float(x[2]), float(xs[2])
    cfg.layer_of(np.array([z, zs]))
    q1 = max(cfg.q)
    eps = 1e-4 * q1 if eps_c is None else eps_c
    xi_max = 40.0 * q1 if xi_max is None else xi_max
    poles = _real_poles(cfg, q1)
    ramp = 0.02 * q1
    t_end = 1.1 * q1 + ramp

    lz, ls = cfg.layer_of(z), cfg.layer_of(zs)
    same = subtract_direct and lz == ls
    qj = cfg.q[lz]
    strength = cfg.rho[0] / cfg.rho[lz]
    dz = abs(z - zs)

    def run(scale):
        edges = _panel_edges(poles, t_end, xi_max, eps,
                             width_dense=min(0.004, 0.5 / r) / scale,
                             width_far=min(0.02, 0.5 / r) / scale)
        t, w = _gauss_panels(edges, order)
        bump = np.clip(np.minimum(t / ramp, (t_end - t) / ramp), 0.0, 1.0)
        dbump = np.where((t > 0) & (t < ramp), 1.0 / ramp,
                         np.where((t > t_end - ramp) & (t < t_end), -1.0 / ramp, 0.0))
        xi = t - 1j * eps * bump
        jac = 1.0 - 1j * eps * dbump
        ghat = transformed_green(cfg, xi, z, zs)
        if same:
            gam = np.sqrt(xi * xi + qj * qj)
            ghat = ghat - strength * np.exp(-gam * dz) / (2.0 * gam)
        return np.sum(w * jac * bessel_j0(xi * r) * ghat * xi) / (2.0 * np.pi)

    coarse = run(1.0)
    fine = run(2.0)
    if abs(fine - coarse) > rtol * max(abs(fine), 1e-300):
        raise QuadratureError(
            f"Hankel quadrature not converged (|diff|/|G| = {abs(fine - coarse) / abs(fine):.2e}); "
            "a pole may sit too close to the contour")
    result = fine
    if same:
        big_r = math.hypot(r, dz)
        result = result + strength * math.exp(-qj * big_r) / (4.0 * math.pi * big_r)
    return complex(result)
