"""Vertical eigenfunctions, dispersion roots and normalized modes.

Two depth solutions are used throughout.  ``phi1`` starts at the pressure-release
surface as ``sin(tau1 x3)``; ``phi2`` starts at the rigid bottom as
``cos(tau3 (h - x3))``.  Across an interface the density-weighted value
``rho * phi`` and the slope are continuous.

Inside each layer a solution is written in local coordinates from an anchor
state ``(value, slope)`` with the even kernels ``cos(tau s)`` and
``sin(tau s) / tau``.  Both kernels depend on ``tau**2`` only, so nothing here
depends on the square-root branch.  ``phi1`` is anchored at the top of each
layer and ``phi2`` at the bottom, i.e. each is always propagated in the
direction it was shot from; this keeps evanescent layers well conditioned.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .waveguide import DomainError, WaveguideConfig

logger = logging.getLogger(__name__)

# Probe depths per layer used to pick the matching depth of a mode.
_PROBES_PER_LAYER = 64


class RootFindingWarning(UserWarning):
    """The bracket scan may have merged or missed dispersion roots."""


class DegenerateRootError(ArithmeticError):
    """The Wronskian has a vanishing slope at a root (double root)."""


@dataclass(frozen=True)
class VerticalWavenumbers:
    """``tau_i = sqrt((k_i n_i)^2 - xi^2)`` on the branch ``Im tau >= 0``."""

    tau1: np.ndarray
    tau2: np.ndarray
    tau3: np.ndarray

    def __iter__(self):
        return iter((self.tau1, self.tau2, self.tau3))


def _tau_sq(cfg, xi):
    xi = np.asarray(xi, dtype=complex)
    return tuple(q * q - xi * xi for q in cfg.q)


def _branch_sqrt(t2):
    tau = np.sqrt(np.asarray(t2, dtype=complex))
    return np.where(tau.imag < 0, -tau, tau)


def vertical_wavenumbers(cfg: WaveguideConfig, xi) -> VerticalWavenumbers:
    return VerticalWavenumbers(*(_branch_sqrt(t2) for t2 in _tau_sq(cfg, xi)))


def _cos_sinc(t2, s):
    """Even kernels ``cos(tau s)`` and ``sin(tau s) / tau`` of ``tau**2``."""
    tau = np.sqrt(np.asarray(t2, dtype=complex))
    ts = tau * s
    return np.cos(ts), s * np.sinc(ts / np.pi)


def _sq_integral(t2, s):
    """``int_0^s (sin(tau u) / tau)**2 du``, series near ``tau s = 0``."""
    t2 = np.asarray(t2, dtype=complex)
    s = np.asarray(s, dtype=float)
    small = np.abs(t2) * s * s < 1e-4
    _, s2 = _cos_sinc(t2, 2.0 * s)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (s - 0.5 * s2) / (2.0 * t2)
    series = s ** 3 / 3.0 - t2 * s ** 5 / 15.0 + 2.0 * t2 * t2 * s ** 7 / 315.0
    return np.where(small, series, direct)


def _segment_sq_integral(t2, v, d, s):
    """``int_0^s (v cos(tau u) + d sin(tau u)/tau)**2 du``."""
    c, sn = _cos_sinc(t2, s)
    _, s2 = _cos_sinc(t2, 2.0 * s)
    return v * v * (s + 0.5 * s2) / 2.0 + v * d * sn * sn + d * d * _sq_integral(t2, s)


# --------------------------------------------------------------------------
# anchor states

def _phi1_anchors(cfg, xi):
    """States ``(value, slope)`` of ``psi1 = phi1 / tau1`` at the top of each layer.

    Top of layer 0 is the surface; tops of layers 1 and 2 are the deep sides of
    the interfaces.
    """
    t2 = _tau_sq(cfg, xi)
    rho = cfg.rho
    v = np.zeros(np.shape(xi), dtype=complex)
    d = np.ones(np.shape(xi), dtype=complex)
    out = [(v, d)]
    for i, (lo, hi) in enumerate(cfg.bounds[:2]):
        c, s = _cos_sinc(t2[i], hi - lo)
        v, d = c * v + s * d, -t2[i] * s * v + c * d
        v = v * (rho[i] / rho[i + 1])
        out.append((v, d))
    return out


def _phi2_anchors(cfg, xi):
    """States of ``phi2`` at the bottom of each layer (shallow side of interfaces)."""
    t2 = _tau_sq(cfg, xi)
    rho = cfg.rho
    v = np.ones(np.shape(xi), dtype=complex)
    d = np.zeros(np.shape(xi), dtype=complex)
    out = [None, None, (v, d)]
    for i in (2, 1):
        lo, hi = cfg.bounds[i]
        c, s = _cos_sinc(t2[i], hi - lo)
        v, d = c * v - s * d, t2[i] * s * v + c * d
        v = v * (rho[i] / rho[i - 1])
        out[i - 1] = (v, d)
    return out


def _state_at_surface_phi2(cfg, xi):
    v, d = _phi2_anchors(cfg, xi)[0]
    t2 = _tau_sq(cfg, xi)[0]
    c, s = _cos_sinc(t2, cfg.d1)
    return c * v - s * d, t2 * s * v + c * d


def _eval_down(t2, anchor, s):
    v, d = anchor
    c, sn = _cos_sinc(t2, s)
    return c * v + sn * d, -t2 * sn * v + c * d


def _eval_up(t2, anchor, s):
    v, d = anchor
    c, sn = _cos_sinc(t2, s)
    return c * v - sn * d, t2 * sn * v + c * d


def _layers_for(cfg, x3, layer):
    x3 = np.asarray(x3, dtype=float)
    if layer is None:
        return cfg.layer_of(x3)
    if layer not in (0, 1, 2):
        raise DomainError("layer must be 0, 1 or 2")
    if np.any(x3 < 0) or np.any(x3 > cfg.h):
        raise DomainError(f"depth outside [0, {cfg.h}]")
    return np.full(x3.shape, layer)


def _evaluate(cfg, xi, x3, layer, which):
    xi, x3 = np.broadcast_arrays(np.asarray(xi, dtype=complex), np.asarray(x3, dtype=float))
    lay = _layers_for(cfg, x3, layer)
    t2 = _tau_sq(cfg, xi)
    anchors = _phi1_anchors(cfg, xi) if which == 1 else _phi2_anchors(cfg, xi)
    val = np.zeros(xi.shape, dtype=complex)
    der = np.zeros(xi.shape, dtype=complex)
    for i, (lo, hi) in enumerate(cfg.bounds):
        m = lay == i
        if not np.any(m):
            continue
        anchor = (anchors[i][0][m], anchors[i][1][m])
        if which == 1:
            f, df = _eval_down(t2[i][m], anchor, x3[m] - lo)
        else:
            f, df = _eval_up(t2[i][m], anchor, hi - x3[m])
        val[m], der[m] = f, df
    return val, der


def phi1_eval(cfg: WaveguideConfig, xi, x3, derivative=False, layer=None):
    """``phi1(xi, x3)``; with ``derivative=True`` returns ``(phi1, d phi1 / d x3)``.

    ``layer`` forces the closed form of one layer (used for one-sided limits at
    interfaces).
    """
    val, der = _evaluate(cfg, xi, x3, layer, 1)
    tau1 = vertical_wavenumbers(cfg, np.broadcast_to(xi, val.shape)).tau1
    val, der = val * tau1, der * tau1
    if derivative:
        return _squeeze(val), _squeeze(der)
    return _squeeze(val)


def phi2_eval(cfg: WaveguideConfig, xi, x3, derivative=False, layer=None):
    """``phi2(xi, x3)``, equal to ``cos(tau3 (h - x3))`` in the bottom layer."""
    val, der = _evaluate(cfg, xi, x3, layer, 2)
    if derivative:
        return _squeeze(val), _squeeze(der)
    return _squeeze(val)


def _squeeze(a):
    return a[()] if np.ndim(a) == 0 else a


def layer_coefficients(cfg: WaveguideConfig, xi) -> dict:
    """Coefficients ``A1..B4`` in the absolute-coordinate closed forms.

    ``phi1 = A1 cos(tau2 x3) + B1 sin(tau2 x3)`` in the middle layer and
    ``A2 cos(tau3 x3) + B2 sin(tau3 x3)`` in the bottom layer;
    ``phi2 = A3 cos(tau1 x3) + B3 sin(tau1 x3)`` in the top layer and
    ``A4 cos(tau2 x3) + B4 sin(tau2 x3)`` in the middle layer.

    These forms lose accuracy when a layer is evanescent (``tau**2 < 0``); the
    evaluators above do not use them.
    """
    t1, t2, t3 = vertical_wavenumbers(cfg, xi)
    r1, r2, r3 = cfg.rho
    d1, d2, h = cfg.d1, cfg.d2, cfg.h
    sin, cos = np.sin, np.cos
    A1 = r1 / r2 * sin(t1 * d1) * cos(t2 * d1) - t1 / t2 * sin(t2 * d1) * cos(t1 * d1)
    B1 = r1 / r2 * sin(t1 * d1) * sin(t2 * d1) + t1 / t2 * cos(t1 * d1) * cos(t2 * d1)
    u = A1 * cos(t2 * d2) + B1 * sin(t2 * d2)
    w = A1 * sin(t2 * d2) - B1 * cos(t2 * d2)
    A2 = r2 / r3 * u * cos(t3 * d2) + t2 / t3 * w * sin(t3 * d2)
    B2 = r2 / r3 * u * sin(t3 * d2) - t2 / t3 * w * cos(t3 * d2)
    A4 = r3 / r2 * cos(t2 * d2) * cos(t3 * (h - d2)) - t3 / t2 * sin(t2 * d2) * sin(t3 * (h - d2))
    B4 = r3 / r2 * sin(t2 * d2) * cos(t3 * (h - d2)) + t3 / t2 * cos(t2 * d2) * sin(t3 * (h - d2))
    u = A4 * cos(t2 * d1) + B4 * sin(t2 * d1)
    w = A4 * sin(t2 * d1) - B4 * cos(t2 * d1)
    A3 = r2 / r1 * u * cos(t1 * d1) + t2 / t1 * w * sin(t1 * d1)
    B3 = r2 / r1 * u * sin(t1 * d1) - t2 / t1 * w * cos(t1 * d1)
    return dict(A1=A1, B1=B1, A2=A2, B2=B2, A3=A3, B3=B3, A4=A4, B4=B4)


# --------------------------------------------------------------------------
# dispersion relation

def dispersion(cfg: WaveguideConfig, xi):
    """``A3(xi) = phi2(xi, 0)``: even in every ``tau_i`` and real for real ``xi**2``."""
    return _squeeze(_state_at_surface_phi2(cfg, np.asarray(xi, dtype=complex))[0])


def wronskian(cfg: WaveguideConfig, xi):
    """``W(phi1, phi2)(xi) = -A3(xi) tau1(xi)``, evaluated at the surface."""
    xi = np.asarray(xi, dtype=complex)
    return _squeeze(-dispersion(cfg, xi) * vertical_wavenumbers(cfg, xi).tau1)


def _zeros_in_segment(t2, v, d, s):
    """Number of zeros in ``(0, s)`` of ``v cos(tau u) + d sin(tau u)/tau`` (real data)."""
    if t2 > 0:
        tau = math.sqrt(t2)
        theta = math.atan2(d / tau, v)
        # zeros at tau u = theta + pi/2 + k pi
        lo = (-theta - 0.5 * math.pi) / math.pi
        hi = (tau * s - theta - 0.5 * math.pi) / math.pi
        return max(0, math.ceil(hi) - 1 - math.floor(lo))
    c, sn = _cos_sinc(t2, s)
    end = (c * v + sn * d).real
    return int(v * end < 0)


def count_modes_above(cfg: WaveguideConfig, lam: float) -> int:
    """Number of dispersion roots with ``xi**2 > lam`` (Sturm oscillation count).

    Counts the zeros of ``phi2(sqrt(lam), .)`` on ``(0, h)``; ``u = rho phi``
    solves a regular Sturm-Liouville problem with weight ``1 / rho``.
    """
    xi = np.sqrt(complex(lam))
    t2 = [float(np.real(t)) for t in _tau_sq(cfg, xi)]
    anchors = _phi2_anchors(cfg, np.asarray(xi))
    total = 0
    for i, (lo, hi) in enumerate(cfg.bounds):
        v, d = (float(np.real(a)) for a in anchors[i])
        # walk upward from the anchor at the bottom of the layer
        total += _zeros_in_segment(t2[i], v, -d, hi - lo)
    return total


def _bisect(fun, lo, hi, flo, rtol=1e-12, max_iter=200):
    lo, hi, flo = lo.copy(), hi.copy(), flo.copy()
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
        if np.all(hi - lo <= rtol * np.abs(hi)):
            break
    return 0.5 * (lo + hi)


def _scan_axis(fun, upper, n_brackets):
    grid = np.linspace(0.0, upper, n_brackets + 1)[1:]
    grid = np.concatenate([[upper * 1e-9], grid[:-1], [upper * (1 - 1e-12)]])
    vals = fun(grid)
    change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    exact = np.nonzero(vals == 0)[0]
    if exact.size:
        logger.debug("exact zeros on the scan grid at %s", grid[exact])
    if change.size == 0:
        return np.array([]), grid
    roots = _bisect(fun, grid[change], grid[change + 1], vals[change])
    roots = np.union1d(roots, grid[exact])
    return roots, grid


def _newton_polish(fun, x, step):
    f0 = fun(x)
    slope = (fun(x + step) - fun(x - step)) / (2 * step)
    with np.errstate(divide="ignore", invalid="ignore"):
        dx = np.where(slope != 0, f0 / slope, 0.0)
    cand = x - dx
    better = np.abs(fun(cand)) < np.abs(f0)
    return np.where(better & (np.abs(dx) < step * 1e3), cand, x)


# --------------------------------------------------------------------------
# modes

@dataclass(frozen=True)
class Mode:
    """One normal mode.

    ``phi1_coeffs`` and ``phi2_coeffs`` hold ``(A1, B1, A2, B2)`` and
    ``(A3, B3, A4, B4)``; ``W_n = dW/dxi / (c_n ||phi1||**2)`` at ``xi_n``.
    """

    xi_n: complex
    phi1_coeffs: tuple
    phi2_coeffs: tuple
    norm: float
    c_n: complex
    W_n: complex
    dW: complex
    match_depth: float


def _mode_table(cfg, xi, step_scale=1e-6):
    """Vectorized per-mode data for an array of roots."""
    xi = np.asarray(xi, dtype=complex)
    t2 = _tau_sq(cfg, xi)
    tau1 = vertical_wavenumbers(cfg, xi).tau1
    a1 = _phi1_anchors(cfg, xi)
    a2 = _phi2_anchors(cfg, xi)

    # probe grid: pick the depth where |phi1| is largest
    best_val = np.full(xi.shape, -1.0)
    z_star = np.zeros(xi.shape)
    for i, (lo, hi) in enumerate(cfg.bounds):
        zs = np.linspace(lo, hi, _PROBES_PER_LAYER + 1)[1:] if i else \
            np.linspace(lo, hi, _PROBES_PER_LAYER + 1)[1:]
        f, _ = _eval_down(t2[i][:, None], (a1[i][0][:, None], a1[i][1][:, None]), zs[None, :] - lo)
        mag = np.abs(f)
        j = np.argmax(mag, axis=1)
        m = mag[np.arange(xi.size), j]
        upd = m > best_val
        best_val = np.where(upd, m, best_val)
        z_star = np.where(upd, zs[j], z_star)
    if np.any(best_val <= 0):
        raise DegenerateRootError("phi1 vanishes on every probe depth")

    lay = cfg.layer_of(np.minimum(z_star, cfg.h))
    p1 = np.empty(xi.shape, dtype=complex)
    p2 = np.empty(xi.shape, dtype=complex)
    for i, (lo, hi) in enumerate(cfg.bounds):
        m = lay == i
        if np.any(m):
            p1[m] = _eval_down(t2[i][m], (a1[i][0][m], a1[i][1][m]), z_star[m] - lo)[0]
            p2[m] = _eval_up(t2[i][m], (a2[i][0][m], a2[i][1][m]), hi - z_star[m])[0]
    # c_n relates phi2 to phi1 = tau1 * psi1
    c_n = p2 / (tau1 * p1)

    # ||phi1||^2 from exact segment integrals of the matched profile
    norm2 = np.zeros(xi.shape, dtype=complex)
    for i, (lo, hi) in enumerate(cfg.bounds):
        above = np.clip(z_star, lo, hi) - lo   # length handled by phi1 from the top
        below = (hi - lo) - above              # length handled by phi2 from the bottom
        norm2 += tau1 ** 2 * _segment_sq_integral(t2[i], a1[i][0], a1[i][1], above)
        norm2 += _segment_sq_integral(t2[i], a2[i][0], -a2[i][1], below) / c_n ** 2
    norm = np.sqrt(norm2)

    # dW/dxi = -tau1 * 2 xi * dA3/d(xi^2) at a root (A3 = 0 there).  A3 is entire in
    # xi^2, so the central difference is taken in xi^2; a step in xi would feel the
    # branch point of tau1 for modes near cut-off.
    lam = xi * xi
    d = step_scale * cfg.q[0] * 2 * np.maximum(np.abs(xi), cfg.q[0])
    dA = (dispersion(cfg, np.sqrt(lam + d)) - dispersion(cfg, np.sqrt(lam - d))) / (2 * d)
    dW = -tau1 * 2 * xi * dA
    far = dispersion(cfg, np.sqrt(lam + 10 * d))
    if np.any(np.abs(dA) <= 1e-10 * np.maximum(np.abs(far) / (10 * d), 1e-300)):
        raise DegenerateRootError("vanishing Wronskian slope: double root")
    W_n = dW / (c_n * norm2)
    return dict(xi=xi, z_star=z_star, c_n=c_n, norm=norm, norm2=norm2, dW=dW, W_n=W_n,
                tau1=tau1, a1=a1, a2=a2, t2=t2)


def mode_data(cfg: WaveguideConfig, xi_n, root_tol=1e-8) -> Mode:
    """Normalization, proportionality constant and residue weight of one root."""
    xi_n = complex(xi_n)
    rel = _root_residual(cfg, np.array([xi_n]))[0]
    if rel > root_tol:
        raise ValueError(f"{xi_n} is not a dispersion root (relative residual {rel:.2e})")
    t = _mode_table(cfg, np.array([xi_n]))
    c = layer_coefficients(cfg, xi_n)
    return Mode(
        xi_n=xi_n,
        phi1_coeffs=tuple(complex(c[k]) for k in ("A1", "B1", "A2", "B2")),
        phi2_coeffs=tuple(complex(c[k]) for k in ("A3", "B3", "A4", "B4")),
        norm=complex(t["norm"][0]).real,
        c_n=complex(t["c_n"][0]),
        W_n=complex(t["W_n"][0]),
        dW=complex(t["dW"][0]),
        match_depth=float(t["z_star"][0]),
    )


def _root_residual(cfg, xi):
    """``|W(xi)| / (|xi| |dW/dxi|)``: a relative root error estimate."""
    h = 1e-6 * cfg.q[0]
    direction = np.where(np.abs(xi.imag) > np.abs(xi.real), 1j, 1.0)
    dW = (wronskian(cfg, xi + h * direction) - wronskian(cfg, xi - h * direction)) / (2 * h)
    return np.abs(wronskian(cfg, xi)) / (np.abs(xi) * np.abs(dW))


@dataclass
class ModalBasis:
    """Dispersion roots and everything needed to evaluate normalized modes.

    Modes are ordered by decreasing real ``xi_n`` (propagating) followed by
    increasing ``|xi_n|`` on the positive imaginary axis (evanescent).
    """

    cfg: WaveguideConfig
    xi: np.ndarray
    z_star: np.ndarray
    c_n: np.ndarray
    norm: np.ndarray
    W_n: np.ndarray
    dW: np.ndarray
    r_min: float
    tol_modes: float
    eta_max: float
    config_hash: str = ""
    _a1: list = field(default=None, repr=False)
    _a2: list = field(default=None, repr=False)
    _t2: tuple = field(default=None, repr=False)
    _tau1: np.ndarray = field(default=None, repr=False)

    def __len__(self):
        return int(self.xi.size)

    @property
    def n_propagating(self) -> int:
        return int(np.count_nonzero(self.xi.imag == 0))

    @property
    def n_evanescent(self) -> int:
        return len(self) - self.n_propagating

    @property
    def weights(self) -> np.ndarray:
        """Per-mode factor ``xi_n / W_n`` of the residue series."""
        return self.xi / self.W_n

    def mode(self, n: int) -> Mode:
        """Mode ``n`` (zero-based) as a :class:`Mode` record."""
        c = layer_coefficients(self.cfg, self.xi[n])
        return Mode(
            xi_n=complex(self.xi[n]),
            phi1_coeffs=tuple(complex(c[k]) for k in ("A1", "B1", "A2", "B2")),
            phi2_coeffs=tuple(complex(c[k]) for k in ("A3", "B3", "A4", "B4")),
            norm=float(np.real(self.norm[n])),
            c_n=complex(self.c_n[n]),
            W_n=complex(self.W_n[n]),
            dW=complex(self.dW[n]),
            match_depth=float(self.z_star[n]),
        )

    def n_needed(self, r: float) -> int:
        """Number of leading modes whose evanescent decay at ``r`` exceeds the tolerance."""
        if r <= 0:
            return len(self)
        cut = math.log(1.0 / self.tol_modes) / r if self.tol_modes < 1 else 0.0
        return self.n_propagating + int(np.searchsorted(self.xi.imag[self.n_propagating:], cut, side="right"))

    def profiles(self, x3, n_modes=None) -> np.ndarray:
        """Normalized modes ``Phi_n(x3)`` as an array of shape ``(n_modes,) + shape(x3)``.

        Above the matching depth the profile is ``phi1 / ||phi1||``; below it,
        the proportional ``phi2 / (c_n ||phi1||)``.
        """
        x3 = np.asarray(x3, dtype=float)
        shape = x3.shape
        z = x3.ravel()
        lay = self.cfg.layer_of(z) if z.size else np.zeros(0, int)
        k = len(self) if n_modes is None else int(n_modes)
        out = np.zeros((k, z.size), dtype=complex)
        if k == 0 or z.size == 0:
            return out.reshape((k,) + shape)
        zst = self.z_star[:k, None]
        s1 = (self._tau1[:k] / self.norm[:k])[:, None]
        s2 = (1.0 / (self.c_n[:k] * self.norm[:k]))[:, None]
        for i, (lo, hi) in enumerate(self.cfg.bounds):
            cols = np.nonzero(lay == i)[0]
            if cols.size == 0:
                continue
            zz = z[cols][None, :]
            t2 = self._t2[i][:k, None]
            f1, _ = _eval_down(t2, (self._a1[i][0][:k, None], self._a1[i][1][:k, None]), zz - lo)
            f2, _ = _eval_up(t2, (self._a2[i][0][:k, None], self._a2[i][1][:k, None]), hi - zz)
            out[:, cols] = np.where(zz <= zst, f1 * s1, f2 * s2)
        return out.reshape((k,) + shape)

    def table(self) -> list[dict]:
        return [dict(n=i + 1, xi_re=float(x.real), xi_im=float(x.imag),
                     W_n=complex(w), norm=float(np.real(nm)))
                for i, (x, w, nm) in enumerate(zip(self.xi, self.W_n, self.norm))]


def find_modes(cfg: WaveguideConfig, r_min: float, tol_modes: float = 1e-8,
               n_brackets: int = 4000) -> ModalBasis:
    """All real roots in ``(0, k1 n1)`` and imaginary roots up to ``eta_max``.

    ``eta_max = ln(1 / tol_modes) / r_min`` bounds the evanescent tail
    ``exp(-eta r)`` by ``tol_modes`` at every distance ``r >= r_min``.
    The real and imaginary axes are scanned for sign changes of the even
    dispersion function, refined by bisection and one Newton step, and the
    root counts are checked against a Sturm oscillation count.
    """
    if not r_min > 0:
        raise DomainError("r_min must be positive")
    if not 0 < tol_modes <= 1:
        raise DomainError("tol_modes must lie in (0, 1]")
    qtop = max(cfg.q)
    eta_max = math.log(1.0 / tol_modes) / r_min

    def real_fun(x):
        return np.real(dispersion(cfg, x))

    def imag_fun(y):
        return np.real(dispersion(cfg, 1j * y))

    expected_real = count_modes_above(cfg, 0.0)
    expected_total = count_modes_above(cfg, -eta_max ** 2) if eta_max > 0 else expected_real

    n_real = max(n_brackets, 16 * expected_real)
    real_roots = np.array([])
    for _ in range(6):
        real_roots, _ = _scan_axis(real_fun, qtop, n_real)
        if real_roots.size >= expected_real:
            break
        n_real *= 4
    imag_roots = np.array([])
    if eta_max > 0:
        n_imag = max(n_brackets, 4 * (expected_total - expected_real))
        for _ in range(6):
            imag_roots, _ = _scan_axis(imag_fun, eta_max, n_imag)
            if imag_roots.size >= expected_total - expected_real:
                break
            n_imag *= 4
    if real_roots.size != expected_real or imag_roots.size != expected_total - expected_real:
        warnings.warn(
            f"root scan found {real_roots.size} real / {imag_roots.size} imaginary roots, "
            f"oscillation count predicts {expected_real} / {expected_total - expected_real}",
            RootFindingWarning, stacklevel=2)

    real_roots = _newton_polish(real_fun, real_roots, 1e-7 * qtop)
    imag_roots = _newton_polish(imag_fun, imag_roots, 1e-7 * qtop)
    xi = np.concatenate([np.sort(real_roots)[::-1].astype(complex), 1j * np.sort(imag_roots)])

    if xi.size > 1:
        gaps = np.abs(np.diff(xi))
        if np.any(gaps < 10 * 1e-12 * np.abs(xi[1:])):
            warnings.warn("dispersion roots closer than the root tolerance", RootFindingWarning,
                          stacklevel=2)
    if xi.size == 0:
        return ModalBasis(cfg, xi, np.zeros(0), xi, np.zeros(0), xi, xi, r_min, tol_modes,
                          eta_max, cfg.digest(), [(xi, xi)] * 3, [(xi, xi)] * 3,
                          (xi, xi, xi), xi)
    t = _mode_table(cfg, xi)
    logger.info("found %d propagating and %d evanescent modes", real_roots.size, imag_roots.size)
    return ModalBasis(cfg=cfg, xi=xi, z_star=t["z_star"], c_n=t["c_n"], norm=t["norm"],
                      W_n=t["W_n"], dW=t["dW"], r_min=r_min, tol_modes=tol_modes,
                      eta_max=eta_max, config_hash=cfg.digest(),
                      _a1=t["a1"], _a2=t["a2"], _t2=t["t2"], _tau1=t["tau1"])
