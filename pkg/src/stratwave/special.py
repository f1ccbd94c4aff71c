"""Bessel-family helpers used by the modal sums."""

import numpy as np
from scipy import special


def hankel_h1_0(z):
    """First-kind Hankel function of order zero for ``Re z >= 0``.

    Real arguments go through ``J0 + i Y0``; arguments on the positive imaginary
    axis ``z = i y`` use ``H0(iy) = 2 / (i pi) K0(y)``, which stays accurate
    (and underflows gracefully) for large ``y``.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ZeroDivisionError("H0^(1) is singular at z = 0")
    if np.any(z.real < 0):
        raise ValueError("hankel_h1_0 expects Re z >= 0")
    out = np.empty_like(z)
    real = z.imag == 0
    imag = (z.real == 0) & ~real
    other = ~(real | imag)
    x = z.real[real]
    out[real] = special.j0(x) + 1j * special.y0(x)
    out[imag] = (2.0 / (1j * np.pi)) * special.k0(z.imag[imag])
    if np.any(other):
        out[other] = special.hankel1(0, z[other])
    return out[()] if out.ndim == 0 else out


def bessel_j0(z):
    """``J0`` for real or complex arguments."""
    z = np.asarray(z)
    if np.iscomplexobj(z):
        return special.jv(0, z)
    return special.j0(z)
