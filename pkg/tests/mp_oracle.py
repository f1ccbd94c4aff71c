"""High-precision evaluation of the printed closed forms (independent of the package)."""

import mpmath as mp


def taus(cfg, xi):
    return [mp.sqrt(mp.mpf(q) ** 2 - xi ** 2) for q in cfg.q]


def coefficients(cfg, xi):
    r1, r2, r3 = (mp.mpf(r) for r in cfg.rho)
    d1, d2, h = mp.mpf(cfg.d1), mp.mpf(cfg.d2), mp.mpf(cfg.h)
    t1, t2, t3 = taus(cfg, xi)
    A1 = r1 / r2 * mp.sin(t1 * d1) * mp.cos(t2 * d1) - t1 / t2 * mp.sin(t2 * d1) * mp.cos(t1 * d1)
    B1 = r1 / r2 * mp.sin(t1 * d1) * mp.sin(t2 * d1) + t1 / t2 * mp.cos(t1 * d1) * mp.cos(t2 * d1)
    u = A1 * mp.cos(t2 * d2) + B1 * mp.sin(t2 * d2)
    v = A1 * mp.sin(t2 * d2) - B1 * mp.cos(t2 * d2)
    A2 = r2 / r3 * u * mp.cos(t3 * d2) + t2 / t3 * v * mp.sin(t3 * d2)
    B2 = r2 / r3 * u * mp.sin(t3 * d2) - t2 / t3 * v * mp.cos(t3 * d2)
    A4 = r3 / r2 * mp.cos(t2 * d2) * mp.cos(t3 * (h - d2)) - t3 / t2 * mp.sin(t2 * d2) * mp.sin(t3 * (h - d2))
    B4 = r3 / r2 * mp.sin(t2 * d2) * mp.cos(t3 * (h - d2)) + t3 / t2 * mp.cos(t2 * d2) * mp.sin(t3 * (h - d2))
    u = A4 * mp.cos(t2 * d1) + B4 * mp.sin(t2 * d1)
    v = A4 * mp.sin(t2 * d1) - B4 * mp.cos(t2 * d1)
    A3 = r2 / r1 * u * mp.cos(t1 * d1) + t2 / t1 * v * mp.sin(t1 * d1)
    B3 = r2 / r1 * u * mp.sin(t1 * d1) - t2 / t1 * v * mp.cos(t1 * d1)
    return dict(A1=A1, B1=B1, A2=A2, B2=B2, A3=A3, B3=B3, A4=A4, B4=B4, tau=(t1, t2, t3))


def phi(cfg, xi, x3, which):
    c = coefficients(cfg, xi)
    t1, t2, t3 = c["tau"]
    x = mp.mpf(x3)
    if which == 1:
        if x < cfg.d1:
            return mp.sin(t1 * x)
        if x < cfg.d2:
            return c["A1"] * mp.cos(t2 * x) + c["B1"] * mp.sin(t2 * x)
        return c["A2"] * mp.cos(t3 * x) + c["B2"] * mp.sin(t3 * x)
    if x < cfg.d1:
        return c["A3"] * mp.cos(t1 * x) + c["B3"] * mp.sin(t1 * x)
    if x < cfg.d2:
        return c["A4"] * mp.cos(t2 * x) + c["B4"] * mp.sin(t2 * x)
    return mp.cos(t3 * (mp.mpf(cfg.h) - x))


def real_root(cfg, guess):
    """Refine a real dispersion root of A3 (even in tau, so real on the real axis)."""
    f = lambda x: mp.re(coefficients(cfg, x)["A3"])  # noqa: E731
    return mp.findroot(f, mp.mpf(guess))
