"""Walk through the modal basis and the Green's function of the three-layer guide.

Run with ``python3 demos/modes_and_green.py``.
"""

import numpy as np

from stratwave import REFERENCE_WAVEGUIDE, find_modes, green_hankel_oracle, green_series

cfg = REFERENCE_WAVEGUIDE
print(f"layer wavenumbers k n = {np.round(cfg.q, 5)}")

# Propagating roots lie in (0, k1 n1); evanescent ones on the imaginary axis,
# kept while exp(-eta r_min) stays above the tolerance.
basis = find_modes(cfg, r_min=1.0, tol_modes=1e-10)
print(f"{len(basis)} modes: {basis.n_propagating} propagating, {basis.n_evanescent} evanescent")
for n in range(basis.n_propagating):
    print(f"  xi_{n + 1} = {basis.xi[n].real:.6f}   W_n = {basis.W_n[n]:.4e}")

# Depth profiles: the lowest modes concentrate in the slow top layer.
z = np.linspace(0, cfg.h, 7)
prof = basis.profiles(z, 3).real
print("\n x3     Phi_1      Phi_2      Phi_3")
for zz, col in zip(z, prof.T):
    print(f"{zz:5.1f} " + " ".join(f"{v:10.5f}" for v in col))

# The residue series against a direct Hankel-transform quadrature.
xs = np.array([0.0, 0.0, 50.0])
print("\n  r     x3    series                    oracle                    rel. diff")
for r, z3 in ((15.0, 20.0), (40.0, 80.0), (90.0, 50.0)):
    x = np.array([r, 0.0, z3])
    gs, go = green_series(basis, x, xs), green_hankel_oracle(cfg, x, xs)
    print(f"{r:5.1f} {z3:5.1f}  {gs:.6e}  {go:.6e}  {abs(gs - go) / abs(go):.1e}")
