"""
Spectrum of the discrete operator
=================================

Eigenvalues of the assembled operator for the dissipative and the
conservative families, and how the slowest decay rate depends on ``L``.

Run with ``python3 demos/05_spectrum.py``.
"""

import numpy as np

from boussinesq5.discretization import assemble_operator, make_grid
from boussinesq5.model import PhysicalParameters, derive_coefficients
from boussinesq5.spectral import discrete_spectrum, relative_real_defect, spectral_abscissa

p = PhysicalParameters.canonical()
c = derive_coefficients(p)

for N in (64, 128, 256):
    g = make_grid(1.0, N)
    dis = discrete_spectrum(assemble_operator(c, g, "dissipative"))
    cons = discrete_spectrum(assemble_operator(c, g, "conservative"))
    print(f"N = {N:3d}: dissipative abscissa {spectral_abscissa(dis):8.4f}, "
          f"max |lambda| {np.abs(dis).max():.2e}; conservative max|Re|/max|lambda| "
          f"{relative_real_defect(cons):.1e}")

print("\nslowest decay rate against the domain length (N = 128):")
for L in (0.5, 1.0, 2.0, np.pi, 5.0, 10.0):
    cl = derive_coefficients(p, L=L)
    ev = discrete_spectrum(assemble_operator(cl, make_grid(L, 128), "dissipative"))
    print(f"  L = {L:6.3f}: abscissa {spectral_abscissa(ev):9.4f}")
