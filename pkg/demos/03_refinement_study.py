"""
Refinement study
================

Residuals of the two energy identities under grid refinement with
``dt`` proportional to ``h``, and stability of the smoothing ratios.

Run with ``python3 demos/03_refinement_study.py``.
"""

import numpy as np

from boussinesq5 import diagnostics as dg
from boussinesq5.cli import initial_condition
from boussinesq5.discretization import assemble_operator, make_grid
from boussinesq5.model import PhysicalParameters, derive_coefficients
from boussinesq5.timestepper import RunConfig, run

c = derive_coefficients(PhysicalParameters.canonical())
rows = []
for N in (64, 128, 256):
    g = make_grid(1.0, N)
    op = assemble_operator(c, g, "dissipative")
    traj = run(op, c, initial_condition("gaussian-bump", None, g),
               RunConfig(1e-3 * 64 / N, 1.0, "linear", stride=10 ** 6))
    rows.append((N, dg.integrated_dissipation_residual(traj),
                 dg.weighted_identity_residual(traj)))

print(" N    dissipation residual   weighted residual")
for N, r1, r2 in rows:
    print(f"{N:4d}  {r1:20.4e}  {r2:18.4e}")
r = np.array([row[1:] for row in rows])
print("observed orders:", np.round(np.log2(r[:-1] / r[1:]), 2).tolist())

print("\nKato and trace ratios (dt = 1e-4, T = 0.5):")
lin = c.linearized()
for N in (64, 128, 256):
    g = make_grid(1.0, N)
    s0 = initial_condition("gaussian-bump", None, g)
    rc = RunConfig(1e-4, 0.5, "linear", stride=10 ** 6)
    k = dg.kato_ratio(run(assemble_operator(lin, g, "dissipative"), lin, s0, rc))
    t = dg.trace_ratio(run(assemble_operator(lin, g, "conservative"), lin, s0, rc))
    print(f"  N = {N:3d}: kato {k:.4f}, trace {t:.4f}")
