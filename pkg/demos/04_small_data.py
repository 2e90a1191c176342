"""
Small data: nonlinear against linear
====================================

Scale one smooth profile by ``eps`` and compare the nonlinear and the
linear evolutions. The gap should shrink like ``eps^2``.

Run with ``python3 demos/04_small_data.py``.
"""

import numpy as np

from boussinesq5.cli import initial_condition
from boussinesq5.discretization import assemble_operator, make_grid
from boussinesq5.model import PhysicalParameters, derive_coefficients
from boussinesq5.timestepper import RunConfig, run

c = derive_coefficients(PhysicalParameters.canonical())
g = make_grid(1.0, 64)
op = assemble_operator(c, g, "dissipative")
base = initial_condition("gaussian-bump", None, g)

eps = np.array([1e-1, 3e-2, 1e-2, 3e-3, 1e-3])
gaps = []
for e in eps:
    s0 = base.scaled(e)
    lin = run(op, c, s0, RunConfig(1e-3, 1.0, "linear", stride=1))
    nl = run(op, c, s0, RunConfig(1e-3, 1.0, "nonlinear", stride=1))
    gap = max(np.max(np.abs(a.stacked() - b.stacked())) for a, b in zip(lin.states, nl.states))
    gaps.append(gap)
    print(f"eps = {e:.0e}: max gap {gap:.4e}, gap/eps^2 = {gap / e ** 2:.4f}")
print(f"fitted exponent: {np.polyfit(np.log(eps), np.log(gaps), 1)[0]:.3f}")

# Large data is another story; the run stops once the sup norm passes
# the blow-up threshold and reports when that happened.
big = run(op, c, base.scaled(3.0), RunConfig(1e-3, 1.0, "nonlinear", blowup_threshold=10.0))
print(f"amplitude 3: blow-up threshold reached at t = {big.blowup_time}")
