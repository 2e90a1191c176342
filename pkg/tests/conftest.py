import numpy as np
import pytest

from boussinesq5.discretization import assemble_operator, make_grid
from boussinesq5.model import ModelCoefficients, PhysicalParameters, derive_coefficients


@pytest.fixture(scope="session")
def canon():
    """Coefficients derived at alpha = beta = 1, L = 1, unit gains."""
    return derive_coefficients(PhysicalParameters.canonical(1.0, 1.0))


@pytest.fixture(scope="session")
def canon_linear(canon):
    return canon.linearized()


@pytest.fixture(scope="session")
def toy():
    """O(1) dispersion, which makes stencil errors visible on coarse grids."""
    return ModelCoefficients(a=-0.5, b=0.2, alpha1=1.0, alpha2=1.0, L=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def bump_state(g, amp=1.0, width=0.1):
    """Smooth data flat to second order at both walls."""
    from boussinesq5.timestepper import State
    x, L = g.x, g.L
    s = x / L
    w = (4 * s * (1 - s)) ** 3
    eta = amp * np.exp(-((x - 0.5 * L) / (width * L)) ** 2) * w
    u = 0.5 * amp * np.exp(-((x - 0.4 * L) / (width * L)) ** 2) * w
    eta[[0, -1]] = 0.0
    u[[0, -1]] = 0.0
    return State(eta, u)


@pytest.fixture(scope="session")
def ops64(canon):
    g = make_grid(1.0, 64)
    return {bc: assemble_operator(canon, g, bc)
            for bc in ("dissipative", "conservative", "clamped")}
