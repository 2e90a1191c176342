import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boussinesq5.diagnostics import energy
from boussinesq5.discretization import (MIN_CELLS, BcFamily, DomainError, apply_operator,
                                        assemble_operator, assemble_scalar_operator,
                                        derivative_stencils, dump_operator, extend,
                                        fd_weights, load_operator, make_grid, quadratic_form,
                                        trace_second_derivatives)
from boussinesq5.model import ModelCoefficients


def _exact_data(x):
    """Derivatives of eta = sin^4(pi x) and u = sin^4(pi x) cos(pi x).

    Both fields vanish with three derivatives at x = 0 and x = 1, so the
    data satisfy every boundary family.
    """
    p = np.pi

    # sin^4 = (3 - 4 cos 2 p x + cos 4 p x) / 8
    def d_eta(k):
        const = 3.0 / 8.0 if k == 0 else 0.0
        return const + (-4 * (2 * p) ** k * np.cos(2 * p * x + k * p / 2)
                        + (4 * p) ** k * np.cos(4 * p * x + k * p / 2)) / 8

    # sin^4 cos = (2 cos p x - 3 cos 3 p x + cos 5 p x) / 16
    def d_u(k):
        return (2 * p ** k * np.cos(p * x + k * p / 2)
                - 3 * (3 * p) ** k * np.cos(3 * p * x + k * p / 2)
                + (5 * p) ** k * np.cos(5 * p * x + k * p / 2)) / 16

    assert np.allclose(d_eta(0), np.sin(p * x) ** 4)
    return d_eta, d_u


def test_grid_examples():
    assert make_grid(1.0, 100).h == pytest.approx(0.01)
    assert make_grid(math.pi, 128).h == pytest.approx(math.pi / 128)
    with pytest.raises(DomainError):
        make_grid(1.0, 8)
    with pytest.raises(DomainError):
        make_grid(-1.0, 64)
    g = make_grid(2.0, 64)
    assert g.x[0] == 0.0 and g.x[-1] == 2.0 and g.n == 65
    assert g.weights.sum() == pytest.approx(2.0)
    assert MIN_CELLS == 32


def test_stencil_examples():
    h = 0.1
    assert np.allclose(derivative_stencils(1, h), np.array([-1, 0, 1]) / (2 * h))
    x = 0.3 + h * np.arange(-3, 4)
    assert derivative_stencils(5, h) @ x ** 5 == pytest.approx(120.0, rel=1e-9)
    assert abs(derivative_stencils(3, h) @ (x[1:-1] ** 2)) < 1e-9
    with pytest.raises(ValueError):
        derivative_stencils(4, h)


@pytest.mark.parametrize("order", [1, 2, 3, 5])
def test_stencil_symmetry_and_moments(order):
    w = derivative_stencils(order, 1.0)
    assert np.allclose(w, (-1) ** order * w[::-1])
    m = len(w) // 2
    k = np.arange(-m, m + 1)
    assert np.sum(w * k ** order) == pytest.approx(math.factorial(order))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 3), st.floats(-2.0, 2.0))
def test_fd_weights_exact_on_polynomials(m, x0):
    nodes = np.array([-2.0, -1.0, 0.0, 1.0, 2.0, 3.0])
    w = fd_weights(nodes, x0, m)
    for p in range(6):
        exact = 0.0 if p < m else math.factorial(p) / math.factorial(p - m) * x0 ** (p - m)
        assert w @ nodes ** p == pytest.approx(exact, abs=1e-8 * (1 + abs(exact)))


def test_zero_state_maps_to_zero(ops64):
    for op in ops64.values():
        assert np.all(apply_operator(op, np.zeros(op.size)) == 0.0)


@pytest.mark.parametrize("bc", [b.value for b in BcFamily])
def test_bandwidth_and_boundary_rows(ops64, bc):
    op = ops64[bc]
    assert op.bandwidth() <= 3
    n = op.grid.n
    dense = op.dense()
    for row in (0, n - 1, n, 2 * n - 1):
        assert not dense[row].any()


def _consistency_errors(bc, Ns):
    c = ModelCoefficients(a=-0.5, b=0.2)
    near, far = [], []
    for N in Ns:
        g = make_grid(1.0, N)
        op = assemble_operator(c, g, bc)
        d_eta, d_u = _exact_data(g.x)
        v = np.concatenate([d_eta(0), d_u(0)])
        Av = apply_operator(op, v)
        n = g.n
        exact = np.concatenate([-d_u(1) + c.a * d_u(3) - c.b * d_u(5),
                                -d_eta(1) + c.a * d_eta(3) - c.b * d_eta(5)])
        err = np.abs(Av - exact)
        rows_far = np.r_[3:n - 3, n + 3:2 * n - 3]
        rows_near = np.r_[1:3, n - 3:n - 1, n + 1:n + 3, 2 * n - 3:2 * n - 1]
        far.append(err[rows_far].max())
        near.append(err[rows_near].max())
    return np.array(near), np.array(far)


@pytest.mark.parametrize("bc", [b.value for b in BcFamily])
def test_interior_consistency_order(bc):
    near, far = _consistency_errors(bc, (128, 256, 512))
    orders_far = np.log2(far[:-1] / far[1:])
    orders_near = np.log2(near[:-1] / near[1:])
    assert orders_far.min() >= 1.8
    # the two closure rows next to each wall are first order
    assert orders_near.min() >= 0.85


def test_trace_examples():
    L = 2.0
    g = make_grid(L, 128)
    f = g.x ** 2 * (L - g.x) ** 2
    z = np.zeros(g.n)
    e0, eL, u0, uL = trace_second_derivatives(np.concatenate([f, z]), g)
    assert e0 == pytest.approx(2 * L ** 2, rel=1e-10)
    assert eL == pytest.approx(2 * L ** 2, rel=1e-10)
    assert u0 == 0.0 and uL == 0.0
    assert trace_second_derivatives(np.zeros(2 * g.n), g) == (0.0, 0.0, 0.0, 0.0)


def test_closure_traces_satisfy_boundary_family(canon, rng):
    g = make_grid(1.0, 64)
    v = rng.standard_normal(2 * g.n)
    v[[0, g.n - 1, g.n, 2 * g.n - 1]] = 0.0
    c = canon.with_gains(0.7, 1.3)
    e0, eL, u0, uL = trace_second_derivatives(v, g, assemble_operator(c, g, "dissipative"))
    assert abs(u0 + 0.7 * e0) < 1e-8 * (abs(u0) + 1)
    assert abs(uL - 1.3 * eL) < 1e-8 * (abs(uL) + 1)
    e0, eL, u0, uL = trace_second_derivatives(v, g, assemble_operator(c, g, "conservative"))
    assert abs(e0) < 1e-8 * np.abs(v).max() and abs(uL) < 1e-8 * np.abs(v).max()
    tr = trace_second_derivatives(v, g, assemble_operator(c, g, "clamped"))
    assert max(map(abs, tr)) < 1e-8 * np.abs(v).max()


def test_closure_extension_vanishing_first_derivative(ops64, rng):
    op = ops64["dissipative"]
    g = op.grid
    v = rng.standard_normal(2 * g.n)
    v[[0, g.n - 1, g.n, 2 * g.n - 1]] = 0.0
    w1 = fd_weights(np.arange(-2, 4) * g.h, 0.0, 1)
    for f in extend(op, v):
        assert abs(w1 @ f[:6]) < 1e-8 * np.abs(f).max() / g.h
        assert abs(w1 @ f[::-1][:6]) < 1e-8 * np.abs(f).max() / g.h


def test_clamped_scalar_equivalence(canon):
    g = make_grid(1.0, 64)
    op = assemble_operator(canon, g, "clamped")
    n = g.n
    A = op.matrix.tocsr()
    P = assemble_scalar_operator(canon, g)
    assert abs(A[:n, n:] - P).max() == 0.0
    assert abs(A[n:, :n] - P).max() == 0.0
    assert A[:n, :n].nnz == 0 or abs(A[:n, :n]).max() == 0.0


@pytest.mark.parametrize("bc", ["dissipative", "conservative"])
def test_quadratic_form_defect_shrinks(bc):
    c = ModelCoefficients(a=-0.5, b=0.2)
    defects = []
    for N in (32, 64, 128, 256):
        g = make_grid(1.0, N)
        op = assemble_operator(c, g, bc)
        d_eta, d_u = _exact_data(g.x)
        v = np.concatenate([d_eta(0), d_u(0)])
        e0, eL, _, _ = trace_second_derivatives(v, g, op)
        boundary = 0.0
        if bc == "dissipative":
            boundary = -c.b * (c.alpha1 * e0 ** 2 + c.alpha2 * eL ** 2)
        defects.append(abs(quadratic_form(op, v) - boundary) / (2 * energy(v, g)))
    defects = np.array(defects)
    assert np.all(defects[1:] < 0.5 * defects[:-1])


def test_dump_roundtrip(tmp_path, ops64):
    op = ops64["dissipative"]
    path = tmp_path / "A.mtx"
    dump_operator(op, path)
    B = load_operator(path)
    assert B.shape == op.matrix.shape
    assert abs(B - op.matrix).max() == 0.0


def test_bc_family_parse():
    assert BcFamily.parse("Conservative") is BcFamily.CONSERVATIVE
    with pytest.raises(ValueError):
        BcFamily.parse("periodic")


def test_state_length_mismatch(ops64):
    with pytest.raises(DomainError):
        apply_operator(ops64["clamped"], np.zeros(7))
