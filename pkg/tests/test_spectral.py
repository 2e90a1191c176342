import cmath

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from boussinesq5.discretization import assemble_operator, make_grid
from boussinesq5.spectral import (AlphaVector, DegenerateConfiguration, PreconditionError,
                                  QPolynomial, classify_claim, cross_ratio, discriminant,
                                  discrete_spectrum, imaginary_part_set, mismatch_scan,
                                  mobius_determinant, mobius_feasibility, mobius_map, n_alpha,
                                  n_alpha_zero_structure, n_alpha_zeros, q_roots,
                                  r0_closed_form, relative_real_defect, spectral_abscissa)

finite = dict(allow_nan=False, allow_infinity=False)


def test_q_roots_example():
    rs = q_roots(QPolynomial(1.0, 1.0, 0.0))
    assert np.allclose(rs.real_roots, [0.0], atol=1e-14)
    expected = [0.5 + 0.8660254037844386j, -0.5 + 0.8660254037844386j]
    tops = sorted((p[0] for p in rs.conjugate_pairs), key=lambda z: z.real)
    assert np.allclose(sorted(expected, key=lambda z: z.real), tops, atol=1e-12)
    assert classify_claim(QPolynomial(1.0, 1.0, 0.0))


def test_q_precondition():
    with pytest.raises(PreconditionError):
        QPolynomial(3.0, 1.0, 0.0)
    with pytest.raises(PreconditionError):
        QPolynomial(0.0, -1.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 2.0), st.floats(-0.999, 0.999), st.floats(-10.0, 10.0))
def test_roots_are_roots(b, frac, r):
    a = frac * 2.0 * np.sqrt(b)
    p = QPolynomial(a, b, r)
    rs = q_roots(p)
    assert len(rs.roots) == 5
    scale = 1.0 + np.abs(rs.roots).max() ** 5 * b
    assert np.all(np.abs(p(rs.roots)) <= 1e-9 * scale)
    for z, w in rs.conjugate_pairs:
        assert abs(z - np.conj(w)) <= 1e-9 * (1 + abs(z))


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 2.0), st.floats(-0.99, 0.99), st.floats(-10.0, 10.0))
def test_claim_holds_without_real_critical_points(b, frac, r):
    # 9 a^2 < 20 b: q' has no real zero, so q is monotone on the real line
    a = frac * np.sqrt(20.0 * b / 9.0)
    assume(4 * b > a * a)
    assert classify_claim(QPolynomial(a, b, r))


def test_claim_counterexample():
    p = QPolynomial(-1.9, 1.0, -0.195)
    rs = q_roots(p)
    assert len(rs.real_roots) == 3
    assert not classify_claim(p)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 2.0), st.floats(-0.999, 0.999))
def test_r0_closed_form(b, frac):
    a = frac * 2.0 * np.sqrt(b)
    ref = r0_closed_form(a, b)
    got = q_roots(QPolynomial(a, b, 0.0)).roots
    for z in ref:
        k = np.argmin(np.abs(got - z))
        assert abs(got[k] - z) <= 1e-10 * max(1.0, abs(z))


def test_n_alpha_examples():
    xi = np.array([0.3, -1.2 + 0.5j, 4.0])
    assert np.allclose(n_alpha(xi, 2.0, (0, 0, 1, 0)), 1.0)
    assert n_alpha(0.0, 2.0, (0, 0, 1, 1)) == 0
    L = 1.7
    assert abs(n_alpha(2 * np.pi / L, L, (1, 1, 0, 0))) < 1e-12
    with pytest.raises(PreconditionError):
        AlphaVector(0, 0, 0, 0)


def test_discriminant_and_determinant():
    assert discriminant((1, 1, 1, 1)) == 0
    assert discriminant((1, 0, 1, 0)) == 1
    # d != 0 while the trace map is degenerate: (1, 2) and (2, 4) are proportional
    alpha = (1, 2, 2, 4)
    assert discriminant(alpha) != 0
    assert mobius_determinant(alpha) == 0
    with pytest.raises(DegenerateConfiguration):
        mobius_map(alpha)


def test_cross_ratio_examples():
    assert cross_ratio(0, 1, 2, 3) == pytest.approx(4 / 3)
    z = q_roots(QPolynomial(1.0, 1.0, 0.0)).nonreal
    assert cross_ratio(*z) == pytest.approx(0.75, abs=1e-12)
    with pytest.raises(DegenerateConfiguration):
        cross_ratio(1, 1, 2, 3)


complexes = st.complex_numbers(max_magnitude=5.0, **finite)


@settings(max_examples=60, deadline=None)
@given(st.lists(complexes, min_size=4, max_size=4), st.lists(complexes, min_size=4, max_size=4))
def test_cross_ratio_mobius_invariant(pts, coef):
    p, q, r, s = coef
    assume(abs(p * s - q * r) > 0.1)
    pts = np.array(pts)
    d = np.abs(pts[:, None] - pts[None, :]) + np.eye(4)
    assume(d.min() > 0.05)
    den = r * pts + s
    assume(np.abs(den).min() > 0.05)
    img = (p * pts + q) / den
    di = np.abs(img[:, None] - img[None, :]) + np.eye(4)
    assume(di.min() > 1e-3)
    cp, ci = cross_ratio(*pts), cross_ratio(*img)
    assert abs(cp - ci) <= 1e-7 * (1 + abs(cp))


def test_feasibility_positive_control_and_roots(rng):
    alpha = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    M, Minv = mobius_map(alpha)
    pts = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    ok, mm = mobius_feasibility(pts, images=M(pts))
    assert ok and mm < 1e-10
    assert np.allclose(Minv(M(pts)), pts)
    z = q_roots(QPolynomial(1.0, 1.0, 0.0)).nonreal
    ok, mm = mobius_feasibility(z, L=1.0)
    assert not ok and mm > 1e-3


def test_mismatch_scan_bounded_away_from_zero():
    z = q_roots(QPolynomial(1.0, 1.0, 0.0)).nonreal
    m = mismatch_scan(z, np.geomspace(0.01, 100.0, 2000))
    assert np.nanmin(m) > 1e-6


def test_zero_structure_examples():
    assert n_alpha_zero_structure((0, 0, 1, -1), 1.0) == {0.0}
    with pytest.raises(PreconditionError):
        n_alpha_zero_structure((1, 2, 3, 5), 1.0)


@settings(max_examples=15, deadline=None)
@given(complexes, complexes, complexes, st.floats(0.5, 3.0))
def test_zero_structure_matches_numerical_zeros(a2, a4, c, L):
    assume(abs(a2) > 0.2 and abs(a4) > 0.2 and 0.3 < abs(c) < 3.0)
    alpha = (c * a2, a2, c * a4, a4)
    parts = n_alpha_zero_structure(alpha, L)
    assert len(parts) <= 2
    zeros = n_alpha_zeros(alpha, L, im_max=6.0)
    assume(len(zeros) > 0)
    for v in imaginary_part_set(zeros):
        assert min(abs(v - p) for p in parts) < 1e-6


def test_numerical_zeros_solve():
    alpha = (1.0, 2.0, 0.5j, 1.0)
    z = n_alpha_zeros(alpha, 1.0)
    assert len(z) > 3
    assert np.all(np.abs(n_alpha(z, 1.0, alpha)) < 1e-9 * (1 + np.abs(z)))


def test_discrete_spectrum_signs(canon):
    g = make_grid(1.0, 64)
    ev = discrete_spectrum(assemble_operator(canon, g, "dissipative"))
    assert len(ev) == 2 * (g.n - 2)
    assert spectral_abscissa(ev) < 0
    ev_c = discrete_spectrum(assemble_operator(canon, g, "conservative"))
    assert relative_real_defect(ev_c) < 1e-10
    full = discrete_spectrum(assemble_operator(canon, g, "conservative"), include_constrained=True)
    assert np.sum(np.abs(full) == 0.0) >= 4
