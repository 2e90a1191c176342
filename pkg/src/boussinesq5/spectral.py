"""
Spectral tools
==============

Roots of the characteristic quintic ``q(xi) = b xi^5 + a xi^3 + xi + r``,
the boundary function

.. math::

   N_\\alpha(\\xi, L) = \\alpha_1 i\\xi - \\alpha_2 i\\xi e^{-i\\xi L}
                      + \\alpha_3 - \\alpha_4 e^{-i\\xi L},

cross-ratio tests for the existence of a Möbius map sending four points
to prescribed images, and eigenvalues of the assembled operators.

The cross-ratio convention used throughout is
``CR(z1, z2, z3, z4) = ((z1 - z3)(z2 - z4)) / ((z1 - z4)(z2 - z3))``.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .discretization import DiscreteOperator

__all__ = [
    "PreconditionError",
    "NonConvergence",
    "DegenerateConfiguration",
    "QPolynomial",
    "RootStructure",
    "AlphaVector",
    "q_roots",
    "classify_claim",
    "r0_closed_form",
    "n_alpha",
    "discriminant",
    "mobius_determinant",
    "mobius_map",
    "cross_ratio",
    "mobius_feasibility",
    "mismatch_scan",
    "n_alpha_zero_structure",
    "n_alpha_zeros",
    "imaginary_part_set",
    "discrete_spectrum",
    "spectral_abscissa",
    "relative_real_defect",
]

NEWTON_TOL = 1e-12
REAL_TOL = 1e-9


class PreconditionError(ValueError):
    """Input outside the admissible set (for example ``4b <= a^2``)."""


class NonConvergence(ArithmeticError):
    def __init__(self, residuals):
        super().__init__(f"root polishing did not converge; residuals {residuals}")
        self.residuals = residuals


class DegenerateConfiguration(ValueError):
    """Coincident points or images in a cross-ratio test."""


@dataclass(frozen=True)
class QPolynomial:
    """``q(xi) = b xi^5 + a xi^3 + xi + r`` with real ``a, b, r``.

    The spectral parameter is ``lambda = -i r``.
    """

    a: float
    b: float
    r: float = 0.0

    def __post_init__(self):
        if not self.b > 0:
            raise PreconditionError(f"b must be positive, got {self.b}")
        if not 4 * self.b > self.a * self.a:
            raise PreconditionError(f"need 4b > a^2, got a={self.a}, b={self.b}")

    @property
    def coefficients(self) -> np.ndarray:
        """Coefficients from the highest degree down, for ``numpy.polyval``."""
        return np.array([self.b, 0.0, self.a, 0.0, 1.0, self.r])

    def __call__(self, xi):
        return np.polyval(self.coefficients, xi)

    def derivative(self, xi):
        return np.polyval(np.polyder(self.coefficients), xi)

    def residual_bound(self, roots) -> float:
        return 1e-8 * (abs(self.b) * float(np.max(np.abs(roots))) ** 5 + abs(self.r) + 1.0)


@dataclass(frozen=True)
class RootStructure:
    """Five roots split into real roots and conjugate pairs.

    ``conjugate_pairs`` lists ``(z, conj partner)`` with ``Im z > 0``.
    ``min_separation`` is the smallest distance between two roots, a
    proxy for multiplicity.
    """

    roots: np.ndarray
    real_roots: tuple
    conjugate_pairs: tuple
    unpaired: tuple
    min_separation: float
    residuals: np.ndarray

    @property
    def nonreal(self) -> np.ndarray:
        """The non-real roots, ordered ``(z1, z2, conj z1, conj z2)``."""
        tops = [p[0] for p in self.conjugate_pairs]
        return np.array(tops + [p[1] for p in self.conjugate_pairs])


def _polish(p: QPolynomial, z: complex, iters: int = 50) -> complex:
    for _ in range(iters):
        d = p.derivative(z)
        if d == 0:
            break
        step = p(z) / d
        z = z - step
        if abs(step) <= NEWTON_TOL * max(1.0, abs(z)):
            break
    return complex(z)


def q_roots(p: QPolynomial) -> RootStructure:
    """All five roots of ``q``: companion eigenvalues, Newton polish, pairing.

    A root is real when ``|Im z| < 1e-9 max(1, |z|)``; its imaginary part
    is then dropped. Non-real roots are paired with their nearest
    conjugate.

    Examples
    --------
    >>> rs = q_roots(QPolynomial(1.0, 1.0, 0.0))
    >>> len(rs.real_roots), len(rs.conjugate_pairs)
    (1, 2)
    """
    raw = np.roots(p.coefficients)
    roots = np.array([_polish(p, z) for z in raw])
    res = np.abs(p(roots))
    if np.any(~np.isfinite(roots)) or np.any(res > p.residual_bound(roots)):
        raise NonConvergence(res)
    real, cplx = [], []
    for z in roots:
        if abs(z.imag) < REAL_TOL * max(1.0, abs(z)):
            real.append(float(z.real))
        else:
            cplx.append(z)
    pairs, left = [], list(cplx)
    upper = sorted((z for z in cplx if z.imag > 0), key=lambda z: (z.real, z.imag))
    for z in upper:
        if z not in left:
            continue
        left.remove(z)
        cands = [w for w in left if w.imag < 0]
        if not cands:
            left.append(z)
            continue
        w = min(cands, key=lambda w: abs(w - z.conjugate()))
        if abs(w - z.conjugate()) > 1e-7 * max(1.0, abs(z)):
            left.append(z)
            continue
        left.remove(w)
        pairs.append((z, w))
    d = np.abs(roots[:, None] - roots[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return RootStructure(roots, tuple(sorted(real)), tuple(pairs), tuple(left),
                         float(d.min()), res)


def classify_claim(p: QPolynomial) -> bool:
    """True iff ``q`` has exactly one simple real root and two conjugate pairs."""
    rs = q_roots(p)
    if len(rs.real_roots) != 1 or len(rs.conjugate_pairs) != 2 or rs.unpaired:
        return False
    scale = max(1.0, float(np.max(np.abs(rs.roots))))
    return rs.min_separation > 1e-6 * scale


def r0_closed_form(a: float, b: float) -> np.ndarray:
    """Roots of ``q`` for ``r = 0``: ``0, +-rho, +-conj(rho)``.

    ``rho^2 = -a/(2b) + i sqrt(4b - a^2)/(2b)``.
    """
    if not 4 * b > a * a or not b > 0:
        raise PreconditionError("need b > 0 and 4b > a^2")
    rho = cmath.sqrt(complex(-a / (2 * b), np.sqrt(4 * b - a * a) / (2 * b)))
    return np.array([0.0, rho, -rho, rho.conjugate(), -rho.conjugate()])


@dataclass(frozen=True)
class AlphaVector:
    """Complex trace parameters ``(alpha1, alpha2, alpha3, alpha4)``."""

    alpha1: complex
    alpha2: complex
    alpha3: complex
    alpha4: complex

    def __post_init__(self):
        vals = [complex(v) for v in self.astuple()]
        for name, v in zip(("alpha1", "alpha2", "alpha3", "alpha4"), vals):
            object.__setattr__(self, name, v)
        if all(v == 0 for v in vals):
            raise PreconditionError("alpha vector must not vanish")

    def astuple(self):
        return (self.alpha1, self.alpha2, self.alpha3, self.alpha4)

    @classmethod
    def of(cls, alpha) -> "AlphaVector":
        return alpha if isinstance(alpha, cls) else cls(*alpha)


def n_alpha(xi, L: float, alpha) -> complex:
    """``alpha1 i xi - alpha2 i xi e^{-i xi L} + alpha3 - alpha4 e^{-i xi L}``."""
    a1, a2, a3, a4 = AlphaVector.of(alpha).astuple()
    e = np.exp(-1j * np.asarray(xi) * L)
    return a1 * 1j * xi - a2 * 1j * xi * e + a3 - a4 * e


def discriminant(alpha) -> complex:
    """``d(alpha) = alpha1 alpha3 - alpha2 alpha4``.

    This is the bilinear quantity usually attached to ``N_alpha``. It is
    not the determinant of the map ``xi -> (alpha1 i xi + alpha3) /
    (alpha2 i xi + alpha4)``; see :func:`mobius_determinant`.
    """
    a1, a2, a3, a4 = AlphaVector.of(alpha).astuple()
    return a1 * a3 - a2 * a4


def mobius_determinant(alpha) -> complex:
    """Determinant ``i (alpha1 alpha4 - alpha2 alpha3)`` of the trace map.

    The map ``xi -> (i alpha1 xi + alpha3) / (i alpha2 xi + alpha4)`` is a
    genuine Möbius transformation exactly when this is nonzero, i.e. when
    ``(alpha1, alpha3)`` and ``(alpha2, alpha4)`` are not proportional.
    """
    a1, a2, a3, a4 = AlphaVector.of(alpha).astuple()
    return 1j * (a1 * a4 - a2 * a3)


def mobius_map(alpha):
    """Return ``(M, M_inverse)`` for the trace map of ``alpha``.

    Raises
    ------
    DegenerateConfiguration
        If the determinant vanishes.
    """
    a1, a2, a3, a4 = AlphaVector.of(alpha).astuple()
    p, q, r, s = 1j * a1, a3, 1j * a2, a4
    det = p * s - q * r
    if abs(det) <= 1e-14 * max(abs(p), abs(q), abs(r), abs(s)) ** 2:
        raise DegenerateConfiguration("trace map has zero determinant")

    def M(z):
        return (p * z + q) / (r * z + s)

    def Minv(w):
        return (s * w - q) / (-r * w + p)

    return M, Minv


def cross_ratio(z1, z2, z3, z4) -> complex:
    """``((z1 - z3)(z2 - z4)) / ((z1 - z4)(z2 - z3))``.

    >>> cross_ratio(0, 1, 2, 3)
    (1.3333333333333333+0j)
    """
    pts = [complex(z) for z in (z1, z2, z3, z4)]
    scale = max(1.0, max(abs(z) for z in pts))
    for i in range(4):
        for j in range(i + 1, 4):
            if abs(pts[i] - pts[j]) <= 1e-14 * scale:
                raise DegenerateConfiguration(f"points {i} and {j} coincide")
    z1, z2, z3, z4 = pts
    return ((z1 - z3) * (z2 - z4)) / ((z1 - z4) * (z2 - z3))


def mobius_feasibility(points, L: float | None = None, images=None):
    """Decide whether a Möbius map sends ``points`` to their images.

    Parameters
    ----------
    points : four distinct complex numbers
    L : float, optional
        Images default to ``exp(-i L xi)``.
    images : four complex numbers, optional
        Explicit images; overrides ``L``.

    Returns
    -------
    (feasible, mismatch) : (bool, float)
        ``mismatch = |CR(points) - CR(images)|`` and the verdict is
        ``mismatch < 1e-10 (1 + |CR(points)|)``.
    """
    pts = np.asarray(points, dtype=complex)
    if images is None:
        if L is None:
            raise ValueError("give either L or images")
        images = np.exp(-1j * L * pts)
    imgs = np.asarray(images, dtype=complex)
    if pts.shape != (4,) or imgs.shape != (4,):
        raise ValueError("need exactly four points and four images")
    cp = cross_ratio(*pts)
    try:
        ci = cross_ratio(*imgs)
    except DegenerateConfiguration as err:
        raise DegenerateConfiguration(f"images: {err}") from None
    mismatch = float(abs(cp - ci))
    return mismatch < 1e-10 * (1.0 + abs(cp)), mismatch


def mismatch_scan(points, Ls) -> np.ndarray:
    """Cross-ratio mismatch for each ``L``; ``nan`` where images coincide."""
    out = np.empty(len(Ls))
    for k, L in enumerate(Ls):
        try:
            out[k] = mobius_feasibility(points, L)[1]
        except DegenerateConfiguration:
            out[k] = np.nan
    return out


def n_alpha_zero_structure(alpha, L: float, tol: float = 1e-12) -> set:
    """Imaginary parts of the zeros of ``N_alpha`` in the degenerate case.

    Degenerate means ``(alpha1, alpha3) = c (alpha2, alpha4)``, so that
    ``N_alpha = (i alpha2 xi + alpha4)(c - e^{-i xi L})``. Its zeros are

    * ``xi = i alpha4 / alpha2`` from the linear factor (when
      ``alpha2 != 0``), with ``Im xi = Re(alpha4 / alpha2)``,
    * ``e^{-i xi L} = c`` (when ``c != 0``), all with
      ``Im xi = ln|c| / L``.

    When ``(alpha2, alpha4) = 0`` the function reduces to
    ``i alpha1 xi + alpha3`` and only the linear zero remains.

    Raises
    ------
    PreconditionError
        If the two pairs are not proportional.
    """
    av = AlphaVector.of(alpha)
    a1, a2, a3, a4 = av.astuple()
    scale = max(abs(v) for v in av.astuple())
    if abs(a1 * a4 - a2 * a3) > tol * scale * scale:
        raise PreconditionError("(alpha1, alpha3) and (alpha2, alpha4) are not proportional")
    parts = set()
    if abs(a2) <= tol * scale and abs(a4) <= tol * scale:
        if abs(a1) > tol * scale:
            parts.add(_clean((1j * a3 / a1).imag))
        return parts
    c = a1 / a2 if abs(a2) >= abs(a4) else a3 / a4
    if abs(a2) > tol * scale:
        parts.add(_clean((1j * a4 / a2).imag))
    if abs(c) > tol:
        parts.add(_clean(np.log(abs(c)) / L))
    return parts


def _n_alpha_prime(xi, L, alpha):
    a1, a2, a3, a4 = AlphaVector.of(alpha).astuple()
    e = np.exp(-1j * xi * L)
    return 1j * a1 - 1j * a2 * e - a2 * L * xi * e + 1j * L * a4 * e


def n_alpha_zeros(alpha, L: float, re_max: float | None = None, im_max: float = 4.0,
                  seeds_per_unit: float = 4.0, tol: float = 1e-11) -> np.ndarray:
    """Zeros of ``N_alpha(., L)`` in a rectangle, found without factoring.

    Newton iterations start from a uniform grid of seeds covering
    ``|Re xi| <= re_max``, ``|Im xi| <= im_max``; converged points inside
    the box are deduplicated.

    Parameters
    ----------
    alpha : AlphaVector or 4-tuple
    L : float
    re_max : float, optional
        Defaults to ``12 pi / L`` (six periods of ``e^{-i xi L}``).
    im_max, seeds_per_unit : float
        Box height and seed density.
    tol : float
        Residual tolerance relative to ``1 + |xi| max|alpha|``.

    Returns
    -------
    ndarray of complex
        Sorted by real part.
    """
    av = AlphaVector.of(alpha)
    scale = max(abs(v) for v in av.astuple())
    if re_max is None:
        re_max = 12.0 * np.pi / L
    nr = max(8, int(2 * re_max * seeds_per_unit))
    ni = max(4, int(2 * im_max * seeds_per_unit))
    zr, zi = np.meshgrid(np.linspace(-re_max, re_max, nr), np.linspace(-im_max, im_max, ni))
    z = (zr + 1j * zi).ravel()
    with np.errstate(all="ignore"):
        for _ in range(60):
            f = n_alpha(z, L, av)
            fp = _n_alpha_prime(z, L, av)
            step = np.where(fp != 0, f / fp, 0.0)
            z = z - step
            if np.all(~np.isfinite(z) | (np.abs(step) < 1e-14 * (1 + np.abs(z)))):
                break
        ok = np.isfinite(z)
        z = z[ok]
        res = np.abs(n_alpha(z, L, av))
    keep = ((res <= tol * (1 + np.abs(z)) * scale)
            & (np.abs(z.real) <= re_max) & (np.abs(z.imag) <= im_max))
    z = z[keep]
    out = []
    for w in z[np.argsort(z.real)]:
        if not any(abs(w - v) <= 1e-7 * (1 + abs(w)) for v in out):
            out.append(w)
    return np.array(out, dtype=complex)


def imaginary_part_set(zeros, tol: float = 1e-6) -> np.ndarray:
    """Distinct imaginary parts, merging values closer than ``tol``."""
    vals = np.sort(np.asarray(zeros).imag)
    out = []
    for v in vals:
        if not out or v - out[-1] > tol * (1 + abs(v)):
            out.append(v)
    return np.array(out)


def _clean(v: float) -> float:
    v = float(v)
    return 0.0 if abs(v) < 1e-14 else v


def discrete_spectrum(op: DiscreteOperator, include_constrained: bool = False) -> np.ndarray:
    """Eigenvalues of the assembled operator.

    By default only the unconstrained (interior) unknowns are kept. The
    boundary-node rows are zero, so the full matrix carries four extra
    zero eigenvalues that belong to the constraints, not the dynamics.
    """
    A = op.dense()
    if not include_constrained:
        f = op.free
        A = A[np.ix_(f, f)]
    return scipy.linalg.eigvals(A, check_finite=True)


def spectral_abscissa(eigs) -> float:
    return float(np.max(np.real(eigs)))


def relative_real_defect(eigs) -> float:
    """``max |Re lambda| / max |lambda|``."""
    eigs = np.asarray(eigs)
    return float(np.max(np.abs(eigs.real)) / np.max(np.abs(eigs)))
