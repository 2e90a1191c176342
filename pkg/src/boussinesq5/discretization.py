"""
Finite-difference discretization
================================

Uniform grid, centered second-order stencils and the block operator of
the linear system

.. math::

   \\frac{d}{dt}\\begin{pmatrix}\\eta\\\\u\\end{pmatrix}
   = -\\begin{pmatrix}u_x - a u_{xxx} + b u_{xxxxx}\\\\
                     \\eta_x - a \\eta_{xxx} + b \\eta_{xxxxx}\\end{pmatrix}.

Boundary closure
----------------
The widest interior stencil (fifth derivative, 7 points) reaches two
nodes past each end, so every variable has ghost values at ``j = -1, -2``
(and ``N+1, N+2``). Per side the four ghosts are eliminated from

* ``eta_x = 0`` and ``u_x = 0`` (one-sided 6-point formula on nodes -2..3),
* the second-derivative condition of the boundary family,
* a quintic extrapolation (vanishing sixth difference over nodes -2..4)
  of the combination ``w = c_u eta - c_eta u`` that leaves the domain.

The Dirichlet conditions hold at the boundary nodes themselves: the
corresponding rows of the operator are zero, so ``eta_0 = u_0 = 0`` is
preserved by any time stepper built on ``I - c A``.

For the clamped family the two coupled equations are replaced by
``eta_xx = u_xx = 0``, which decouples the variables.
"""

from __future__ import annotations

import enum
from functools import lru_cache
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
import scipy.io
import scipy.sparse as sp

from .model import ModelCoefficients

__all__ = [
    "MIN_CELLS",
    "DomainError",
    "SingularClosureError",
    "Grid",
    "BcFamily",
    "DiscreteOperator",
    "make_grid",
    "fd_weights",
    "derivative_stencils",
    "assemble_operator",
    "assemble_scalar_operator",
    "apply_operator",
    "extend",
    "node_derivatives",
    "trace_second_derivatives",
    "one_sided_second_derivative",
    "inner",
    "quadratic_form",
    "dump_operator",
    "load_operator",
]

MIN_CELLS = 32
_NG = 2          # ghost layers per side
_DNODES = np.arange(-2, 4)   # nodes of the one-sided d/dx and d2/dx2 formulas
_ENODES = np.arange(-2, 5)   # nodes of the extrapolation
_K = 4           # last interior node touched by the closure


class DomainError(ValueError):
    """Invalid grid or dimension mismatch."""


class SingularClosureError(np.linalg.LinAlgError):
    """Ghost elimination system is singular; ``side`` is 'left' or 'right'."""

    def __init__(self, side: str, message: str):
        super().__init__(f"{side} boundary: {message}")
        self.side = side


@dataclass(frozen=True)
class Grid:
    """Uniform grid ``x_j = j h`` on ``[0, L]`` with ``N`` cells."""

    L: float
    N: int

    def __post_init__(self):
        if not (isinstance(self.N, (int, np.integer)) and self.N >= MIN_CELLS):
            raise DomainError(f"N must be an integer >= {MIN_CELLS}, got {self.N}")
        if not self.L > 0:
            raise DomainError(f"L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def n(self) -> int:
        """Number of nodes, ``N + 1``."""
        return self.N + 1

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.L, self.N + 1)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        w = np.full(self.N + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


def make_grid(L: float, N: int) -> Grid:
    """Build a :class:`Grid`, rejecting ``N < 32`` or ``L <= 0``."""
    return Grid(float(L), N)


class BcFamily(enum.Enum):
    """Boundary-condition families.

    All three impose ``eta = eta_x = u = u_x = 0`` at both ends. They
    differ in the second-derivative conditions:

    * ``DISSIPATIVE``: ``u_xx(0) + alpha1 eta_xx(0) = 0`` and
      ``u_xx(L) - alpha2 eta_xx(L) = 0``,
    * ``CONSERVATIVE``: ``eta_xx(0) = 0`` and ``u_xx(L) = 0``,
    * ``CLAMPED``: every second derivative vanishes at both ends.
    """

    DISSIPATIVE = "dissipative"
    CONSERVATIVE = "conservative"
    CLAMPED = "clamped"

    @classmethod
    def parse(cls, tag) -> "BcFamily":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).lower())
        except ValueError:
            raise ValueError(f"unknown boundary family {tag!r}") from None

    def side_weights(self, c: ModelCoefficients):
        """Weights ``(c_u, c_eta)`` of the second-derivative conditions.

        Left: ``c_u u_xx(0) + c_eta eta_xx(0) = 0``.
        Right: ``c_u u_xx(L) - c_eta eta_xx(L) = 0``.
        Returns ``None`` for the clamped family.
        """
        if self is BcFamily.DISSIPATIVE:
            return (1.0, c.alpha1), (1.0, c.alpha2)
        if self is BcFamily.CONSERVATIVE:
            return (0.0, 1.0), (1.0, 0.0)
        return None


def fd_weights(nodes, x0: float, m: int) -> np.ndarray:
    """Finite-difference weights for the ``m``-th derivative at ``x0``.

    Solves the Vandermonde moment system, which is adequate for the
    handful of nodes used here.
    """
    nodes = np.asarray(nodes, dtype=float)
    V = np.vander(nodes - x0, len(nodes), increasing=True).T
    rhs = np.zeros(len(nodes))
    rhs[m] = factorial(m)
    return np.linalg.solve(V, rhs)


_STENCILS = {
    1: (np.array([-1.0, 0.0, 1.0]) / 2.0, 1),
    2: (np.array([1.0, -2.0, 1.0]), 2),
    3: (np.array([-1.0, 2.0, 0.0, -2.0, 1.0]) / 2.0, 3),
    5: (np.array([-1.0, 4.0, -5.0, 0.0, 5.0, -4.0, 1.0]) / 2.0, 5),
}


def derivative_stencils(order: int, h: float) -> np.ndarray:
    """Centered second-order stencil for ``d^order/dx^order``.

    Widths are 3, 3, 5 and 7 for orders 1, 2, 3 and 5. Odd orders are
    antisymmetric, order 2 is symmetric.

    >>> derivative_stencils(1, 0.5)
    array([-1.,  0.,  1.])
    """
    if order not in _STENCILS:
        raise ValueError(f"unsupported derivative order {order}; use 1, 2, 3 or 5")
    if not h > 0:
        raise DomainError(f"h must be positive, got {h}")
    w, p = _STENCILS[order]
    return w / h ** p


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Assembled linear operator acting on the stacked vector ``(eta, u)``.

    Attributes
    ----------
    matrix : scipy.sparse.csr_matrix
        ``2(N+1) x 2(N+1)`` matrix; rows of the boundary nodes are zero.
    grid : Grid
    bc : BcFamily
    coeffs : ModelCoefficients
    ghosts : tuple of ndarray
        Left and right ghost matrices, each ``4 x 2(K+1)``, mapping the
        near-boundary values ``(eta_0..eta_K, u_0..u_K)`` (mirrored on
        the right) to ``(eta_-2, eta_-1, u_-2, u_-1)``.
    order : int
        Formal consistency order of the interior rows.
    """

    matrix: sp.csr_matrix
    grid: Grid
    bc: BcFamily
    coeffs: ModelCoefficients
    ghosts: tuple
    order: int = 2
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def free(self) -> np.ndarray:
        """Indices of the unconstrained (interior) unknowns."""
        n = self.grid.n
        j = np.arange(1, n - 1)
        return np.concatenate([j, n + j])

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def bandwidth(self) -> int:
        """Largest ``|i - j|`` over nonzeros inside any of the four blocks."""
        n = self.grid.n
        A = self.matrix.tocoo()
        return int(np.max(np.abs(A.row % n - A.col % n), initial=0))


def _ghost_matrix(cu, ceta, h, clamped, side):
    """Solve the four ghost equations of one side (left orientation)."""
    d1 = fd_weights(_DNODES * h, 0.0, 1)
    d2 = fd_weights(_DNODES * h, 0.0, 2)
    p = len(_ENODES) - 1
    e6 = np.array([(-1) ** k * comb(p, k) for k in range(p + 1)], dtype=float)
    width = _K + 1 + _NG            # nodes -2..K per variable
    ncol = 2 * width

    def row(weta, wu, nodes):
        r = np.zeros(ncol)
        for w, off in ((weta, 0), (wu, width)):
            if w is not None:
                r[off + nodes + _NG] += w
        return r

    rows = [row(d1, None, _DNODES), row(None, d1, _DNODES)]
    if clamped:
        rows += [row(d2, None, _DNODES), row(None, d2, _DNODES)]
    else:
        rows.append(row(ceta * d2, cu * d2, _DNODES))
        rows.append(row(cu * e6, -ceta * e6, _ENODES))
    M = np.array(rows)
    gcols = [0, 1, width, width + 1]
    icols = [k for k in range(ncol) if k not in gcols]
    Mg = M[:, gcols]
    if np.linalg.cond(Mg) > 1e13:
        raise SingularClosureError(side, f"degenerate ghost system (c_u={cu}, c_eta={ceta})")
    return -np.linalg.solve(Mg, M[:, icols])


def _extension_matrix(grid, GL, GR):
    """Sparse map from ``(eta, u)`` to the ghost-extended ``(eta, u)``."""
    n, N = grid.n, grid.N
    ne = n + 2 * _NG
    rows, cols, vals = [], [], []
    for v in range(2):
        idx = np.arange(n)
        rows.append(v * ne + idx + _NG)
        cols.append(v * n + idx)
        vals.append(np.ones(n))
    ghost_nodes = [(0, -2), (0, -1), (1, -2), (1, -1)]
    for gi, (v, nd) in enumerate(ghost_nodes):
        for cidx in range(2 * (_K + 1)):
            vv, j = divmod(cidx, _K + 1)
            rows += [np.array([v * ne + nd + _NG]), np.array([v * ne + (N - nd) + _NG])]
            cols += [np.array([vv * n + j]), np.array([vv * n + (N - j)])]
            vals += [np.array([GL[gi, cidx]]), np.array([GR[gi, cidx]])]
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * ne, 2 * n))


def _interior_matrix(grid, c):
    """Interior rows ``-(D1 - a D3 + b D5)`` applied across the blocks."""
    n, N, h = grid.n, grid.N, grid.h
    ne = n + 2 * _NG
    rows, cols, vals = [], [], []
    j = np.arange(1, N)
    for st, coef in ((derivative_stencils(1, h), -1.0),
                     (derivative_stencils(3, h), c.a),
                     (derivative_stencils(5, h), -c.b)):
        half = len(st) // 2
        for k, w in enumerate(st):
            if w == 0.0:
                continue
            for tgt, src in ((0, 1), (1, 0)):
                rows.append(tgt * n + j)
                cols.append(src * ne + j + k - half + _NG)
                vals.append(np.full(j.size, coef * w))
    rows, cols, vals = map(np.concatenate, (rows, cols, vals))
    return sp.csr_matrix((vals, (rows, cols)), shape=(2 * n, 2 * ne))


def assemble_operator(c: ModelCoefficients, g: Grid, bc) -> DiscreteOperator:
    """Assemble the block operator for the given boundary family.

    Parameters
    ----------
    c : ModelCoefficients
        Only ``a``, ``b`` and the gains enter.
    g : Grid
    bc : BcFamily or str

    Returns
    -------
    DiscreteOperator

    Raises
    ------
    SingularClosureError
        If the ghost system of one side is degenerate.
    """
    bc = BcFamily.parse(bc)
    if not c.b > 0:
        raise ValueError(f"b must be positive, got {c.b}")
    weights = bc.side_weights(c)
    clamped = weights is None
    (cul, cel), (cur, cer) = weights if not clamped else ((0.0, 0.0), (0.0, 0.0))
    GL = _ghost_matrix(cul, cel, g.h, clamped, "left")
    # mirroring x -> L - x keeps even derivatives, so the right condition
    # c_u u_xx - c_eta eta_xx = 0 becomes the left form with c_eta -> -c_eta
    GR = _ghost_matrix(cur, -cer, g.h, clamped, "right")
    E = _extension_matrix(g, GL, GR)
    A = (_interior_matrix(g, c) @ E).tocsr()
    A.eliminate_zeros()
    return DiscreteOperator(A, g, bc, c, (GL, GR))


def assemble_scalar_operator(c: ModelCoefficients, g: Grid) -> sp.csr_matrix:
    """Scalar operator ``phi -> -(phi' - a phi''' + b phi''''')`` with clamped ends.

    With ``(eta, u) = (phi, phi)`` the clamped block operator acts on
    each component exactly as this matrix does.
    """
    op = assemble_operator(c, g, BcFamily.CLAMPED)
    n = g.n
    return op.matrix[:n, n:].tocsr()


def _stacked(op_or_grid, s):
    """Return the stacked ``(eta, u)`` vector of a state or array."""
    if hasattr(s, "eta"):
        v = np.concatenate([np.asarray(s.eta, float), np.asarray(s.u, float)])
    else:
        v = np.asarray(s)
    return v


def apply_operator(op: DiscreteOperator, s) -> np.ndarray:
    """Matrix-vector product ``A_h (eta, u)``.

    ``s`` is a state (anything with ``eta`` and ``u``) or a stacked
    vector. Returns the stacked result.
    """
    v = _stacked(op, s)
    if v.shape[0] != op.size:
        raise DomainError(f"state has length {v.shape[0]}, operator expects {op.size}")
    return op.matrix @ v


def extend(op: DiscreteOperator, s):
    """Ghost-extended ``(eta, u)`` on nodes ``-2..N+2``."""
    v = _stacked(op, s)
    n = op.grid.n
    if v.shape[0] != 2 * n:
        raise DomainError(f"state has length {v.shape[0]}, expected {2 * n}")
    E = op._cache.get("extension")
    if E is None:
        E = _extension_matrix(op.grid, *op.ghosts)
        op._cache["extension"] = E
    ve = E @ v
    ne = n + 2 * _NG
    return ve[:ne], ve[ne:]


def node_derivatives(op: DiscreteOperator, s):
    """Centered first and second derivatives at every node ``0..N``.

    Values at the boundary nodes use the closure's ghost values.

    Returns
    -------
    (eta_x, eta_xx, u_x, u_xx) : tuple of ndarray
    """
    h = op.grid.h
    out = []
    for f in extend(op, s):
        inner_ = slice(_NG, -_NG)
        fx = (f[_NG + 1:len(f) - _NG + 1] - f[_NG - 1:len(f) - _NG - 1]) / (2 * h)
        fxx = (f[_NG + 1:len(f) - _NG + 1] - 2 * f[inner_]
               + f[_NG - 1:len(f) - _NG - 1]) / h ** 2
        out += [fx, fxx]
    return tuple(out)


@lru_cache(maxsize=64)
def _trace_weights(h):
    w = fd_weights(_DNODES * h, 0.0, 2)
    w.setflags(write=False)
    return w


def trace_second_derivatives(s, g: Grid, op: DiscreteOperator | None = None):
    """Boundary second derivatives ``(eta_xx(0), eta_xx(L), u_xx(0), u_xx(L))``.

    With ``op`` the values are the closure's own: the 6-point formula
    used in the ghost elimination, applied to the ghost-extended state.
    Such traces satisfy the boundary family exactly (for instance
    ``eta_xx(0) = 0`` under the conservative family). Without ``op`` a
    one-sided formula is used (:func:`one_sided_second_derivative`).
    """
    if op is None:
        v = _stacked(None, s)
        n = g.n
        eta, u = v[:n], v[n:]
        return (one_sided_second_derivative(eta, g.h),
                one_sided_second_derivative(eta[::-1], g.h),
                one_sided_second_derivative(u, g.h),
                one_sided_second_derivative(u[::-1], g.h))
    w = _trace_weights(op.grid.h)
    ee, ue = extend(op, s)
    m = len(w)
    return (w @ ee[:m], w @ ee[::-1][:m], w @ ue[:m], w @ ue[::-1][:m])


def one_sided_second_derivative(f, h: float) -> float:
    """Second derivative at the first node of ``f`` assuming ``f'(0) = 0``.

    Uses the quintic through ``f_0..f_4`` with zero slope at the end, so
    it is exact for polynomials of degree five that are flat at ``0``.
    """
    nodes = np.arange(5) * h
    # unknowns: the coefficients c0, c2..c5 (c1 = 0)
    powers = np.array([0, 2, 3, 4, 5])
    V = nodes[:, None] ** powers[None, :]
    coef = np.linalg.solve(V, np.asarray(f[:5], float))
    return 2.0 * coef[1]


def inner(g: Grid, v, w) -> float:
    """Trapezoidal inner product of stacked ``(eta, u)`` vectors."""
    n = g.n
    wt = g.weights
    v = np.asarray(v)
    w = np.asarray(w)
    return float(wt @ (v[:n] * w[:n]) + wt @ (v[n:] * w[n:]))


def quadratic_form(op: DiscreteOperator, v) -> float:
    """``<A_h v, v>`` in the trapezoidal inner product."""
    v = _stacked(op, v)
    return inner(op.grid, op.matrix @ v, v)


def dump_operator(op: DiscreteOperator, path) -> None:
    """Write the operator as a Matrix Market coordinate file."""
    c = op.coeffs
    comment = (f" boussinesq5 operator bc={op.bc.value} N={op.grid.N} L={op.grid.L!r}"
               f" a={c.a!r} b={c.b!r} alpha1={c.alpha1!r} alpha2={c.alpha2!r}"
               f" order={op.order} layout=stacked(eta,u)")
    scipy.io.mmwrite(str(path), op.matrix.tocoo(), comment=comment, precision=17)


def load_operator(path) -> sp.csr_matrix:
    """Read back a matrix written by :func:`dump_operator`."""
    return sp.csr_matrix(scipy.io.mmread(str(path)))
