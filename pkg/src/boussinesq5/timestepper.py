"""
Time integration
================

Crank-Nicolson for the stiff linear part and second-order
Adams-Bashforth for the nonlinear terms:

.. math::

   (I - \\tfrac{\\Delta t}{2} A_h) s^{n+1} = (I + \\tfrac{\\Delta t}{2} A_h) s^n
       + \\Delta t \\left(\\tfrac32 F(s^n) - \\tfrac12 F(s^{n-1})\\right).

The first step uses explicit Euler for ``F``. The implicit matrix is
factored once per ``(operator, dt)`` with a banded LU. The unknowns are
interleaved as ``(eta_0, u_0, eta_1, u_1, ...)`` so both half-bandwidths
equal 7.
"""

from __future__ import annotations

import enum
import struct
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack

from . import diagnostics
from .discretization import BcFamily, DiscreteOperator, DomainError, Grid
from .model import ModelCoefficients

__all__ = [
    "Mode",
    "State",
    "RunConfig",
    "Trajectory",
    "BlowUpError",
    "SingularFactorization",
    "FileFormatError",
    "cn_factor",
    "step_linear",
    "nonlinear_rhs",
    "step_nonlinear",
    "run",
    "write_snapshots_csv",
    "read_snapshots_csv",
    "write_trajectory_binary",
    "read_trajectory_binary",
    "write_checkpoint",
    "read_checkpoint",
]

CHECKPOINT_MAGIC = b"B5KDV1"
TRAJECTORY_MAGIC = b"B5KDVT"
BC_TOLERANCE = 1e-10


class BlowUpError(RuntimeError):
    """Sup norm exceeded the blow-up threshold; carries the last good state."""

    def __init__(self, t: float, norm: float, threshold: float, state=None):
        super().__init__(f"blow-up at t={t:.6g}: |s|_inf={norm:.3e} > {threshold:.3e}")
        self.t = t
        self.norm = norm
        self.threshold = threshold
        self.state = state


class SingularFactorization(np.linalg.LinAlgError):
    def __init__(self, dt: float, cond: float):
        super().__init__(f"singular implicit matrix for dt={dt!r} (condition estimate {cond:.3e})")
        self.dt = dt
        self.cond = cond


class FileFormatError(ValueError):
    """State or trajectory file does not match the expected layout."""


class Mode(enum.Enum):
    LINEAR = "linear"
    CONSERVATIVE = "conservative"
    NONLINEAR = "nonlinear"

    @classmethod
    def parse(cls, tag) -> "Mode":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).lower())
        except ValueError:
            raise ValueError(f"unknown mode {tag!r}") from None


@dataclass(frozen=True, eq=False)
class State:
    """Discrete ``(eta, u)`` on the nodes ``0..N`` at time ``t``."""

    eta: np.ndarray
    u: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if eta.shape != u.shape or eta.ndim != 1:
            raise DomainError(f"eta and u must be 1-D of equal length, got {eta.shape}, {u.shape}")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "u", u)

    @classmethod
    def from_stacked(cls, v, t: float = 0.0) -> "State":
        v = np.asarray(v, dtype=float)
        n = v.shape[0] // 2
        return cls(v[:n].copy(), v[n:].copy(), t)

    @classmethod
    def zeros(cls, grid: Grid, t: float = 0.0) -> "State":
        return cls(np.zeros(grid.n), np.zeros(grid.n), t)

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.eta, self.u])

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.eta), initial=0.0),
                         np.max(np.abs(self.u), initial=0.0)))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.eta)) and np.all(np.isfinite(self.u)))

    def bc_violation(self) -> float:
        """Largest boundary-node value (the constrained entries)."""
        return float(max(abs(self.eta[0]), abs(self.eta[-1]),
                         abs(self.u[0]), abs(self.u[-1])))

    def scaled(self, factor: float) -> "State":
        return State(factor * self.eta, factor * self.u, self.t)

    def equals(self, other: "State") -> bool:
        """Bitwise equality of values and time."""
        return (self.t == other.t and np.array_equal(self.eta, other.eta)
                and np.array_equal(self.u, other.u))


@dataclass(frozen=True)
class RunConfig:
    """Time-stepping controls.

    ``stride`` sets how often states are stored in the trajectory;
    energy records are kept at every step. ``T = 0`` is allowed and
    returns the initial state alone.
    """

    dt: float
    T: float
    mode: Mode = Mode.LINEAR
    smallness_threshold: float | None = None
    blowup_threshold: float | None = None
    stride: int = 1

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.T >= 0:
            raise ValueError(f"T must be nonnegative, got {self.T}")
        if self.T > 0 and self.dt > self.T * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} exceeds T={self.T}")
        for name in ("smallness_threshold", "blowup_threshold"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive when set, got {v}")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.T > 0 and abs(self.nsteps * self.dt - self.T) > 1e-9 * self.T:
            raise ValueError(f"T={self.T} is not a multiple of dt={self.dt}")

    @property
    def nsteps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class Trajectory:
    """Output of :func:`run`.

    Attributes
    ----------
    states : list of State
        Stored every ``stride`` steps plus the final state.
    records : list of diagnostics.EnergyRecord
        One record per time level, including ``t = 0``.
    blowup_time : float or None
        Time of the detected blow-up, if any.
    """

    op: DiscreteOperator
    coeffs: ModelCoefficients
    config: RunConfig
    states: list = field(default_factory=list)
    records: list = field(default_factory=list)
    blowup_time: float | None = None
    warnings: list = field(default_factory=list)

    @property
    def grid(self) -> Grid:
        return self.op.grid

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.E for r in self.records])

    @property
    def initial(self) -> State:
        return self.states[0]

    @property
    def final(self) -> State:
        return self.states[-1]


# ---------------------------------------------------------------- solver

_HALF_BAND = 7


@dataclass(frozen=True, eq=False)
class _BandedLU:
    lu: np.ndarray
    piv: np.ndarray
    perm: np.ndarray
    rhs_matrix: sp.csr_matrix

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x, info = lapack.dgbtrs(self.lu, _HALF_BAND, _HALF_BAND,
                                rhs[self.perm][:, None], self.piv)
        if info != 0:
            raise np.linalg.LinAlgError(f"dgbtrs failed with info={info}")
        out = np.empty_like(rhs)
        out[self.perm] = x[:, 0]
        return out


def _interleave(n: int) -> np.ndarray:
    p = np.empty(2 * n, dtype=int)
    p[0::2] = np.arange(n)
    p[1::2] = n + np.arange(n)
    return p


def cn_factor(op: DiscreteOperator, dt: float) -> _BandedLU:
    """Banded LU of ``I - dt/2 A_h``; cached on the operator per ``dt``."""
    key = ("cn", float(dt))
    fac = op._cache.get(key)
    if fac is not None:
        return fac
    n = op.grid.n
    size = 2 * n
    perm = _interleave(n)
    I = sp.identity(size, format="csr")
    M = (I - 0.5 * dt * op.matrix).tocsr()[perm][:, perm].tocoo()
    kl = ku = _HALF_BAND
    if np.any(np.abs(M.row - M.col) > kl):
        raise DomainError("operator exceeds the banded solver's bandwidth")
    ab = np.zeros((2 * kl + ku + 1, size))
    ab[kl + ku + M.row - M.col, M.col] = M.data
    lu, piv, info = lapack.dgbtrf(ab, kl, ku)
    if info != 0:
        cond = np.inf
        if size <= 2048:
            cond = float(np.linalg.cond(M.toarray()))
        raise SingularFactorization(dt, cond)
    fac = _BandedLU(lu, piv, perm, (I + 0.5 * dt * op.matrix).tocsr())
    op._cache[key] = fac
    return fac


def step_linear(op: DiscreteOperator, s: State, dt: float) -> State:
    """One Crank-Nicolson step of the linear system.

    ``dt`` may be negative, which steps backwards in time.
    """
    if s.n != op.grid.n:
        raise DomainError(f"state has {s.n} nodes, operator grid has {op.grid.n}")
    fac = cn_factor(op, dt)
    v = fac.solve(fac.rhs_matrix @ s.stacked())
    return State.from_stacked(v, s.t + dt)


def nonlinear_rhs(c: ModelCoefficients, s: State, g: Grid) -> np.ndarray:
    """Nonlinear terms moved to the right-hand side, stacked.

    Returns ``(-a1 (eta u)_x - a2 (eta u_xx)_x,
    -a1 u u_x - a3 (eta eta_xx)_x - a4 u_x u_xx)`` at interior nodes,
    with zeros at the boundary nodes. Products are formed pointwise and
    then differentiated with the centered stencils.
    """
    n = g.n
    out = np.zeros(2 * n)
    if c.is_linear:
        return out
    h = g.h
    eta, u = s.eta, s.u

    def dx(f):
        return (f[2:] - f[:-2]) / (2 * h)

    def dxx_nodes(f):
        d = np.zeros_like(f)
        d[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / (h * h)
        return d

    uxx = dxx_nodes(u)
    etaxx = dxx_nodes(eta)
    ux = dx(u)
    out[1:n - 1] = -c.a1 * dx(eta * u) - c.a2 * dx(eta * uxx)
    out[n + 1:2 * n - 1] = (-c.a1 * u[1:-1] * ux - c.a3 * dx(eta * etaxx)
                            - c.a4 * ux * uxx[1:-1])
    return out


def _check_blowup(s: State, threshold: float | None):
    if threshold is None:
        return
    norm = s.sup_norm()
    if not np.isfinite(norm) or norm > threshold:
        raise BlowUpError(s.t, norm, threshold)


def step_nonlinear(op: DiscreteOperator, c: ModelCoefficients, s_prev: State | None,
                   s: State, dt: float, blowup_threshold: float | None = None,
                   f_prev: np.ndarray | None = None) -> State:
    """One IMEX step: Crank-Nicolson on ``A_h``, AB2 on the nonlinear terms.

    Parameters
    ----------
    s_prev : State or None
        Previous time level. ``None`` selects the explicit-Euler start.
    f_prev : ndarray, optional
        Cached ``nonlinear_rhs(s_prev)`` to avoid recomputation.

    Raises
    ------
    BlowUpError
        If the new state's sup norm exceeds ``blowup_threshold``.
    """
    f_cur = f_prev_used = None
    if not c.is_linear:
        f_cur = nonlinear_rhs(c, s, op.grid)
        if s_prev is not None:
            f_prev_used = f_prev if f_prev is not None else nonlinear_rhs(c, s_prev, op.grid)
    out = _imex_step(op, c, s_prev, s, dt, f_cur, f_prev_used)
    _check_blowup(out, blowup_threshold)
    return out


def run(op: DiscreteOperator, c: ModelCoefficients, s0: State, rc: RunConfig) -> Trajectory:
    """Integrate from ``s0`` up to ``rc.T``.

    Linear and conservative modes drop the nonlinear terms; the
    conservative mode additionally requires the conservative operator.
    Energy records (energy, boundary traces, nonlinear flux, identity
    residual) are computed at every step. On blow-up the partial
    trajectory is returned with ``blowup_time`` set.
    """
    if rc.mode is Mode.CONSERVATIVE and op.bc is not BcFamily.CONSERVATIVE:
        raise ValueError("conservative mode needs an operator with the conservative family")
    if s0.n != op.grid.n:
        raise DomainError(f"state has {s0.n} nodes, operator grid has {op.grid.n}")
    if s0.bc_violation() > BC_TOLERANCE:
        raise ValueError(f"initial state violates the boundary conditions by {s0.bc_violation():.3e}")
    step_coeffs = c if rc.mode is Mode.NONLINEAR else c.linearized()
    step_coeffs = diagnostics.effective_coefficients(step_coeffs, op)
    traj = Trajectory(op, c, rc)
    norm0 = diagnostics.l2_norm(s0, op.grid)
    if rc.smallness_threshold is not None and norm0 > rc.smallness_threshold:
        msg = f"initial norm {norm0:.3e} exceeds smallness threshold {rc.smallness_threshold:.3e}"
        traj.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    threshold = rc.blowup_threshold
    if threshold is None:
        threshold = 1e6 * s0.sup_norm() if s0.sup_norm() > 0 else None

    traj.states.append(s0)
    rec = diagnostics.make_record(s0, op, step_coeffs)
    traj.records.append(rec)
    s_prev, s, f_prev = None, s0, None
    for k in range(1, rc.nsteps + 1):
        try:
            f_cur = None if step_coeffs.is_linear else nonlinear_rhs(step_coeffs, s, op.grid)
            s_new = _imex_step(op, step_coeffs, s_prev, s, rc.dt, f_cur, f_prev)
            s_new = State(s_new.eta, s_new.u, k * rc.dt)
            _check_blowup(s_new, threshold)
        except BlowUpError as err:
            traj.blowup_time = err.t
            if traj.states[-1] is not s:
                traj.states.append(s)
            return traj
        new_rec = diagnostics.make_record(s_new, op, step_coeffs)
        res = diagnostics.dissipation_residual(rec, new_rec, step_coeffs, rc.dt)
        rec = replace(new_rec, dis_residual=res)
        traj.records.append(rec)
        s_prev, s, f_prev = s, s_new, f_cur
        if k % rc.stride == 0 or k == rc.nsteps:
            traj.states.append(s)
    return traj


def _imex_step(op, c, s_prev, s, dt, f_cur, f_prev):
    fac = cn_factor(op, dt)
    rhs = fac.rhs_matrix @ s.stacked()
    if f_cur is not None:
        if s_prev is None:
            rhs = rhs + dt * f_cur
        else:
            rhs = rhs + dt * (1.5 * f_cur - 0.5 * f_prev)
    return State.from_stacked(fac.solve(rhs), s.t + dt)


# ---------------------------------------------------------------- file I/O

def _header_lines(meta: dict | None) -> list:
    return [f"# {k}: {v}" for k, v in (meta or {}).items()]


def write_snapshots_csv(path, states, grid: Grid, meta: dict | None = None) -> None:
    """Write states as CSV rows ``t,x,eta,u`` with ``#`` header comments."""
    x = grid.x
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in _header_lines(meta):
            fh.write(line + "\n")
        fh.write("t,x,eta,u\n")
        for s in states:
            block = np.column_stack([np.full(grid.n, s.t), x, s.eta, s.u])
            np.savetxt(fh, block, delimiter=",", fmt="%.17g")


def read_snapshots_csv(path) -> list:
    """Read states written by :func:`write_snapshots_csv`.

    Returns a list of ``(x, State)`` pairs in file order.
    """
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, **_skip_header_kw(path))
    except ValueError as err:
        raise FileFormatError(f"{path}: {err}") from None
    if data.shape[1] != 4:
        raise FileFormatError(f"{path}: expected 4 columns t,x,eta,u")
    out = []
    t_col = data[:, 0]
    starts = np.flatnonzero(np.r_[True, t_col[1:] != t_col[:-1]])
    ends = np.r_[starts[1:], len(t_col)]
    for a, b in zip(starts, ends):
        blk = data[a:b]
        out.append((blk[:, 1], State(blk[:, 2], blk[:, 3], float(blk[0, 0]))))
    return out


def _skip_header_kw(path):
    with open(path, encoding="utf-8") as fh:
        skip = 0
        for line in fh:
            if line.startswith("#"):
                skip += 1
                continue
            if line.strip().lower().startswith("t,x"):
                skip += 1
            break
    return {"skiprows": skip}


def write_checkpoint(path, s: State, grid: Grid) -> None:
    """Binary checkpoint: magic ``B5KDV1``, u64 N, f64 L, f64 t, then eta and u."""
    if s.n != grid.n:
        raise DomainError("state and grid sizes differ")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Qdd", grid.N, grid.L, s.t))
        fh.write(np.ascontiguousarray(s.stacked(), dtype="<f8").tobytes())


def read_checkpoint(path):
    """Read a checkpoint; returns ``(State, Grid)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    head = len(CHECKPOINT_MAGIC) + struct.calcsize("<Qdd")
    if len(raw) < head or raw[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise FileFormatError(f"{path}: not a B5KDV1 checkpoint")
    N, L, t = struct.unpack("<Qdd", raw[len(CHECKPOINT_MAGIC):head])
    body = raw[head:]
    if len(body) != 8 * 2 * (N + 1):
        raise FileFormatError(f"{path}: expected {2 * (N + 1)} values, found {len(body) // 8}")
    v = np.frombuffer(body, dtype="<f8").astype(float)
    return State.from_stacked(v, t), Grid(L, int(N))


_MODE_TAGS = {Mode.LINEAR: 0, Mode.CONSERVATIVE: 1, Mode.NONLINEAR: 2}


def write_trajectory_binary(path, traj: Trajectory) -> None:
    """Compact trajectory file.

    Layout (little endian): magic ``B5KDVT``, u64 N, f64 L, f64 dt,
    u64 mode tag (0 linear, 1 conservative, 2 nonlinear), u64 snapshot
    count, then per snapshot f64 t followed by ``2(N+1)`` f64 values.
    """
    g, rc = traj.grid, traj.config
    with open(path, "wb") as fh:
        fh.write(TRAJECTORY_MAGIC)
        fh.write(struct.pack("<QddQQ", g.N, g.L, rc.dt, _MODE_TAGS[rc.mode], len(traj.states)))
        for s in traj.states:
            fh.write(struct.pack("<d", s.t))
            fh.write(np.ascontiguousarray(s.stacked(), dtype="<f8").tobytes())


def read_trajectory_binary(path) -> dict:
    """Read a file from :func:`write_trajectory_binary`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    m = len(TRAJECTORY_MAGIC)
    fmt = "<QddQQ"
    head = m + struct.calcsize(fmt)
    if len(raw) < head or raw[:m] != TRAJECTORY_MAGIC:
        raise FileFormatError(f"{path}: not a B5KDVT trajectory")
    N, L, dt, tag, count = struct.unpack(fmt, raw[m:head])
    per = 8 * (1 + 2 * (N + 1))
    if len(raw) - head != per * count:
        raise FileFormatError(f"{path}: truncated trajectory")
    mode = {v: k for k, v in _MODE_TAGS.items()}.get(tag)
    if mode is None:
        raise FileFormatError(f"{path}: unknown mode tag {tag}")
    states = []
    for i in range(count):
        blk = np.frombuffer(raw[head + i * per: head + (i + 1) * per], dtype="<f8")
        states.append(State.from_stacked(blk[1:].astype(float), float(blk[0])))
    return {"grid": Grid(L, int(N)), "dt": dt, "mode": mode, "states": states}
