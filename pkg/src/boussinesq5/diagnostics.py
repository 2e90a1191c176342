"""
Diagnostics
===========

Energy, boundary traces, identity residuals, smoothing and
observability ratios, and exponential decay fits.

With ``E = (1/2)||(eta, u)||^2`` the linear feedback system satisfies

.. math::

   \\frac{dE}{dt} = -b\\left(\\alpha_1\\eta_{xx}(0)^2 + \\alpha_2\\eta_{xx}(L)^2\\right),

so integrating once and twice in time gives

.. math::

   E(T) - E(0) = -b\\int_0^T(\\alpha_1\\eta_{xx}(0)^2 + \\alpha_2\\eta_{xx}(L)^2)\\,dt,

   \\frac T2\\|v_0\\|^2 = \\frac12\\int_0^T\\|v\\|^2dt
       + b\\int_0^T (T-t)(\\alpha_1\\eta_{xx}(0)^2 + \\alpha_2\\eta_{xx}(L)^2)\\,dt.

The nonlinear system adds four flux integrals to the first identity.
All integrals use the trapezoidal rule in ``x`` and ``t``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .discretization import (BcFamily, DiscreteOperator, Grid, extend,
                             node_derivatives, trace_second_derivatives)
from .model import ModelCoefficients

__all__ = [
    "EnergyRecord",
    "DecayFit",
    "ObservabilityFailure",
    "energy",
    "l2_norm",
    "h2_norm_sq",
    "nonlinear_flux",
    "effective_coefficients",
    "make_record",
    "dissipation_residual",
    "integrated_dissipation_residual",
    "relative_energy_drift",
    "kato_ratio",
    "trace_ratio",
    "weighted_identity_residual",
    "fit_decay",
    "fit_decay_arrays",
    "observability_ratio",
    "decay_chain",
    "summary",
    "write_summary_json",
    "write_energy_csv",
    "read_energy_csv",
]


class ObservabilityFailure(ArithmeticError):
    """Boundary traces vanish although the initial data do not."""


@dataclass(frozen=True)
class EnergyRecord:
    """Per-time-level diagnostics.

    ``dis_residual`` refers to the step ending at ``t`` (zero at the
    first level). ``h2_sq`` is the squared discrete H^2 norm of the state.
    """

    t: float
    E: float
    eta_xx_0: float
    eta_xx_L: float
    u_xx_0: float
    u_xx_L: float
    nl_flux: float = 0.0
    dis_residual: float = 0.0
    h2_sq: float = 0.0


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit ``||v(t)|| ~ C0 exp(-mu0 t) ||v0||``."""

    mu0: float
    C0: float
    window: tuple
    r2: float
    samples: int


def _eta_u(s, n=None):
    if hasattr(s, "eta"):
        return np.asarray(s.eta, float), np.asarray(s.u, float)
    v = np.asarray(s, float)
    n = v.shape[0] // 2
    return v[:n], v[n:]


def energy(s, g: Grid) -> float:
    """``(1/2) * trapezoid(eta^2 + u^2)``.

    >>> from boussinesq5.discretization import make_grid
    >>> g = make_grid(1.0, 64)
    >>> energy((np.ones(65), np.zeros(65)), g)
    0.5
    """
    if isinstance(s, tuple):
        eta, u = (np.asarray(a, float) for a in s)
    else:
        eta, u = _eta_u(s)
    w = g.weights
    return 0.5 * float(w @ (eta * eta) + w @ (u * u))


def l2_norm(s, g: Grid) -> float:
    return float(np.sqrt(2.0 * energy(s, g)))


def h2_norm_sq(s, op: DiscreteOperator) -> float:
    """Squared discrete H^2 norm of ``(eta, u)``, closure derivatives included."""
    eta, u = _eta_u(s)
    ex, exx, ux, uxx = node_derivatives(op, s)
    w = op.grid.weights
    total = 0.0
    for f in (eta, ex, exx, u, ux, uxx):
        total += float(w @ (f * f))
    return total


def nonlinear_flux(c: ModelCoefficients, s, op: DiscreteOperator) -> float:
    """Flux integrals of the nonlinear terms in ``dE/dt``.

    ``-(a1/2)int eta^2 u_x - (a2/2)int eta^2 u_xxx + a3 int eta eta_xx u_x
    + (a4/2) int u_x^3``.
    """
    if c.is_linear:
        return 0.0
    eta, u = _eta_u(s)
    g = op.grid
    h = g.h
    _, exx, ux, _ = node_derivatives(op, s)
    _, ue = extend(op, s)
    # centered third difference; the ghost layer covers the end nodes
    uxxx = (-ue[:-4] + 2 * ue[1:-3] - 2 * ue[3:-1] + ue[4:]) / (2 * h ** 3)
    w = g.weights
    return float(-0.5 * c.a1 * (w @ (eta * eta * ux))
                 - 0.5 * c.a2 * (w @ (eta * eta * uxxx))
                 + c.a3 * (w @ (eta * exx * ux))
                 + 0.5 * c.a4 * (w @ (ux ** 3)))


def effective_coefficients(c: ModelCoefficients, op: DiscreteOperator) -> ModelCoefficients:
    """Coefficients whose gains match the operator's boundary family.

    Only the dissipative family carries boundary damping; for the other
    families the gains are set to zero so identity residuals compare
    against the right balance.
    """
    if op.bc is BcFamily.DISSIPATIVE:
        return c
    return c.with_gains(0.0, 0.0)


def make_record(s, op: DiscreteOperator, c: ModelCoefficients) -> EnergyRecord:
    g = op.grid
    e0, eL, u0, uL = trace_second_derivatives(s, g, op)
    return EnergyRecord(
        t=float(getattr(s, "t", 0.0)),
        E=energy(s, g),
        eta_xx_0=float(e0), eta_xx_L=float(eL), u_xx_0=float(u0), u_xx_L=float(uL),
        nl_flux=nonlinear_flux(c, s, op),
        h2_sq=h2_norm_sq(s, op),
    )


def _boundary_rate(c, e0, eL):
    return -c.alpha1 * c.b * e0 * e0 - c.alpha2 * c.b * eL * eL


def dissipation_residual(rec_prev: EnergyRecord, rec: EnergyRecord,
                         c: ModelCoefficients, dt: float) -> float:
    """Per-step defect of the energy balance.

    ``(E_{n+1} - E_n)/dt`` minus the predicted rate at the midpoint. The
    traces are linear in the state, so their average is the exact
    midpoint trace. The nonlinear flux is averaged (trapezoidal rule).
    """
    e0 = 0.5 * (rec_prev.eta_xx_0 + rec.eta_xx_0)
    eL = 0.5 * (rec_prev.eta_xx_L + rec.eta_xx_L)
    rate = _boundary_rate(c, e0, eL) + 0.5 * (rec_prev.nl_flux + rec.nl_flux)
    return (rec.E - rec_prev.E) / dt - rate


def _records(obj):
    return obj.records if hasattr(obj, "records") else list(obj)


def integrated_dissipation_residual(traj, relative: bool = True) -> float:
    """``sum_n |residual_n| dt`` over the run, divided by ``E(0)`` by default."""
    recs = _records(traj)
    if len(recs) < 2:
        return 0.0
    t = np.array([r.t for r in recs])
    res = np.array([r.dis_residual for r in recs[1:]])
    total = float(np.sum(np.abs(res) * np.diff(t)))
    if relative:
        E0 = recs[0].E
        return total / E0 if E0 > 0 else total
    return total


def relative_energy_drift(traj) -> float:
    """``|E(T) - E(0)| / E(0)``."""
    recs = _records(traj)
    E0 = recs[0].E
    if E0 <= 0:
        raise ValueError("zero initial energy")
    return abs(recs[-1].E - E0) / E0


def _norm0_sq(recs):
    E0 = recs[0].E
    if not E0 > 0:
        raise ValueError("zero initial data")
    return 2.0 * E0


def kato_ratio(traj) -> float:
    """``||v||_{L^2(0,T; H^2)} / ||v_0||_{L^2}``."""
    recs = _records(traj)
    n0 = _norm0_sq(recs)
    t = np.array([r.t for r in recs])
    h2 = np.array([r.h2_sq for r in recs])
    return float(np.sqrt(np.trapezoid(h2, t) / n0))


def trace_ratio(traj) -> float:
    """``int_0^T (eta_xx(L)^2 + u_xx(0)^2) dt / ||v_0||_{H^2}^2``.

    The two traces are the ones left free by the conservative family.
    """
    recs = _records(traj)
    _norm0_sq(recs)
    h20 = recs[0].h2_sq
    t = np.array([r.t for r in recs])
    f = np.array([r.eta_xx_L ** 2 + r.u_xx_0 ** 2 for r in recs])
    return float(np.trapezoid(f, t) / h20)


def weighted_identity_residual(traj, c: ModelCoefficients | None = None,
                               T: float | None = None) -> float:
    """Relative defect of the time-weighted energy identity.

    Returns ``|(T/2)|v0|^2 - (1/2) int |v|^2 - b int (T - t) D(t)| /
    ((T/2)|v0|^2)`` with ``D = alpha1 eta_xx(0)^2 + alpha2 eta_xx(L)^2``,
    integrated over ``[0, T]`` by the trapezoidal rule. ``c`` defaults to
    the trajectory's coefficients with gains matched to its operator.
    """
    recs = _records(traj)
    if c is None:
        c = effective_coefficients(traj.coeffs, traj.op)
    t = np.array([r.t for r in recs])
    if T is None:
        T = t[-1]
    keep = t <= T * (1 + 1e-12)
    t = t[keep]
    rs = [r for r, k in zip(recs, keep) if k]
    if recs[0].E == 0.0:
        return 0.0
    nsq = np.array([2.0 * r.E for r in rs])
    D = np.array([c.alpha1 * r.eta_xx_0 ** 2 + c.alpha2 * r.eta_xx_L ** 2 for r in rs])
    lhs = 0.5 * T * nsq[0]
    rhs = 0.5 * np.trapezoid(nsq, t) + c.b * np.trapezoid((T - t) * D, t)
    return float(abs(lhs - rhs) / lhs)


def fit_decay_arrays(t, E, window=None, norm0_sq: float | None = None) -> DecayFit:
    """Fit ``log E`` against ``t`` on a window.

    Parameters
    ----------
    t, E : array_like
        Sample times and energies.
    window : (float, float), optional
        Defaults to the last 60% of the time span.
    norm0_sq : float, optional
        ``||v0||^2``; defaults to ``2 E[0]``.

    Returns
    -------
    DecayFit
        ``mu0 = -slope/2`` is the rate for the norm. ``C0`` is scaled so
        that ``||v(t)|| ~ C0 exp(-mu0 t) ||v0||``.

    Examples
    --------
    >>> t = np.linspace(0, 2, 50)
    >>> round(fit_decay_arrays(t, np.exp(-3 * t)).mu0, 12)
    1.5
    """
    t = np.asarray(t, float)
    E = np.asarray(E, float)
    if window is None:
        window = (t[0] + 0.4 * (t[-1] - t[0]), t[-1])
    lo, hi = window
    if lo < t[0] - 1e-12 or hi > t[-1] + 1e-12 or hi <= lo:
        raise ValueError(f"window {window} outside the data span [{t[0]}, {t[-1]}]")
    m = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if m.sum() < 10:
        raise ValueError(f"window holds {int(m.sum())} samples, need at least 10")
    if np.any(E[m] <= 0):
        raise ValueError("non-positive energy inside the fit window")
    y = np.log(E[m])
    x = t[m]
    if np.ptp(y) == 0.0:
        slope, intercept = 0.0, float(y[0])
    else:
        slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if ss_tot <= 1e-300 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    if norm0_sq is None:
        norm0_sq = 2.0 * E[0]
    C0 = float(np.sqrt(2.0 * np.exp(intercept) / norm0_sq)) if norm0_sq > 0 else np.nan
    return DecayFit(float(-0.5 * slope), C0, (float(lo), float(hi)), r2, int(m.sum()))


def fit_decay(records, window=None) -> DecayFit:
    """:func:`fit_decay_arrays` applied to energy records or a trajectory."""
    recs = _records(records)
    t = np.array([r.t for r in recs])
    E = np.array([r.E for r in recs])
    return fit_decay_arrays(t, E, window, 2.0 * E[0])


def observability_ratio(traj, T: float | None = None) -> float:
    """``||v0||^2 / int_0^T (eta_xx(0)^2 + eta_xx(L)^2) dt``.

    Raises
    ------
    ObservabilityFailure
        If the denominator is below ``1e-12`` times the numerator, which
        would mean a nonzero solution invisible at the boundary.
    """
    recs = _records(traj)
    num = _norm0_sq(recs)
    t = np.array([r.t for r in recs])
    if T is None:
        T = t[-1]
    keep = t <= T * (1 + 1e-12)
    f = np.array([r.eta_xx_0 ** 2 + r.eta_xx_L ** 2 for r in recs])[keep]
    den = float(np.trapezoid(f, t[keep]))
    if not den > 1e-12 * num:
        raise ObservabilityFailure(
            f"boundary traces carry {den:.3e} against initial norm {num:.3e}")
    return num / den


def decay_chain(traj, c: ModelCoefficients | None = None, T: float | None = None) -> dict:
    """Check ``E(T) <= C/(C+1) E(0)`` with a measured constant ``C``.

    From ``E(0) - E(T) = b int (alpha1 eta_xx(0)^2 + alpha2 eta_xx(L)^2)``
    and the measured ratio ``R = ||v0||^2 / int (eta_xx(0)^2 + eta_xx(L)^2)``
    one gets ``E(0) <= C (E(0) - E(T))`` with
    ``C = R / (2 b min(alpha1, alpha2))``, and then
    ``E(T) <= (C - 1)/C E(0) <= C/(C+1) E(0)``.
    """
    recs = _records(traj)
    if c is None:
        c = traj.coeffs
    t = np.array([r.t for r in recs])
    if T is None:
        T = t[-1]
    R = observability_ratio(recs, T)
    gain = min(c.alpha1, c.alpha2)
    if not gain > 0:
        raise ValueError("decay chain needs positive gains")
    C = R / (2.0 * c.b * gain)
    iT = int(np.searchsorted(t, T - 1e-12 * max(T, 1.0)))
    iT = min(iT, len(recs) - 1)
    E0, ET = recs[0].E, recs[iT].E
    bound = C / (C + 1.0) * E0
    return {"observability_ratio": R, "C": C, "E0": E0, "ET": ET,
            "bound": bound, "holds": bool(ET <= bound)}


def summary(traj, window=None) -> dict:
    """Scalar run summary for JSON output."""
    recs = _records(traj)
    out = {"t_final": recs[-1].t, "E0": recs[0].E, "E_final": recs[-1].E,
           "max_dis_residual": float(max((abs(r.dis_residual) for r in recs), default=0.0)),
           "integrated_dis_residual": integrated_dissipation_residual(recs),
           "blowup_time": getattr(traj, "blowup_time", None)}
    for name, fn in (("kato_ratio", kato_ratio), ("trace_ratio", trace_ratio),
                     ("observability_ratio", observability_ratio)):
        try:
            out[name] = fn(recs)
        except (ValueError, ObservabilityFailure, ArithmeticError) as err:
            out[name] = None
            out[name + "_error"] = str(err)
    try:
        fit = fit_decay(recs, window)
        out.update(mu0=fit.mu0, C0=fit.C0, r2=fit.r2, fit_window=list(fit.window))
    except ValueError as err:
        out.update(mu0=None, C0=None, r2=None, fit_error=str(err))
    return out


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return x


def write_summary_json(path, data: dict, provenance: dict | None = None) -> None:
    doc = {"provenance": provenance or {}, **data}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_energy_csv(path, traj, provenance: dict | None = None) -> None:
    """CSV time series ``t,E,eta_xx_0,eta_xx_L,dis_residual``."""
    recs = _records(traj)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for k, v in (provenance or {}).items():
            fh.write(f"# {k}: {v}\n")
        fh.write("t,E,eta_xx_0,eta_xx_L,dis_residual\n")
        for r in recs:
            fh.write(f"{r.t!r},{r.E!r},{r.eta_xx_0!r},{r.eta_xx_L!r},{r.dis_residual!r}\n")


def read_energy_csv(path) -> list:
    """Read a series written by :func:`write_energy_csv` into records."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = [h.strip() for h in line.split(",")]
                continue
            rows.append(dict(zip(header, (float(v) for v in line.split(",")))))
    if header is None or not {"t", "E"} <= set(header):
        raise ValueError(f"{path}: missing t,E columns")
    return [EnergyRecord(t=r["t"], E=r["E"], eta_xx_0=r.get("eta_xx_0", 0.0),
                         eta_xx_L=r.get("eta_xx_L", 0.0), u_xx_0=0.0, u_xx_L=0.0,
                         dis_residual=r.get("dis_residual", 0.0)) for r in rows]


def record_dict(r: EnergyRecord) -> dict:
    return asdict(r)
