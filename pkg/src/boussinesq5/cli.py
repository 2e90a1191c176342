"""
Command-line driver
===================

``python -m boussinesq5 <command> [options]`` with the commands
``derive-coeffs``, ``simulate``, ``decay-fit``, ``identities``,
``spectrum``, ``qroots``, ``mobius-scan`` and ``convergence``.

Every command accepts ``--config PATH`` (flat ``key=value`` file, flags
win), ``--out PATH`` (output directory), ``--jobs K`` and ``--seed S``.
JSON and CSV outputs carry a provenance block with the command line,
the package version and the parameters. Exit status is 0 on success,
1 on invalid input and 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from . import diagnostics as dg
from .discretization import (BcFamily, DomainError, Grid, SingularClosureError,
                             assemble_operator, make_grid)
from .model import (CONFIG_KEYS, ConfigError, ConstraintViolation, PhysicalParameters,
                    appendix_identity_residual, coefficients_from_mapping,
                    derive_coefficients, read_config, validate_coefficients)
from .spectral import (DegenerateConfiguration, NonConvergence, PreconditionError,
                       QPolynomial, classify_claim, discrete_spectrum, mismatch_scan,
                       q_roots, relative_real_defect, spectral_abscissa)
from .timestepper import (BlowUpError, FileFormatError, Mode, RunConfig, State,
                          read_checkpoint, read_snapshots_csv, run,
                          write_checkpoint, write_snapshots_csv,
                          write_trajectory_binary)

__all__ = ["IC_KINDS", "initial_condition", "build_parser", "parse_and_dispatch", "main"]

IC_KINDS = ("random", "gaussian-bump", "sine-packet", "file")
VERSION = f"boussinesq5 {__version__}"


# ---------------------------------------------------------------- initial data

def _window(g: Grid) -> np.ndarray:
    """``(4 s (1 - s))^3``: equals 1 at the centre, flat to second order at the ends."""
    s = g.x / g.L
    return (4.0 * s * (1.0 - s)) ** 3


def initial_condition(kind: str, seed: int | None = None, grid: Grid | None = None,
                      bc=BcFamily.DISSIPATIVE, path=None, amplitude: float = 1.0) -> State:
    """Initial data compatible with every boundary family.

    Parameters
    ----------
    kind : {'random', 'gaussian-bump', 'sine-packet', 'file'}
        ``gaussian-bump``: ``eta`` a Gaussian of width ``L/10`` centred at
        ``L/2``, ``u = 0``. ``sine-packet``: four-wavelength sine under a
        Gaussian envelope in ``eta``, ``u = 0``. ``random``: in each field
        a sum of three Gaussians with seeded normal amplitudes, centres
        in ``[0.35 L, 0.65 L]`` and widths in ``[0.07 L, 0.1 L]``. The
        draw does not depend on ``N``, so every grid samples the same
        function. ``file``: CSV snapshot (first block) or ``B5KDV1``
        checkpoint.
    seed : int
        Required for ``random``.
    grid : Grid
    bc : BcFamily
        The window below makes the data compatible with all families; the
        argument is kept for validation of file input.
    amplitude : float
        Scale factor applied after construction (not to file data).

    Returns
    -------
    State
        Smooth data multiplied by ``(4 s (1 - s))^3`` so values, slopes and
        second derivatives vanish at both ends, with the boundary nodes
        then set exactly to zero.
    """
    if kind not in IC_KINDS:
        raise ValueError(f"unknown initial condition kind {kind!r}; choose from {IC_KINDS}")
    BcFamily.parse(bc)
    if kind == "file":
        if path is None:
            raise ValueError("file initial condition needs a path")
        s = _read_state_file(path, grid)
        return _project(s)
    if grid is None:
        raise ValueError("grid is required")
    x, L = grid.x, grid.L
    w = _window(grid)
    if kind == "gaussian-bump":
        eta = np.exp(-((x - 0.5 * L) / (0.1 * L)) ** 2) * w
        u = np.zeros_like(x)
    elif kind == "sine-packet":
        eta = np.sin(8.0 * np.pi * x / L) * np.exp(-((x - 0.5 * L) / (L / 6.0)) ** 2) * w
        u = np.zeros_like(x)
    else:
        if seed is None:
            raise ValueError("random initial condition needs a seed")
        rng = np.random.default_rng(seed)
        fields = []
        for _ in range(2):
            f = np.zeros_like(x)
            for _ in range(3):
                x0 = rng.uniform(0.35, 0.65) * L
                width = rng.uniform(0.07, 0.1) * L
                f += rng.standard_normal() * np.exp(-((x - x0) / width) ** 2)
            fields.append(f * w)
        eta, u = fields
    return _project(State(amplitude * eta, amplitude * u, 0.0))


def _project(s: State) -> State:
    eta, u = s.eta.copy(), s.u.copy()
    eta[[0, -1]] = 0.0
    u[[0, -1]] = 0.0
    return State(eta, u, s.t)


def _read_state_file(path, grid: Grid | None) -> State:
    with open(path, "rb") as fh:
        head = fh.read(6)
    if head == b"B5KDV1":
        s, g = read_checkpoint(path)
    else:
        blocks = read_snapshots_csv(path)
        if not blocks:
            raise FileFormatError(f"{path}: no data rows")
        x, s = blocks[0]
        g = Grid(float(x[-1]), len(x) - 1) if len(x) > 1 else None
    if grid is not None and g is not None:
        if g.N != grid.N or not np.isclose(g.L, grid.L, rtol=1e-12, atol=0):
            raise FileFormatError(f"{path}: grid (L={g.L}, N={g.N}) does not match "
                                  f"(L={grid.L}, N={grid.N})")
    return State(s.eta, s.u, 0.0)


# ---------------------------------------------------------------- parser

class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p):
    p.add_argument("--config", metavar="PATH", help="key=value parameter file")
    p.add_argument("--out", metavar="PATH", default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=1, metavar="K", help="worker processes")
    p.add_argument("--seed", type=int, default=0, metavar="S", help="random seed")


def _model_flags(p):
    g = p.add_argument_group("model parameters")
    for key in CONFIG_KEYS:
        flag = "--" + key.replace("_", "-")
        g.add_argument(flag, dest=key, type=float, default=None)


def _grid_flags(p, N=128):
    p.add_argument("--N", type=int, default=N)
    p.add_argument("--bc", default="dissipative",
                   choices=[b.value for b in BcFamily])


def _run_flags(p):
    p.add_argument("--mode", default="linear", choices=[m.value for m in Mode])
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--ic", default="gaussian-bump", choices=IC_KINDS)
    p.add_argument("--ic-file", default=None)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--smallness", type=float, default=None)
    p.add_argument("--blowup", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="python -m boussinesq5", description=__doc__.split("\n")[1])
    parser.add_argument("--version", action="version", version=VERSION)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("derive-coeffs", help="coefficients from (alpha, beta, theta, tau)")
    _common(p)
    _model_flags(p)

    p = sub.add_parser("simulate", help="time integration with energy diagnostics")
    _common(p)
    _model_flags(p)
    _grid_flags(p)
    _run_flags(p)
    p.add_argument("--snapshots", default="none", choices=("none", "csv", "binary"))
    p.add_argument("--checkpoint", action="store_true", help="write the final state")

    p = sub.add_parser("decay-fit", help="exponential fit of an energy CSV")
    _common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--window", type=float, nargs=2, default=None, metavar=("T0", "T1"))

    p = sub.add_parser("identities", help="energy identity residuals and ratios")
    _common(p)
    _model_flags(p)
    _grid_flags(p)
    _run_flags(p)

    p = sub.add_parser("spectrum", help="eigenvalues of the discrete operator")
    _common(p)
    _model_flags(p)
    _grid_flags(p)

    p = sub.add_parser("qroots", help="roots of b xi^5 + a xi^3 + xi + r")
    _common(p)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--r", type=float, default=0.0)

    p = sub.add_parser("mobius-scan", help="cross-ratio mismatch against L")
    _common(p)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--samples", type=int, default=1, help="random (a, b, r) samples")
    p.add_argument("--L-min", dest="L_min", type=float, default=0.01)
    p.add_argument("--L-max", dest="L_max", type=float, default=100.0)
    p.add_argument("--count", type=int, default=10000)

    p = sub.add_parser("convergence", help="refinement study over N")
    _common(p)
    _model_flags(p)
    p.add_argument("--bc", default="dissipative", choices=[b.value for b in BcFamily])
    p.add_argument("--Ns", default="64,128,256")
    p.add_argument("--mode", default="linear", choices=[m.value for m in Mode])
    p.add_argument("--dt", type=float, default=1e-3, help="time step at the coarsest N")
    p.add_argument("--dt-scaling", default="h", choices=("h", "fixed"))
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--ic", default="gaussian-bump", choices=IC_KINDS)
    return parser


# ---------------------------------------------------------------- helpers

def _provenance(argv, params) -> dict:
    return {"command": " ".join(["boussinesq5"] + list(argv)), "version": VERSION,
            "parameters": params}


def _coeffs(args):
    m = read_config(args.config) if getattr(args, "config", None) else {}
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            m[key] = v
    return coefficients_from_mapping(m), m


def _outdir(args):
    if args.out is None:
        return None
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _emit(args, name, doc, prov):
    out = _outdir(args)
    if out is not None:
        dg.write_summary_json(os.path.join(out, name), doc, prov)
    return doc


def _print_json(doc):
    print(json.dumps(dg._jsonable(doc), indent=2, sort_keys=True))


def _setup_run(args):
    c, _ = _coeffs(args)
    g = make_grid(c.L, args.N)
    op = assemble_operator(c, g, args.bc)
    s0 = initial_condition(args.ic, args.seed, g, args.bc, args.ic_file, args.amplitude)
    rc = RunConfig(args.dt, args.T, args.mode, args.smallness, args.blowup, args.stride)
    return c, g, op, s0, rc


# ---------------------------------------------------------------- commands

def cmd_derive(args, argv):
    c, m = _coeffs(args)
    rep = validate_coefficients(c)
    p = PhysicalParameters(m.get("alpha", 1.0), m.get("beta", 1.0),
                           m.get("theta_sq", PhysicalParameters.canonical().theta_sq),
                           m.get("tau"))
    doc = {"coefficients": c.as_dict(),
           "checks": {ch.name: ch.passed for ch in rep.checks},
           "flags": list(rep.flags),
           "identity_residual": appendix_identity_residual(p.theta_sq, p.tau)}
    prov = _provenance(argv, m)
    _emit(args, "coefficients.json", doc, prov)
    _print_json({"provenance": prov, **doc})
    return 0


def cmd_simulate(args, argv):
    c, g, op, s0, rc = _setup_run(args)
    traj = run(op, c, s0, rc)
    prov = _provenance(argv, {**c.as_dict(), "N": g.N, "bc": op.bc.value, "mode": rc.mode.value,
                              "dt": rc.dt, "T": rc.T, "ic": args.ic, "seed": args.seed})
    doc = dg.summary(traj)
    doc["warnings"] = traj.warnings
    out = _outdir(args)
    if out is not None:
        dg.write_energy_csv(os.path.join(out, "energy.csv"), traj, prov)
        dg.write_summary_json(os.path.join(out, "summary.json"), doc, prov)
        if args.snapshots == "csv":
            write_snapshots_csv(os.path.join(out, "snapshots.csv"), traj.states, g, prov)
        elif args.snapshots == "binary":
            write_trajectory_binary(os.path.join(out, "snapshots.b5t"), traj)
        if args.checkpoint:
            write_checkpoint(os.path.join(out, "final.b5kdv"), traj.final, g)
    print(f"simulate: N={g.N} bc={op.bc.value} mode={rc.mode.value} "
          f"E0={doc['E0']:.6e} E(T)={doc['E_final']:.6e} mu0={doc.get('mu0')}")
    if traj.blowup_time is not None:
        print(f"blow-up detected at t={traj.blowup_time:.6g}", file=sys.stderr)
        return 2
    return 0


def cmd_decay_fit(args, argv):
    recs = dg.read_energy_csv(args.input)
    fit = dg.fit_decay(recs, tuple(args.window) if args.window else None)
    doc = {"mu0": fit.mu0, "C0": fit.C0, "r2": fit.r2, "window": list(fit.window),
           "samples": fit.samples}
    prov = _provenance(argv, {"input": args.input})
    _emit(args, "decay_fit.json", doc, prov)
    _print_json(doc)
    return 0


def cmd_identities(args, argv):
    c, g, op, s0, rc = _setup_run(args)
    traj = run(op, c, s0, rc)
    doc = {"integrated_dis_residual": dg.integrated_dissipation_residual(traj),
           "weighted_identity_residual": dg.weighted_identity_residual(traj),
           "relative_energy_drift": dg.relative_energy_drift(traj),
           "kato_ratio": dg.kato_ratio(traj), "trace_ratio": dg.trace_ratio(traj)}
    if op.bc is BcFamily.DISSIPATIVE:
        doc["observability_ratio"] = dg.observability_ratio(traj)
        if min(c.alpha1, c.alpha2) > 0:
            doc["decay_chain"] = dg.decay_chain(traj)
    prov = _provenance(argv, {**c.as_dict(), "N": g.N, "bc": op.bc.value,
                              "dt": rc.dt, "T": rc.T, "ic": args.ic, "seed": args.seed})
    _emit(args, "identities.json", doc, prov)
    _print_json(doc)
    return 0


def cmd_spectrum(args, argv):
    c, _ = _coeffs(args)
    g = make_grid(c.L, args.N)
    op = assemble_operator(c, g, args.bc)
    ev = discrete_spectrum(op)
    ev = ev[np.lexsort((ev.real, ev.imag))]
    doc = {"spectral_abscissa": spectral_abscissa(ev),
           "relative_real_defect": relative_real_defect(ev),
           "eigenvalues": [[float(z.real), float(z.imag)] for z in ev]}
    prov = _provenance(argv, {**c.as_dict(), "N": g.N, "bc": op.bc.value})
    _emit(args, "spectrum.json", doc, prov)
    print(f"spectrum: N={g.N} bc={op.bc.value} abscissa={doc['spectral_abscissa']:.6e} "
          f"relative real defect={doc['relative_real_defect']:.3e}")
    return 0


def _roots_doc(p):
    rs = q_roots(p)
    return {"a": p.a, "b": p.b, "r": p.r,
            "roots": [[float(z.real), float(z.imag)] for z in rs.roots],
            "real_roots": list(rs.real_roots),
            "conjugate_pairs": [[[z.real, z.imag], [w.real, w.imag]] for z, w in rs.conjugate_pairs],
            "claim_holds": classify_claim(p)}


def cmd_qroots(args, argv):
    doc = _roots_doc(QPolynomial(args.a, args.b, args.r))
    prov = _provenance(argv, {"a": args.a, "b": args.b, "r": args.r})
    _emit(args, "qroots.json", doc, prov)
    _print_json(doc)
    return 0


def _scan_job(job):
    a, b, r, Ls = job
    rs = q_roots(QPolynomial(a, b, r))
    if len(rs.conjugate_pairs) != 2:
        return {"a": a, "b": b, "r": r, "skipped": "fewer than four non-real roots"}
    m = mismatch_scan(rs.nonreal, Ls)
    k = int(np.nanargmin(m))
    return {"a": a, "b": b, "r": r, "min_mismatch": float(m[k]), "L_at_min": float(Ls[k]),
            "mismatch": m}


def _pool_map(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs))


def sample_admissible(rng, count):
    """Draw ``(a, b, r)`` with ``b in (0, 2]``, ``|a| < sqrt(4b)``, ``r in [-10, 10]``."""
    out = []
    for _ in range(count):
        b = 2.0 * (1.0 - rng.random())
        a = (2.0 * rng.random() - 1.0) * np.sqrt(4.0 * b)
        r = 20.0 * rng.random() - 10.0
        out.append((float(a), float(b), float(r)))
    return out


def cmd_mobius_scan(args, argv):
    Ls = np.geomspace(args.L_min, args.L_max, args.count)
    if args.a is not None and args.b is not None:
        params = [(args.a, args.b, args.r or 0.0)]
    else:
        params = sample_admissible(np.random.default_rng(args.seed), args.samples)
    results = _pool_map(_scan_job, [(a, b, r, Ls) for a, b, r in params], args.jobs)
    prov = _provenance(argv, {"L_min": args.L_min, "L_max": args.L_max, "count": args.count,
                              "seed": args.seed})
    mins = [res["min_mismatch"] for res in results if "min_mismatch" in res]
    doc = {"samples": [{k: v for k, v in res.items() if k != "mismatch"} for res in results],
           "overall_min_mismatch": min(mins) if mins else None}
    out = _outdir(args)
    if out is not None:
        with open(os.path.join(out, "mobius_scan.csv"), "w", encoding="utf-8") as fh:
            for k, v in prov.items():
                fh.write(f"# {k}: {v}\n")
            fh.write("sample,L,mismatch\n")
            for i, res in enumerate(results):
                if "mismatch" in res:
                    for L, mm in zip(Ls, res["mismatch"]):
                        fh.write(f"{i},{L!r},{mm!r}\n")
        dg.write_summary_json(os.path.join(out, "mobius_scan.json"), doc, prov)
    print(f"mobius-scan: {len(results)} sample(s), minimum mismatch {doc['overall_min_mismatch']}")
    return 0


def _convergence_job(job):
    cdict, N, bc, mode, dt, T, ic, seed = job
    from .model import ModelCoefficients
    c = ModelCoefficients(**cdict)
    g = make_grid(c.L, N)
    op = assemble_operator(c, g, bc)
    s0 = initial_condition(ic, seed, g, bc)
    traj = run(op, c, s0, RunConfig(dt, T, mode, stride=max(1, int(round(T / dt)))))
    row = {"N": N, "dt": dt, "relative_energy_drift": dg.relative_energy_drift(traj),
           "integrated_dis_residual": dg.integrated_dissipation_residual(traj),
           "weighted_identity_residual": dg.weighted_identity_residual(traj),
           "kato_ratio": dg.kato_ratio(traj), "trace_ratio": dg.trace_ratio(traj)}
    return row


def cmd_convergence(args, argv):
    c, _ = _coeffs(args)
    try:
        Ns = [int(v) for v in args.Ns.split(",")]
    except ValueError:
        raise UsageError(f"bad --Ns value {args.Ns!r}") from None
    N0 = Ns[0]
    jobs = []
    for N in Ns:
        dt = args.dt * (N0 / N if args.dt_scaling == "h" else 1.0)
        jobs.append((c.as_dict(), N, args.bc, args.mode, dt, args.T, args.ic, args.seed))
    rows = _pool_map(_convergence_job, jobs, args.jobs)
    orders = {}
    for key in ("relative_energy_drift", "integrated_dis_residual", "weighted_identity_residual"):
        vals = [r[key] for r in rows]
        orders[key] = [float(np.log2(v0 / v1)) if v0 > 0 and v1 > 0 else None
                       for v0, v1 in zip(vals[:-1], vals[1:])]
    doc = {"rows": rows, "observed_orders": orders}
    prov = _provenance(argv, {**c.as_dict(), "bc": args.bc, "mode": args.mode, "Ns": Ns,
                              "T": args.T, "ic": args.ic, "seed": args.seed})
    _emit(args, "convergence.json", doc, prov)
    _print_json(doc)
    return 0


_COMMANDS = {
    "derive-coeffs": cmd_derive,
    "simulate": cmd_simulate,
    "decay-fit": cmd_decay_fit,
    "identities": cmd_identities,
    "spectrum": cmd_spectrum,
    "qroots": cmd_qroots,
    "mobius-scan": cmd_mobius_scan,
    "convergence": cmd_convergence,
}

_VALIDATION = (UsageError, ConfigError, ConstraintViolation, PreconditionError,
               DomainError, FileFormatError, FileNotFoundError, ValueError)
_RUNTIME = (BlowUpError, np.linalg.LinAlgError, NonConvergence, dg.ObservabilityFailure,
            SingularClosureError, DegenerateConfiguration, ArithmeticError)


def parse_and_dispatch(argv=None) -> int:
    """Run one command; returns the exit status (0, 1 or 2)."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        return _COMMANDS[args.command](args, argv)
    except _RUNTIME as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except _VALIDATION as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def main(argv=None) -> None:
    sys.exit(parse_and_dispatch(argv))


if __name__ == "__main__":
    main()
