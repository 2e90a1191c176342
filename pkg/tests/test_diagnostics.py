import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boussinesq5 import diagnostics as dg
from boussinesq5.discretization import assemble_operator, make_grid
from boussinesq5.model import ModelCoefficients
from boussinesq5.timestepper import RunConfig, State, run

from conftest import bump_state


@pytest.fixture(scope="module")
def dis_run():
    from boussinesq5.model import PhysicalParameters, derive_coefficients
    c = derive_coefficients(PhysicalParameters.canonical())
    g = make_grid(1.0, 64)
    op = assemble_operator(c, g, "dissipative")
    return c, g, op, run(op, c, bump_state(g), RunConfig(1e-4, 0.1, "linear", stride=100))


def test_energy_examples():
    g = make_grid(1.0, 64)
    assert dg.energy(State.zeros(g), g) == 0.0
    assert dg.energy((np.ones(g.n), np.zeros(g.n)), g) == pytest.approx(0.5, abs=1e-14)
    g = make_grid(1.0, 256)
    x = g.x
    E = dg.energy((np.sin(2 * np.pi * x), np.cos(2 * np.pi * x)), g)
    assert abs(E - 0.5) < 1e-4


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 10 ** 6))
def test_energy_is_quadratic(k, seed):
    g = make_grid(1.0, 32)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2 * g.n)
    assert dg.energy(k * v, g) == pytest.approx(k * k * dg.energy(v, g), rel=1e-12)


def test_zero_trajectory_residuals(canon):
    g = make_grid(1.0, 64)
    op = assemble_operator(canon, g, "dissipative")
    traj = run(op, canon, State.zeros(g), RunConfig(1e-3, 0.01))
    assert all(r.dis_residual == 0.0 for r in traj.records)
    assert dg.integrated_dissipation_residual(traj) == 0.0
    assert dg.weighted_identity_residual(traj) == 0.0


def test_conservative_residual_is_energy_increment(canon):
    g = make_grid(1.0, 64)
    c = canon.linearized()
    op = assemble_operator(c, g, "conservative")
    traj = run(op, c, bump_state(g), RunConfig(1e-3, 0.02, "conservative"))
    recs = traj.records
    for r0, r1 in zip(recs[:-1], recs[1:]):
        assert r1.dis_residual == pytest.approx((r1.E - r0.E) / 1e-3, rel=1e-9, abs=1e-14)


def test_dissipation_residual_small_when_resolved(dis_run):
    _, _, _, traj = dis_run
    assert dg.integrated_dissipation_residual(traj) < 1e-2


def test_weighted_identity_conservative_special_case(canon):
    c = canon.linearized()
    res = []
    for N, dt in ((64, 2e-4), (128, 1e-4)):
        g = make_grid(1.0, N)
        op = assemble_operator(c, g, "conservative")
        traj = run(op, c, bump_state(g, width=0.15), RunConfig(dt, 0.05, "conservative"))
        res.append(dg.weighted_identity_residual(traj))
    assert res[1] < 0.5 * res[0]


def test_ratios_scale_invariant(dis_run):
    c, g, op, traj = dis_run
    s0 = traj.initial
    t2 = run(op, c, s0.scaled(2.0), RunConfig(1e-4, 0.1, "linear", stride=100))
    for fn in (dg.kato_ratio, dg.trace_ratio, dg.observability_ratio):
        assert fn(t2) == pytest.approx(fn(traj), rel=1e-10)


def test_ratios_reject_zero_data(canon):
    g = make_grid(1.0, 64)
    op = assemble_operator(canon, g, "dissipative")
    traj = run(op, canon, State.zeros(g), RunConfig(1e-3, 0.01))
    for fn in (dg.kato_ratio, dg.trace_ratio, dg.observability_ratio):
        with pytest.raises(ValueError):
            fn(traj)


def test_fit_decay_exact_exponential():
    t = np.linspace(0.0, 3.0, 301)
    fit = dg.fit_decay_arrays(t, np.exp(-3.0 * t))
    assert abs(fit.mu0 - 1.5) < 1e-10
    assert fit.r2 == pytest.approx(1.0)
    assert fit.C0 == pytest.approx(1.0, rel=1e-9)
    assert dg.fit_decay_arrays(t, np.full_like(t, 0.7)).mu0 == 0.0


def test_fit_decay_window_errors():
    t = np.linspace(0.0, 1.0, 11)
    with pytest.raises(ValueError):
        dg.fit_decay_arrays(t, np.exp(-t), window=(0.0, 2.0))
    with pytest.raises(ValueError):
        dg.fit_decay_arrays(t, np.exp(-t), window=(0.5, 1.0))
    E = np.exp(-t)
    E[-1] = 0.0
    with pytest.raises(ValueError):
        dg.fit_decay_arrays(t, E)


def test_decay_chain_holds(dis_run):
    c, g, op, _ = dis_run
    traj = run(op, c, bump_state(g), RunConfig(1e-4, 0.5, "linear", stride=1000))
    chain = dg.decay_chain(traj)
    assert chain["holds"] and chain["C"] > 0
    assert chain["ET"] <= chain["bound"]


def test_effective_coefficients(canon):
    g = make_grid(1.0, 64)
    cons = assemble_operator(canon, g, "conservative")
    dis = assemble_operator(canon, g, "dissipative")
    assert dg.effective_coefficients(canon, cons).alpha1 == 0.0
    assert dg.effective_coefficients(canon, dis) is canon


def test_energy_csv_roundtrip(tmp_path, dis_run):
    _, _, _, traj = dis_run
    path = tmp_path / "energy.csv"
    dg.write_energy_csv(path, traj, {"command": "x"})
    recs = dg.read_energy_csv(path)
    assert [r.t for r in recs] == [r.t for r in traj.records]
    assert [r.E for r in recs] == [r.E for r in traj.records]
    fit_a, fit_b = dg.fit_decay(recs), dg.fit_decay(traj)
    assert fit_a.mu0 == fit_b.mu0


def test_summary_json(tmp_path, dis_run):
    import json
    _, _, _, traj = dis_run
    doc = dg.summary(traj)
    assert doc["mu0"] > 0 and doc["blowup_time"] is None
    path = tmp_path / "s.json"
    dg.write_summary_json(path, doc, {"version": "v"})
    back = json.loads(path.read_text())
    assert back["provenance"]["version"] == "v" and back["E0"] == doc["E0"]


def test_nonlinear_flux_vanishes_for_linear(dis_run):
    c, g, op, traj = dis_run
    assert dg.nonlinear_flux(c.linearized(), traj.initial, op) == 0.0
    f = dg.nonlinear_flux(c, traj.initial, op)
    assert np.isfinite(f)
    assert dg.nonlinear_flux(c, traj.initial.scaled(2.0), op) == pytest.approx(8.0 * f)
