"""Energy ledgers, regularity monitors, and the resonance probe."""

import json
import math

import numpy as np
import pytest

from periflow.diagnostics import (
    BodyPressureBump,
    admissible_delta,
    check_energy_identity,
    check_partial_bound,
    check_particular_energy,
    diagnostics_bundle,
    energy_E,
    energy_G,
    energy_report,
    far_field_decay,
    resonance_probe,
    smallness_report,
    stokes_rhs_norm,
    strong_regularity_monitor,
)
from periflow.errors import PeriflowError
from periflow.periodic_ode import PeriodicTrajectory, zero_trajectory
from periflow.solver import FixedPointConfig
from periflow.signals import sine_signal, sobolev_norm_T


class _StubBasis:
    """Minimal basis stand-in: unit first mode, unit coupling."""

    beta = np.array([1.0])

    def l2_inner(self, i, k):
        return 1.0


def _toy_trajectory():
    states = np.array([[2.0, 1.0], [0.0, -1.0], [2.0, 1.0]])
    derivs = np.array([[0.0, 3.0], [0.0, 0.5], [0.0, 3.0]])
    return PeriodicTrajectory(
        period=1.0, n_fluid=1, states=states, derivs=derivs, periodicity_defect=0.0
    )


def test_energy_formula_closed_form(params):
    traj = _toy_trajectory()
    E = energy_E(traj, params)
    # E = (rho a^2 + m zdot^2 + k z^2) / 2 with unit parameters
    assert np.allclose(E, 0.5 * np.array([4.0 + 9.0 + 1.0, 0.25 + 1.0, 14.0]))


def test_admissible_delta_stub(params):
    # psi1 norm = beta1 = 1 with unit parameters: min(1, 1, 1, k/(rho+m)) = 1/2
    assert admissible_delta(_StubBasis(), params) == pytest.approx(0.5)


def test_admissible_delta_reference(basis, params):
    d = admissible_delta(basis, params)
    assert 0.0 < d <= 1.0


def test_energy_G_reduces_to_2E_without_coupling(ref_run, params, basis):
    traj = ref_run["trajectory"]
    E = energy_E(traj, params)
    G0 = energy_G(traj, params, basis, delta=0.0)
    assert np.allclose(G0, 2.0 * E, rtol=1e-12)


def test_energy_G_equivalence_chain(ref_run, params, basis):
    traj = ref_run["trajectory"]
    delta = admissible_delta(basis, params)
    E = energy_E(traj, params)
    G = energy_G(traj, params, basis, delta)
    scale = 1.0 + E.max()
    assert np.all(G >= E - 1e-10 * scale)
    assert np.all(G <= 3.0 * E + 1e-10 * scale)


def test_energy_G_rejects_inadmissible_delta(ref_run, params, basis):
    with pytest.raises(PeriflowError):
        energy_G(ref_run["trajectory"], params, basis, delta=5.0)


def test_energy_identity_zero_trajectory(zero_system):
    traj = zero_trajectory(zero_system.period, zero_system.n, 256)
    assert check_energy_identity(traj, zero_system) == 0.0


def test_energy_report_reference(ref_run):
    er = energy_report(ref_run["trajectory"], ref_run["system"])
    assert er.passed
    assert er.identity_residual <= er.identity_tol
    assert er.period_balance <= 1e-9 * (1.0 + er.E.max())
    assert 0.0 < er.delta <= 1.0
    assert np.all(er.dissipation >= 0.0)


def test_partial_bound_reference(ref_run):
    row = check_partial_bound(
        ref_run["trajectory"], ref_run["system"], ref_run["forces"]
    )
    assert not row.zero_data
    assert row.lhs > 0.0 and row.rhs_data > 0.0
    assert math.isfinite(row.c3_hat) and row.c3_hat > 0.0
    assert not row.regression_exceeded


def test_partial_bound_regression_flag(ref_run):
    row = check_partial_bound(
        ref_run["trajectory"],
        ref_run["system"],
        ref_run["forces"],
        baseline_c3=1e-12,
    )
    assert row.regression_exceeded


def test_partial_bound_zero_data(zero_system):
    traj = zero_trajectory(zero_system.period, zero_system.n, 256)
    row = check_partial_bound(traj, zero_system, zero_system.forces)
    assert row.zero_data and row.c3_hat == 0.0


def test_partial_bound_contradiction_detected(ref_run, zero_system):
    # nonzero dissipation with zero data must be flagged, not fitted away
    with pytest.raises(PeriflowError):
        check_partial_bound(
            ref_run["trajectory"], ref_run["system"], zero_system.forces
        )


def test_particular_energy_rows_reference(ref_run):
    rows, sqrtG = check_particular_energy(
        ref_run["trajectory"], ref_run["system"], ref_run["forces"]
    )
    by_id = {r["check_id"]: r for r in rows}
    assert set(by_id) == {
        "decay-inequality",
        "integrated-decay",
        "energy-sup-reconstruction",
    }
    assert all(r["pass"] for r in rows)
    # the sup-via-mean reconstruction has genuine slack, not just tolerance
    r = by_id["energy-sup-reconstruction"]
    assert r["rhs"] > r["lhs"] > 0.0
    assert np.all(sqrtG >= 0.0)


def test_smallness_margin_formula(params):
    phi = sine_signal(2.0 * math.pi, 1.0)
    w12 = sobolev_norm_T(phi, 1)
    cq = params.mu / (params.rho * 2.0 * w12)  # rhs is exactly twice the lhs
    rep = smallness_report(phi, None, None, params, cq)
    assert rep["weak"]["ok"]
    assert rep["weak"]["margin"] == pytest.approx(0.5, abs=1e-12)
    assert rep["nominal_constants"]

    rep_bad = smallness_report(phi, None, None, params, 10.0 * cq)
    assert not rep_bad["weak"]["ok"]
    assert rep_bad["weak"]["margin"] < 0.0

    rep_zero = smallness_report(phi, None, None, params, 0.0)
    assert rep_zero["weak"]["ok"] and rep_zero["weak"]["margin"] == 1.0


def test_smallness_refined_conditions_present(ref_run, params, ref_cq):
    rep = smallness_report(
        ref_run["phi"], None, None, params, ref_cq, forces=ref_run["forces"]
    )
    for key in ("strong1", "strong2"):
        assert {"lhs", "rhs", "margin", "ok"} <= set(rep[key])
        assert rep[key]["lhs"] >= 0.0


def test_strong_regularity_reference(ref_run):
    sr = strong_regularity_monitor(ref_run["trajectory"], ref_run["system"])
    assert sr.identity_residual <= 1e-4 * (1.0 + sr.sup_prime_energy)
    assert sr.delta_prime > 0.0
    assert sr.delta_prime == pytest.approx(float(sr.coefficient.min()))
    assert min(sr.c8, sr.c9, sr.c10, sr.c11, sr.c12) >= 0.0
    assert sr.prime_bound_rhs >= 0.0
    assert 0.0 <= sr.t_star < ref_run["trajectory"].period


def test_far_field_decay(basis, geom, ref_run):
    xs = [0.0, 1.0, geom.X0, geom.X0 + 1.0, geom.X0 + 2.0]
    out = far_field_decay(basis, ref_run["trajectory"], xs)
    vals = [out[float(x)] for x in xs]
    assert vals[0] > 0.0
    for lo, hi in zip(vals[1:], vals[:-1]):
        assert lo <= hi + 1e-12
    assert vals[-2] == 0.0 and vals[-1] == 0.0


def test_body_pressure_bump(ref_run, geom, mesh):
    theta = BodyPressureBump(ref_run["carrier"])
    assert theta.boundary_weight == pytest.approx(geom.body_area)
    # quadrature on the body boundary reproduces the closed-form weight
    nodes = mesh.boundary_nodes
    vals = mesh.boundary_normals[:, 0] * theta(nodes[:, 0], nodes[:, 1])
    assert mesh.boundary_integral(vals) == pytest.approx(geom.body_area, rel=1e-10)
    # gradient consistency by central differences
    rng = np.random.default_rng(9)
    x1 = rng.uniform(-3.0, 3.0, 50)
    x2 = rng.uniform(-0.9, 0.9, 50)
    eps = 1e-6
    g = theta.grad(x1, x2)
    g1 = (theta(x1 + eps, x2) - theta(x1 - eps, x2)) / (2.0 * eps)
    g2 = (theta(x1, x2 + eps) - theta(x1, x2 - eps)) / (2.0 * eps)
    assert np.max(np.abs(g[:, 0] - g1)) <= 1e-6
    assert np.max(np.abs(g[:, 1] - g2)) <= 1e-6


def test_stokes_rhs_norm(ref_run, zero_system):
    _, norms = stokes_rhs_norm(ref_run["trajectory"], ref_run["system"])
    assert np.all(np.isfinite(norms)) and norms.max() > 0.0
    traj0 = zero_trajectory(zero_system.period, zero_system.n, 256)
    _, norms0 = stokes_rhs_norm(traj0, zero_system)
    assert norms0.max() == 0.0


def test_resonance_probe_at_natural_period(ref_run):
    rep = resonance_probe(ref_run["system"], FixedPointConfig(n_steps=1024))
    assert rep["period"] == pytest.approx(rep["natural_period"])
    assert rep["coupled"]["converged"]
    assert math.isfinite(rep["coupled"]["sup_E"])
    assert rep["decoupled"]["singular"]
    assert rep["decoupled"]["sigma_min"] < 1e-8


def test_resonance_probe_off_resonance(offres_run):
    rep = resonance_probe(offres_run["system"], FixedPointConfig(n_steps=1024))
    assert rep["coupled"]["converged"]
    assert not rep["decoupled"]["singular"]
    assert math.isfinite(rep["decoupled"]["sup_state"])


def test_diagnostics_bundle_reference(ref_run):
    bundle = diagnostics_bundle(
        ref_run["trajectory"], ref_run["system"], ref_run["forces"]
    )
    ids = [r["check_id"] for r in bundle["rows"]]
    assert len(ids) == 12 and len(set(ids)) == 12
    assert all(r["pass"] for r in bundle["rows"])
    series = bundle["series"]
    assert series["E_max"] > 0.0
    assert series["E_max"] <= series["G_max"] <= 3.0 * series["E_max"]
    json.dumps(bundle)  # the whole ledger must be JSON-serializable
