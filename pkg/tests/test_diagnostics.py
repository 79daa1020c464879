import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactwave.core import EndStates, GasModel, make_grid, make_simulation_grid
from contactwave.diagnostics import (NONZERO, ZERO, a4_entries, a4_matrix, absorption_coefficients,
                                     diagonal_frame, dissipation_form, eigen_matrices,
                                     heat_identity_errors, heat_weights, perturbation_fields,
                                     perturbation_norms, perturbed_system_imbalance,
                                     poincare_audit, poincare_integrands, weight_exponent,
                                     weighted_energies)
from contactwave.errors import InvalidArgument, MassLeak
from contactwave.massdecomp import decompose_mass, endpoint_eigen, excess_mass
from contactwave.profile import solve_profile
from contactwave.solver import (PerturbationSpec, SimState, StepConfig, cfl_dt, initial_data,
                                simulate, step)
from contactwave.waves import WaveModel


def test_a4_examples(gas):
    b = a4_entries(1.0, gas)
    assert np.allclose(b, [19 / 30, 0.4 * np.sqrt(1 / 3), -11 / 30, 0.4], atol=1e-14)
    assert b[1] == pytest.approx(0.230940, abs=1e-6)
    L, Rm, lam3, A1 = eigen_matrices(np.array([1.0]), gas, 1.0)
    assert lam3[0] == pytest.approx(np.sqrt(5 / 3), abs=1e-14)
    assert lam3[0] == pytest.approx(1.290994, abs=1e-6)


def test_dissipation_examples(gas):
    assert dissipation_form(np.array([1.0, 0.0, -1.0]), 1.0, gas) == pytest.approx(2.0, abs=1e-14)
    assert dissipation_form(np.array([1.0, 0.0, 1.0]), 1.0, gas) == pytest.approx(8 / 15, abs=1e-14)


def test_dissipation_identity_random(rng):
    gas = GasModel(mu=0.7, kappa=1.3)
    z = rng.normal(size=(1000, 3))
    vb = rng.uniform(0.5, 2.0, size=1000)
    quad = np.einsum("ni,nij,nj->n", z, a4_matrix(vb, gas), z)
    form = dissipation_form(z, vb, gas)
    assert np.max(np.abs(quad - form)) <= 1e-12
    assert np.all(form >= 0)


def test_a4_is_projected_viscosity(rng):
    from contactwave.diagnostics import viscosity_matrix
    gas = GasModel(mu=0.7, kappa=1.3)
    vb = rng.uniform(0.5, 2.0, size=50)
    L, Rm, _, _ = eigen_matrices(vb, gas, 1.0)
    assert np.max(np.abs(L @ viscosity_matrix(vb, gas) @ Rm - a4_matrix(vb, gas))) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(vb=st.floats(0.3, 3.0), pp=st.floats(0.3, 3.0), seed=st.integers(0, 2**31))
def test_frame_identities(vb, pp, seed):
    gas = GasModel()
    L, Rm, lam3, A1 = eigen_matrices(np.array([vb]), gas, pp)
    assert np.max(np.abs(L[0] @ Rm[0] - np.eye(3))) <= 1e-12
    assert np.max(np.abs(L[0] @ A1[0] @ Rm[0] - np.diag([-lam3[0], 0, lam3[0]]))) <= 1e-10
    w = np.random.default_rng(seed).normal(size=3)
    assert np.max(np.abs(Rm[0] @ (L[0] @ w) - w)) <= 1e-12


def test_weight_exponent():
    assert weight_exponent(0.1) == 4
    assert weight_exponent(0.0) == 0
    assert weight_exponent(0.25) == 3


@pytest.mark.parametrize("delta", [0.01, 0.05, 0.1, 0.3, -0.01, -0.1, -0.3])
def test_absorption_nonnegative(gas, delta):
    e = EndStates.matched(gas, 1.0, 1.0 + delta)
    p = solve_profile(gas, e, n=1201)
    grid = make_simulation_grid(40.0, 801)
    cw = WaveModel(p, gas, e).contact(grid, 3.0)
    n = weight_exponent(abs(delta))
    s = 1 if delta > 0 else -1
    lam3p = np.sqrt(gas.gamma * e.p_plus(gas) / e.v_plus)
    a1, a3 = absorption_coefficients(cw.Theta / e.theta_plus, cw.Theta_x / e.theta_plus, lam3p, n, s)
    # the factors (s n -+ 1/2) and Theta_x share the sign of s at every node
    assert np.all(a1 >= 0)
    assert np.all(a3 >= 0)


def test_heat_weight_examples():
    grid = make_grid(300.0, 60001)
    hw = heat_weights(0.25, grid, 0.0)
    assert hw.g.max() == pytest.approx(2 * np.sqrt(np.pi), abs=1e-8)
    assert hw.g.max() == pytest.approx(3.544908, abs=1e-6)
    with pytest.raises(InvalidArgument):
        heat_weights(0.0, grid, 0.0)
    with pytest.raises(InvalidArgument):
        heat_weights(0.25, grid, -1.0)


@pytest.mark.parametrize("alpha,t", [(0.25, 0.0), (0.1, 5.0), (0.05, 50.0)])
def test_heat_identities(alpha, t):
    L = 12 * np.sqrt((1 + t) / alpha)
    grid = make_grid(L, 40001)
    e = heat_identity_errors(alpha, grid, t, dt=1e-3 * (1 + t))
    assert e["g_t_residual"] <= 1e-6
    assert e["g_sup_error"] <= 1e-8
    assert e["f_sup_scaled"] <= e["f_bound"] + 1e-10
    hw = heat_weights(alpha, grid, t)
    lo, hi = heat_weights(alpha, grid, t + 1e-4), heat_weights(alpha, grid, t + 2e-4)
    # the exact g_t agrees with a one-sided difference
    assert np.max(np.abs((hi.g - lo.g) / 1e-4 - hw.g_t)) <= 1e-3


# -- perturbation fields -------------------------------------------------------------

@pytest.fixture(scope="module")
def nonzero_run(gas, ends, profile):
    grid = make_simulation_grid(60.0, 1201)
    cw0 = WaveModel(profile, gas, ends).contact(grid, 0.0)
    s0 = initial_data(cw0, PerturbationSpec(amplitudes=(0.01,) * 3), grid, gas)
    dec = decompose_mass(excess_mass(s0, cw0, grid, gas), endpoint_eigen(ends, gas))
    model = WaveModel(profile, gas, ends, dec, shift=dec.theta_bar_2)
    cfg = StepConfig(0.25 * cfl_dt(s0, gas))
    tr = simulate(s0, cfg, 2.0, gas, observers=[lambda s: {}], rho=1.3)
    return grid, model, tr, cfg


def test_fields_vanish_on_base(gas, ends, profile):
    grid = make_simulation_grid(40.0, 801)
    model = WaveModel(profile, gas, ends)
    for mode, base in ((ZERO, model.contact(grid, 1.0)), (NONZERO, model.ansatz(grid, 1.0))):
        v = getattr(base, "v_tilde", None)
        v = base.v_bar if v is None else v
        u = base.u_bar if mode == ZERO else base.u_tilde
        th = base.theta_bar if mode == ZERO else base.theta_tilde
        pert = perturbation_fields(SimState(1.0, v, u, th, grid), base, mode, gas)
        for f in (pert.phi, pert.psi, pert.zeta, pert.Phi, pert.Psi, pert.W, pert.Y):
            assert np.all(f == 0)
        cw = model.contact(grid, 1.0)
        frame = diagonal_frame(pert, cw, gas, ends)
        we = weighted_energies(frame, pert, cw, ends, gas)
        for arr in (we.E_tilde, we.K_tilde, we.G, we.K, we.E):
            assert np.all(arr == 0)


def test_mode_and_base_mismatch(gas, ends, profile):
    grid = make_simulation_grid(40.0, 801)
    model = WaveModel(profile, gas, ends)
    cw = model.contact(grid, 0.0)
    s = SimState(0.0, cw.v_bar, cw.u_bar, cw.theta_bar, grid)
    with pytest.raises(InvalidArgument):
        perturbation_fields(s, cw, NONZERO, gas)
    with pytest.raises(InvalidArgument):
        perturbation_fields(s, model.ansatz(grid, 0.0), ZERO, gas)
    with pytest.raises(InvalidArgument):
        perturbation_fields(s, model.contact(grid, 1.0), ZERO, gas)


def test_mass_leak_detected(gas, ends, profile):
    grid = make_simulation_grid(60.0, 1201)
    cw = WaveModel(profile, gas, ends).contact(grid, 0.0)
    s = initial_data(cw, PerturbationSpec(amplitudes=(0.01, 0, 0)), grid, gas)
    with pytest.raises(MassLeak):
        perturbation_fields(s, cw, ZERO, gas)


def test_nonzero_mode_identities(gas, ends, nonzero_run):
    grid, model, tr, _ = nonzero_run
    errs = []
    for s in tr.states:
        we = model.ansatz(grid, s.t)
        pert = perturbation_fields(s, we, NONZERO, gas)
        errs.append((pert.zeta_identity_residual(), pert.antiderivative_residual()))
        assert abs(pert.Phi[-1]) <= 1e-6 and abs(pert.Psi[-1]) <= 1e-6 and abs(pert.Wbar[-1]) <= 1e-6
        cw = model.contact(grid, s.t)
        frame = diagonal_frame(pert, cw, gas, ends)
        e1, e2 = frame.identity_errors()
        assert e1 <= 1e-12 and e2 <= 1e-10
        en = weighted_energies(frame, pert, cw, ends, gas)
        assert en.n == 4 and en.min_a1 >= 0 and en.min_a3 >= 0
        assert np.all(en.G >= 0) and np.all(en.K_tilde >= 0) and en.min_dissipation >= 0
        assert np.all(en.E >= en.E_floor)
        norms = perturbation_norms(pert, s, cw)
        assert all(np.isfinite(v) and v >= 0 for v in norms.values())
    errs = np.array(errs)
    assert np.all(errs <= 10 * grid.dx**2)


def test_perturbed_system_substitution(gas, ends, nonzero_run):
    grid, model, tr, cfg = nonzero_run
    s = tr.final
    states = [s]
    for _ in range(2):
        states.append(step(states[-1], cfg, gas))
    perts = [perturbation_fields(q, model.ansatz(grid, q.t), NONZERO, gas) for q in states]
    wes = [model.ansatz(grid, q.t) for q in states]
    imb = perturbed_system_imbalance(*perts, states[1], wes[1], wes[0], wes[2], gas, ends)
    # measured 1.3e-5 at dx = 0.1, falling 4x per halving of dx
    assert np.all(imb <= 3e-5)


def test_weight_neutral_as_delta_vanishes(gas):
    e = EndStates.matched(gas, 1.0, 1.0 + 1e-6)
    p = solve_profile(gas, e, n=1201)
    grid = make_simulation_grid(40.0, 801)
    model = WaveModel(p, gas, e)
    cw = model.contact(grid, 0.0)
    s = initial_data(cw, PerturbationSpec("bump-derivative", (0.01,) * 3), grid, gas)
    pert = perturbation_fields(s, cw, ZERO, gas)
    frame = diagonal_frame(pert, cw, gas, e)
    en = weighted_energies(frame, pert, cw, e, gas)
    plain = [0.5 * np.sum(frame.B[k] ** 2) * grid.dx for k in range(3)]
    assert np.allclose(en.E_tilde, plain, rtol=2e-3)


def test_zero_delta_falls_back(gas, caplog):
    e = EndStates.matched(gas, 1.0, 1.0)
    p = solve_profile(gas, e)
    grid = make_simulation_grid(40.0, 801)
    cw = WaveModel(p, gas, e).contact(grid, 0.0)
    s = initial_data(cw, PerturbationSpec("bump-derivative", (0.01,) * 3), grid, gas)
    pert = perturbation_fields(s, cw, ZERO, gas)
    with caplog.at_level(logging.WARNING):
        en = weighted_energies(diagonal_frame(pert, cw, gas, e), pert, cw, e, gas)
    assert en.n == 0 and "n = 0" in caplog.text


# -- Poincare audit ---------------------------------------------------------------------

def test_poincare_zero_perturbation(gas, ends, profile):
    grid = make_simulation_grid(40.0, 801)
    cw = WaveModel(profile, gas, ends).contact(grid, 0.0)
    rows = []
    for t in (0.0, 1.0, 2.0):
        cwt = WaveModel(profile, gas, ends).contact(grid, t)
        pert = perturbation_fields(SimState(t, cwt.v_bar, cwt.u_bar, cwt.theta_bar, grid), cwt, ZERO, gas)
        rows.append(poincare_integrands(pert, 0.05, gas, ends.p_plus(gas)))
    audit = poincare_audit(rows, 0.05)
    assert np.all(audit.lhs == 0) and np.all(audit.ratio == 0) and audit.sup_ratio == 0
    with pytest.raises(InvalidArgument):
        poincare_audit(rows[:1], 0.05)
    pert = perturbation_fields(SimState(0.0, cw.v_bar, cw.u_bar, cw.theta_bar, grid),
                               WaveModel(profile, gas, ends).ansatz(grid, 0.0), NONZERO, gas)
    with pytest.raises(InvalidArgument):
        poincare_integrands(pert, 0.05, gas, ends.p_plus(gas))


def test_zero_mass_run_audits(gas, ends, profile):
    grid = make_simulation_grid(60.0, 1201)
    model = WaveModel(profile, gas, ends)
    s0 = initial_data(model.contact(grid, 0.0), PerturbationSpec("bump-derivative", (0.01,) * 3),
                      grid, gas)
    alpha = profile.gauss_c2 / 4
    rows = []

    def obs(s):
        pert = perturbation_fields(s, model.contact(grid, s.t), ZERO, gas)
        assert abs(pert.Phi[-1]) <= 1e-6
        rows.append(poincare_integrands(pert, alpha, gas, ends.p_plus(gas)))
        return {}

    simulate(s0, StepConfig(cfl_dt(s0, gas)), 5.0, gas, observers=[obs], rho=1.2)
    audit = poincare_audit(rows, alpha)
    assert np.isfinite(audit.sup_ratio) and audit.sup_ratio > 0
    # the heat-kernel lemma: the weighted integral is dominated by its three terms
    assert np.all(audit.heat_ratio[1:] <= 1.0)
