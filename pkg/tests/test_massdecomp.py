import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contactwave.core import EndStates, GasModel, make_simulation_grid
from contactwave.errors import InvalidArgument, InvalidState
from contactwave.massdecomp import (conserved, decompose_mass, decomposition_report, endpoint_eigen,
                                    excess_mass, flux_jacobian)
from contactwave.profile import solve_profile
from contactwave.solver import PerturbationSpec, SimState, initial_data
from contactwave.waves import WaveModel, contact_wave, excess_vs_ansatz


@pytest.fixture(scope="module")
def gas():
    return GasModel()


@pytest.fixture(scope="module")
def eig12(gas):
    # v- = theta- = 1, v+ = theta+ = 1.2, p = 1 on both sides
    return endpoint_eigen(EndStates(1.0, 1.2, 1.0, 1.2), gas)


def test_flux_jacobian_examples(gas):
    A = flux_jacobian(1.0, 0.0, 1.0, gas)
    assert np.array_equal(A[1], [-1.0, 0.0, 1.0])
    ev = np.sort(np.linalg.eigvals(A).real)
    assert np.allclose(ev, [-np.sqrt(5 / 3), 0.0, np.sqrt(5 / 3)], atol=1e-10)
    assert ev[0] == pytest.approx(-ev[2], abs=1e-12)
    with pytest.raises(InvalidArgument):
        flux_jacobian(0.0, 0.0, 1.0, gas)
    with pytest.raises(InvalidArgument):
        flux_jacobian(1.0, 0.0, -1.0, gas)


def test_endpoint_eigen_examples(gas, eig12):
    assert eig12.lambda1_minus == pytest.approx(-1.2909944487358056, abs=1e-12)
    assert np.allclose(eig12.r1_minus, [-1.0, -1.290994, 2 / 3], atol=1e-6)
    assert eig12.lambda3_plus == pytest.approx(1.1785113019775793, abs=1e-12)
    A = flux_jacobian(1.0, 0.0, 1.0, gas)
    assert np.linalg.norm(A @ eig12.r1_minus - eig12.lambda1_minus * eig12.r1_minus) <= 1e-10
    A = flux_jacobian(1.2, 0.0, 1.2, gas)
    assert np.linalg.norm(A @ eig12.r3_plus - eig12.lambda3_plus * eig12.r3_plus) <= 1e-10
    # oracle: numpy.linalg.det of the basis matrix
    assert eig12.determinant == pytest.approx(0.8231685835711281, abs=1e-12)


def test_decompose_examples(eig12):
    assert np.array_equal(decompose_mass(np.zeros(3), eig12).coefficients, np.zeros(3))
    assert np.allclose(decompose_mass(eig12.r1_minus, eig12).coefficients, [1, 0, 0], atol=1e-14)
    # oracle: numpy.linalg.solve on the same basis
    dec = decompose_mass([0.1, 0.05, 0.02], eig12)
    expect = [-0.043153794018960495, 0.25999999999999995, -0.00484620598103951]
    assert np.allclose(dec.coefficients, expect, rtol=0, atol=1e-14)
    assert "coefficients" in decomposition_report(dec, eig12)


def test_degenerate_basis(gas):
    eig = endpoint_eigen(EndStates.matched(gas, 1.0, 1.0), gas)
    with pytest.raises(InvalidState):
        decompose_mass([0.0, 0.0, 1.0], eig)
    dec = decompose_mass(0.3 * eig.r1_minus - 0.1 * eig.r3_plus, eig)
    assert np.allclose(dec.coefficients, [0.3, 0.0, -0.1], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(-100, 100), a=st.floats(-1, 1), b=st.floats(-1, 1), d=st.floats(-1, 1))
def test_decomposition_scaling_and_reconstruction(c, a, b, d):
    eig = endpoint_eigen(EndStates(1.0, 1.2, 1.0, 1.2), GasModel())
    e = np.array([a, b, d])
    one, many = decompose_mass(e, eig), decompose_mass(c * e, eig)
    assert np.allclose(many.coefficients, c * one.coefficients, rtol=0,
                       atol=1e-12 * max(1.0, abs(c)))
    assert np.linalg.norm(eig.basis @ one.coefficients - e) <= 1e-10


@pytest.fixture(scope="module")
def setup(gas):
    ends = EndStates.matched(gas, 1.0, 1.1)
    prof = solve_profile(gas, ends)
    grid = make_simulation_grid(200.0, 4001)
    return ends, prof, grid, contact_wave(prof, gas, ends, grid, 0.0)


def test_excess_examples(gas, setup):
    ends, prof, grid, cw = setup
    exact = SimState(0.0, cw.v_bar, cw.u_bar, cw.theta_bar, grid)
    assert np.all(excess_mass(exact, cw, grid, gas) == 0)
    s = initial_data(cw, PerturbationSpec(amplitudes=(0.1, 0.0, 0.0)), grid, gas)
    assert np.allclose(excess_mass(s, cw, grid, gas), [0.1, 0, 0], atol=1e-10)
    eig = endpoint_eigen(ends, gas)
    r = 0.01 * eig.r1_minus
    s = initial_data(cw, PerturbationSpec(amplitudes=tuple(r)), grid, gas)
    assert np.allclose(excess_mass(s, cw, grid, gas), r, atol=1e-10)
    other = make_simulation_grid(100.0, 4001)
    with pytest.raises(InvalidArgument):
        excess_mass(SimState(0.0, np.ones(4001), np.zeros(4001), np.ones(4001), other), cw, grid, gas)


@pytest.mark.parametrize("amps", [(0.01, 0.01, 0.01), (0.02, -0.01, 0.005)])
def test_round_trip_zero_excess(gas, setup, amps):
    ends, prof, grid, cw = setup
    s = initial_data(cw, PerturbationSpec(amplitudes=amps), grid, gas)
    dec = decompose_mass(excess_mass(s, cw, grid, gas), endpoint_eigen(ends, gas))
    we = WaveModel(prof, gas, ends, dec, shift=dec.theta_bar_2).ansatz(grid, 0.0)
    m0 = conserved(s.v, s.u, s.theta, gas)
    assert np.all(np.abs(excess_vs_ansatz(m0, we, gas)) <= 1e-8)


@pytest.mark.parametrize("delta", [0.05, 0.1, 0.2])
def test_small_perturbation_bound(gas, delta):
    ends = EndStates.matched(gas, 1.0, 1.0 + delta)
    grid = make_simulation_grid(100.0, 2001)
    cw = contact_wave(solve_profile(gas, ends), gas, ends, grid, 0.0)
    eig = endpoint_eigen(ends, gas)
    C = []
    for eps in (0.001, 0.01, 0.05):
        s = initial_data(cw, PerturbationSpec(amplitudes=(eps,) * 3), grid, gas)
        dec = decompose_mass(excess_mass(s, cw, grid, gas), eig)
        C.append((abs(dec.theta_bar_1) + abs(dec.theta_bar_3)) / eps)
    # the map is linear in eps up to the quadratic kinetic-energy term
    assert max(C) <= 1.0 and np.ptp(C) <= 1e-3
