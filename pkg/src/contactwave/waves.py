"""Viscous contact wave, diffusion waves, the ansatz and their residuals."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from contactwave.core import EndStates, GasModel, Grid1D, fd4, trapz
from contactwave.errors import InvalidArgument, InvalidState
from contactwave.massdecomp import MassDecomposition
from contactwave.profile import ProfileTable, sample_profile


@dataclass(frozen=True)
class ContactWave:
    """Contact wave sampled on a grid at time ``t``.

    ``E_bar`` is the total energy R theta_bar/(gamma-1) + u_bar^2/2, which equals
    R Theta/(gamma-1).  The ``*_x`` arrays are exact x-derivatives obtained from
    the profile table rather than finite differences.
    """

    grid: Grid1D
    t: float
    v_bar: np.ndarray
    u_bar: np.ndarray
    theta_bar: np.ndarray
    p_bar: np.ndarray
    E_bar: np.ndarray
    v_bar_x: np.ndarray = field(repr=False)
    u_bar_x: np.ndarray = field(repr=False)
    theta_bar_x: np.ndarray = field(repr=False)
    Theta: np.ndarray = field(repr=False)
    Theta_x: np.ndarray = field(repr=False)
    shift: float = 0.0


def contact_wave(p: ProfileTable, gas: GasModel, ends: EndStates, grid: Grid1D, t: float,
                 shift: float = 0.0) -> ContactWave:
    """Sample (v_bar, u_bar, theta_bar, p_bar, E_bar) at time ``t``.

    ``shift`` evaluates the wave at ``x + shift`` (the translation carried by the
    contact-direction component of the excess mass).
    """
    if t < 0:
        raise InvalidArgument("time must be non-negative")
    R, g = gas.R, gas.gamma
    p_plus = ends.p_plus(gas)
    c = gas.heat_speed
    Th, Th_x, Th_xx, _ = sample_profile(p, grid.x + shift, t)
    v = R * Th / p_plus
    q = Th_x / Th
    u = ends.u_minus + c * q
    u_x = c * (Th_xx / Th - q * q)
    theta = Th - (g - 1.0) / (2.0 * R) * u * u
    theta_x = Th_x - (g - 1.0) / R * u * u_x
    pbar = R * theta / v
    E = R * theta / (g - 1.0) + 0.5 * u * u
    return ContactWave(grid, float(t), v, u, theta, pbar, E, R * Th_x / p_plus, u_x, theta_x,
                       Th, Th_x, float(shift))


def contact_residual_fields(cw: ContactWave, gas: GasModel, ends: EndStates):
    """R1 and R2 of the approximate contact-wave system.

    R2 carries the coefficient kappa(gamma-1)/R - mu; with kappa(gamma-1)/(gamma R) - mu
    (see :func:`printed_R2`) the energy equation is left with the unbalanced
    flux kappa (gamma-1)^2/(gamma R) u_bar u_bar_x / v_bar.
    """
    dp = cw.p_bar - ends.p_plus(gas)
    R1 = (gas.heat_speed - gas.mu) * cw.u_bar_x / cw.v_bar + dp
    coef2 = gas.kappa * (gas.gamma - 1.0) / gas.R - gas.mu
    R2 = coef2 * cw.u_bar * cw.u_bar_x / cw.v_bar + dp * cw.u_bar
    return R1, R2


def printed_R2(cw: ContactWave, gas: GasModel, ends: EndStates) -> np.ndarray:
    """R2 with the kappa(gamma-1)/(gamma R) - mu coefficient, kept for comparison."""
    dp = cw.p_bar - ends.p_plus(gas)
    return (gas.heat_speed - gas.mu) * cw.u_bar * cw.u_bar_x / cw.v_bar + dp * cw.u_bar


@dataclass(frozen=True)
class ContactResiduals:
    R1: np.ndarray
    R2: np.ndarray
    imbalance: np.ndarray | None = None  # max |LHS - RHS| per equation, when a 3-point trajectory is given


def contact_residuals(cws: ContactWave | Sequence[ContactWave], gas: GasModel,
                      ends: EndStates) -> ContactResiduals:
    """Residuals of the contact wave in the Navier-Stokes system.

    Given three equally spaced snapshots the middle one is checked against the
    approximate system with centred time differences and x finite differences;
    the returned ``imbalance`` is the interior max-norm mismatch of each
    equation after the R1_x, R2_x sources are added.
    """
    if isinstance(cws, ContactWave):
        cws = [cws]
    if len(cws) not in (1, 3):
        raise InvalidArgument("pass one contact wave or a 3-snapshot trajectory")
    if any(c.grid != cws[0].grid for c in cws):
        raise InvalidArgument("contact wave snapshots use different grids")
    mid = cws[len(cws) // 2]
    R1, R2 = contact_residual_fields(mid, gas, ends)
    if len(cws) == 1:
        return ContactResiduals(R1, R2)
    a, b, c = cws
    dt = b.t - a.t
    if dt <= 0 or abs((c.t - b.t) - dt) > 1e-12 * max(1.0, dt):
        raise InvalidArgument("snapshots must be equally spaced in time")
    dx = b.grid.dx
    mu, kappa = gas.mu, gas.kappa
    ddt = lambda f: (getattr(c, f) - getattr(a, f)) / (2 * dt)
    ddx = lambda arr: fd4(arr, dx)
    e1 = ddt("v_bar") - ddx(b.u_bar)
    e2 = ddt("u_bar") + ddx(b.p_bar) - mu * ddx(ddx(b.u_bar) / b.v_bar) - ddx(R1)
    e3 = (ddt("E_bar") + ddx(b.p_bar * b.u_bar)
          - ddx(kappa * ddx(b.theta_bar) / b.v_bar + mu * b.u_bar * ddx(b.u_bar) / b.v_bar)
          - ddx(R2))
    inner = slice(3, -3)
    imb = np.array([np.max(np.abs(e[inner])) for e in (e1, e2, e3)])
    return ContactResiduals(R1, R2, imb)


@dataclass(frozen=True)
class DiffusionWaves:
    t: float
    lambda1: float
    lambda3: float
    theta1: np.ndarray
    theta3: np.ndarray
    theta1_x: np.ndarray
    theta3_x: np.ndarray


def diffusion_waves(ends: EndStates, gas: GasModel, grid: Grid1D, t: float) -> DiffusionWaves:
    """Heat kernels carried at the endpoint acoustic speeds lambda1-, lambda3+."""
    if t < 0:
        raise InvalidArgument("time must be non-negative")
    g = gas.gamma
    lam1 = -np.sqrt(g * ends.p_minus(gas) / ends.v_minus)
    lam3 = np.sqrt(g * ends.p_plus(gas) / ends.v_plus)
    s = 1.0 + t
    x = grid.x
    norm = 1.0 / np.sqrt(4.0 * np.pi * s)
    y1 = x - lam1 * s
    y3 = x - lam3 * s
    th1 = norm * np.exp(-y1 * y1 / (4.0 * s))
    th3 = norm * np.exp(-y3 * y3 / (4.0 * s))
    return DiffusionWaves(float(t), float(lam1), float(lam3), th1, th3,
                          -y1 / (2.0 * s) * th1, -y3 / (2.0 * s) * th3)


@dataclass(frozen=True)
class WaveEnsemble:
    contact: ContactWave
    diffusion: DiffusionWaves
    coeffs: MassDecomposition
    v_tilde: np.ndarray
    u_tilde: np.ndarray
    theta_tilde: np.ndarray
    e_tilde: np.ndarray
    v_tilde_x: np.ndarray = field(repr=False)
    u_tilde_x: np.ndarray = field(repr=False)
    theta_tilde_x: np.ndarray = field(repr=False)
    R1: np.ndarray = field(repr=False)
    R2: np.ndarray = field(repr=False)
    Rt1: np.ndarray = field(repr=False)
    Rt2: np.ndarray = field(repr=False)
    Rt3: np.ndarray = field(repr=False)
    p_tilde: np.ndarray = field(repr=False)

    @property
    def grid(self) -> Grid1D:
        return self.contact.grid

    @property
    def t(self) -> float:
        return self.contact.t

    @property
    def E_tilde(self) -> np.ndarray:
        """Total energy e_tilde + u_tilde^2/2."""
        return self.e_tilde + 0.5 * self.u_tilde**2


def build_ansatz(cw: ContactWave, dw: DiffusionWaves, coeffs: MassDecomposition,
                 gas: GasModel, ends: EndStates) -> WaveEnsemble:
    """Contact wave plus diffusion waves carrying the first/third excess-mass components.

    The contact-direction component ``theta_bar_2`` is not added here: it is a
    translation, applied through ``cw.shift`` when the contact wave is sampled.
    """
    R, g = gas.R, gas.gamma
    p_plus = ends.p_plus(gas)
    t1, t3 = coeffs.theta_bar_1, coeffs.theta_bar_3
    l1, l3 = dw.lambda1, dw.lambda3
    s1 = t1 * dw.theta1 + t3 * dw.theta3
    s1_x = t1 * dw.theta1_x + t3 * dw.theta3_x
    v = cw.v_bar - s1
    u = cw.u_bar + l1 * t1 * dw.theta1 + l3 * t3 * dw.theta3
    u_x = cw.u_bar_x + l1 * t1 * dw.theta1_x + l3 * t3 * dw.theta3_x
    k = (g - 1.0) / (2.0 * R)
    theta = cw.theta_bar + k * cw.u_bar**2 + (g - 1.0) / R * p_plus * s1 - k * u * u
    theta_x = (cw.theta_bar_x + 2 * k * cw.u_bar * cw.u_bar_x
               + (g - 1.0) / R * p_plus * s1_x - 2 * k * u * u_x)
    if np.any(v <= 0) or np.any(theta <= 0):
        raise InvalidState("ansatz loses positivity (diffusion-wave amplitudes too large)")
    v_x = cw.v_bar_x - s1_x
    e = R * theta / (g - 1.0)

    R1, R2 = contact_residual_fields(cw, gas, ends)
    mu, kappa = gas.mu, gas.kappa
    p_bar, p_t = cw.p_bar, R * theta / v
    Rt1 = -s1_x
    Rt2 = (R1 + mu * (cw.u_bar_x / cw.v_bar - u_x / v)
           + (l1 * t1 * dw.theta1_x + l3 * t3 * dw.theta3_x)
           + (p_t - p_bar - l1**2 * t1 * dw.theta1 - l3**2 * t3 * dw.theta3))
    Rt3 = (R2 + kappa * (cw.theta_bar_x / cw.v_bar - theta_x / v)
           + mu * (cw.u_bar * cw.u_bar_x / cw.v_bar - u * u_x / v)
           + p_plus * s1_x
           + (p_t * u - p_bar * cw.u_bar - p_plus * l1 * t1 * dw.theta1
              - p_plus * l3 * t3 * dw.theta3))
    return WaveEnsemble(cw, dw, coeffs, v, u, theta, e, v_x, u_x, theta_x,
                        R1, R2, Rt1, Rt2, Rt3, p_t)


def conserved_ansatz(we: WaveEnsemble, gas: GasModel) -> np.ndarray:
    """m_tilde = (v_tilde, u_tilde, theta_tilde + (gamma-1) u_tilde^2/(2R))."""
    k = (gas.gamma - 1.0) / (2.0 * gas.R)
    return np.stack([we.v_tilde, we.u_tilde, we.theta_tilde + k * we.u_tilde**2])


@dataclass
class WaveModel:
    """Everything needed to sample the contact wave / ansatz at any time."""

    profile: ProfileTable
    gas: GasModel
    ends: EndStates
    coeffs: MassDecomposition | None = None
    shift: float = 0.0

    def contact(self, grid: Grid1D, t: float) -> ContactWave:
        return contact_wave(self.profile, self.gas, self.ends, grid, t, self.shift)

    def ansatz(self, grid: Grid1D, t: float) -> WaveEnsemble:
        coeffs = self.coeffs or MassDecomposition(0.0, 0.0, 0.0, np.zeros(3))
        return build_ansatz(self.contact(grid, t), diffusion_waves(self.ends, self.gas, grid, t),
                            coeffs, self.gas, self.ends)


def gaussian_envelope(x, t, lambda1, lambda3, c):
    """Sum of the three Gaussians centred on the contact and the two sound waves."""
    s = 1.0 + t
    return (np.exp(-c * x * x / s) + np.exp(-c * (x - lambda1 * s) ** 2 / s)
            + np.exp(-c * (x - lambda3 * s) ** 2 / s))


@dataclass(frozen=True)
class AnsatzResidualReport:
    times: np.ndarray
    ratios: np.ndarray          # shape (len(times), 3): sup |Rt_i| (1+t) / envelope
    sup_ratio: np.ndarray       # per component, over all times
    scale: float                # delta + theta_bar_1^2 + theta_bar_3^2
    fitted_C: float             # max ratio / scale
    imbalance: np.ndarray | None = None


def envelope_ratios(we: WaveEnsemble, c: float, floor: float = 1e-6) -> np.ndarray:
    """sup over the lattice of |Rt_i| (1+t) / envelope, restricted to envelope >= floor."""
    x = we.grid.x
    env = gaussian_envelope(x, we.t, we.diffusion.lambda1, we.diffusion.lambda3, c)
    mask = env >= floor
    return np.array([np.max(np.abs(r[mask]) * (1.0 + we.t) / env[mask])
                     for r in (we.Rt1, we.Rt2, we.Rt3)])


def ansatz_residuals(model: WaveModel, grid: Grid1D, times: Sequence[float], c: float,
                     dt_check: float | None = None) -> AnsatzResidualReport:
    """Envelope report of the ansatz residuals over ``times``.

    With ``dt_check`` the ansatz system is also verified at each time by
    substituting three snapshots (t - dt, t, t + dt) into it with centred
    differences; ``imbalance`` is the worst interior mismatch per equation.
    """
    times = np.asarray(times, dtype=float)
    ratios = np.array([envelope_ratios(model.ansatz(grid, t), c) for t in times])
    coeffs = model.coeffs or MassDecomposition(0.0, 0.0, 0.0, np.zeros(3))
    scale = model.ends.delta + coeffs.theta_bar_1**2 + coeffs.theta_bar_3**2
    sup = ratios.max(axis=0)
    fitted = float(sup.max() / scale) if scale > 0 else float("inf")
    imb = None
    if dt_check is not None:
        imb = np.max([ansatz_imbalance(model, grid, t, dt_check) for t in times], axis=0)
    return AnsatzResidualReport(times, ratios, sup, scale, fitted, imb)


def ansatz_imbalance(model: WaveModel, grid: Grid1D, t: float, dt: float) -> np.ndarray:
    """Max interior mismatch of the ansatz system (with Rt_i sources) at time t."""
    t0 = max(t - dt, 0.0)
    dt_eff = (t + dt - t0) / 2.0
    a, b, c = (model.ansatz(grid, s) for s in (t0, t0 + dt_eff, t0 + 2 * dt_eff))
    gas = model.gas
    dx = grid.dx
    ddx = lambda arr: fd4(arr, dx)
    ddt = lambda fa, fc: (fc - fa) / (2 * dt_eff)
    v, u, th = b.v_tilde, b.u_tilde, b.theta_tilde
    p = gas.R * th / v
    e1 = ddt(a.v_tilde, c.v_tilde) - ddx(u) - ddx(b.Rt1)
    e2 = ddt(a.u_tilde, c.u_tilde) + ddx(p) - gas.mu * ddx(ddx(u) / v) - ddx(b.Rt2)
    e3 = (ddt(a.E_tilde, c.E_tilde) + ddx(p * u) - gas.kappa * ddx(ddx(th) / v)
          - ddx(gas.mu * u * ddx(u) / v) - ddx(b.Rt3))
    inner = slice(3, -3)
    return np.array([np.max(np.abs(e[inner])) for e in (e1, e2, e3)])


def dump_snapshot(we: WaveEnsemble, path) -> None:
    """Columns x, v_bar, u_bar, theta_bar, v_tilde, u_tilde, theta_tilde, Rt1, Rt2, Rt3."""
    cw = we.contact
    data = np.column_stack([we.grid.x, cw.v_bar, cw.u_bar, cw.theta_bar, we.v_tilde,
                            we.u_tilde, we.theta_tilde, we.Rt1, we.Rt2, we.Rt3])
    np.savetxt(path, data, fmt="%.17e",
               header=f"t={we.t!r}\nx v_bar u_bar theta_bar v_tilde u_tilde theta_tilde Rt1 Rt2 Rt3")


def excess_vs_ansatz(m0: np.ndarray, we: WaveEnsemble, gas: GasModel) -> np.ndarray:
    """Component-wise integral of m(x,0) - m_tilde(x,0)."""
    diff = m0 - conserved_ansatz(we, gas)
    return np.array([trapz(row, we.grid.dx) for row in diff])
