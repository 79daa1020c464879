"""Perturbation fields, the diagonalized frame, weighted energies and heat-kernel audits."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from contactwave.core import EndStates, GasModel, Grid1D, cumtrapz, fd, l2, trapz
from contactwave.errors import InvalidArgument, MassLeak
from contactwave.waves import ContactWave, WaveEnsemble

log = logging.getLogger(__name__)

TOL_MASS = 1e-6
NONZERO = "nonzero-mass"
ZERO = "zero-mass"


# -- perturbations ---------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationSet:
    mode: str
    t: float
    grid: Grid1D
    phi: np.ndarray
    psi: np.ndarray
    zeta: np.ndarray
    Phi: np.ndarray
    Psi: np.ndarray
    Wbar: np.ndarray
    W: np.ndarray
    Y: np.ndarray
    base_v: np.ndarray = field(repr=False)      # v_tilde (or v_bar in zero-mass mode)
    base_u_x: np.ndarray = field(repr=False)

    def zeta_identity_residual(self) -> float:
        """max |W_x - Y - zeta| over interior nodes."""
        r = fd(self.W, self.grid.dx) - self.Y - self.zeta
        return float(np.max(np.abs(r[2:-2])))

    def antiderivative_residual(self) -> float:
        dx = self.grid.dx
        return float(max(np.max(np.abs(fd(self.Phi, dx) - self.phi)[2:-2]),
                         np.max(np.abs(fd(self.Psi, dx) - self.psi)[2:-2])))


def perturbation_fields(s, base, mode: str, gas: GasModel, tol_mass: float = TOL_MASS,
                        check_mass: bool = True) -> PerturbationSet:
    """Perturbations of ``s`` around an ansatz (nonzero-mass) or a contact wave (zero-mass)."""
    if mode == NONZERO:
        if not isinstance(base, WaveEnsemble):
            raise InvalidArgument("nonzero-mass mode needs the ansatz as base")
        bv, bu, bth, bE, bu_x = base.v_tilde, base.u_tilde, base.theta_tilde, base.E_tilde, base.u_tilde_x
    elif mode == ZERO:
        if not isinstance(base, ContactWave):
            raise InvalidArgument("zero-mass mode needs the contact wave as base")
        bv, bu, bth, bE, bu_x = base.v_bar, base.u_bar, base.theta_bar, base.E_bar, base.u_bar_x
    else:
        raise InvalidArgument(f"unknown mode {mode!r}")
    if base.grid != s.grid:
        raise InvalidArgument("state and base wave live on different grids")
    if abs(base.t - s.t) > 1e-9 * max(1.0, s.t):
        raise InvalidArgument(f"base wave at t = {base.t} but state at t = {s.t}")
    dx = s.grid.dx
    k = (gas.gamma - 1.0) / gas.R
    phi, psi, zeta = s.v - bv, s.u - bu, s.theta - bth
    E = gas.R * s.theta / (gas.gamma - 1.0) + 0.5 * s.u * s.u
    Phi = cumtrapz(phi, dx)
    Psi = cumtrapz(psi, dx)
    Wbar = cumtrapz(E - bE, dx)
    if check_mass:
        ends = np.array([Phi[-1], Psi[-1], Wbar[-1]])
        if np.max(np.abs(ends)) > tol_mass:
            raise MassLeak(f"anti-derivatives do not vanish at the right end at t = {s.t:g}: "
                           f"{ends} (tolerance {tol_mass:g}); wrong mode or broken conservation")
    W = k * (Wbar - bu * Psi)
    Y = k * (0.5 * psi * psi - bu_x * Psi)
    return PerturbationSet(mode, s.t, s.grid, phi, psi, zeta, Phi, Psi, Wbar, W, Y, bv, bu_x)


# -- diagonalization -------------------------------------------------------------

def _sq(x):
    return x * x


def eigen_matrices(v_bar, gas: GasModel, p_plus: float):
    """L (rows l_i), R (columns r_i), lambda3 and A1 at each node; arrays of shape (..., 3, 3)."""
    v_bar = np.asarray(v_bar, dtype=float)
    g, Rg = gas.gamma, gas.R
    lam3 = np.sqrt(g * p_plus / v_bar)
    a = np.sqrt(1.0 / (2.0 * g))
    b = np.sqrt((g - 1.0) / g)
    one = np.ones_like(v_bar)
    zero = np.zeros_like(v_bar)
    L = np.stack([
        np.stack([-a * one, -a * g / lam3, a * Rg / p_plus * one], axis=-1),
        np.stack([b * one, zero, b * Rg / ((g - 1.0) * p_plus) * one], axis=-1),
        np.stack([-a * one, a * g / lam3, a * Rg / p_plus * one], axis=-1),
    ], axis=-2)
    Rm = np.stack([
        np.stack([-a * one, -a * lam3, a * (g - 1.0) * p_plus / Rg * one], axis=-1),
        np.stack([b * one, zero, b * p_plus / Rg * one], axis=-1),
        np.stack([-a * one, a * lam3, a * (g - 1.0) * p_plus / Rg * one], axis=-1),
    ], axis=-2)
    Rm = np.swapaxes(Rm, -1, -2)   # columns r_i
    A1 = np.stack([
        np.stack([zero, -one, zero], axis=-1),
        np.stack([-p_plus / v_bar, zero, Rg / v_bar], axis=-1),
        np.stack([zero, (g - 1.0) * p_plus / Rg * one, zero], axis=-1),
    ], axis=-2)
    return L, Rm, lam3, A1


def viscosity_matrix(v_bar, gas: GasModel) -> np.ndarray:
    """A2 = diag(0, mu/v, kappa (gamma-1)/(R v))."""
    v_bar = np.asarray(v_bar, dtype=float)
    z = np.zeros_like(v_bar)
    return np.stack([np.stack([z, z, z], -1),
                     np.stack([z, gas.mu / v_bar, z], -1),
                     np.stack([z, z, gas.kappa * (gas.gamma - 1.0) / (gas.R * v_bar)], -1)], -2)


def a4_entries(v_bar, gas: GasModel):
    """Closed forms (b11, b12, b13, b22) of L A2 R."""
    g, R, mu, kap = gas.gamma, gas.R, gas.mu, gas.kappa
    v_bar = np.asarray(v_bar, dtype=float)
    h = (g - 1.0) ** 2 * kap / (2.0 * g * R)
    b11 = (mu / 2.0 + h) / v_bar
    b12 = np.sqrt((g - 1.0) / 2.0) * (g - 1.0) * kap / (g * R) / v_bar
    b13 = (-mu / 2.0 + h) / v_bar
    b22 = (g - 1.0) * kap / (g * R) / v_bar
    return b11, b12, b13, b22


def a4_matrix(v_bar, gas: GasModel) -> np.ndarray:
    b11, b12, b13, b22 = a4_entries(v_bar, gas)
    return np.stack([np.stack([b11, b12, b13], -1),
                     np.stack([b12, b22, b12], -1),
                     np.stack([b13, b12, b11], -1)], -2)


def dissipation_form(z, v_bar, gas: GasModel):
    """Sum-of-squares form of z^t A4 z; z has a trailing axis of length 3."""
    z = np.asarray(z, dtype=float)
    g = gas.gamma
    z1, z2, z3 = z[..., 0], z[..., 1], z[..., 2]
    heat = gas.kappa * (g - 1.0) / (gas.R * v_bar) * _sq(np.sqrt((g - 1.0) / (2.0 * g)) * (z1 + z3)
                                                          + z2 / np.sqrt(g))
    visc = gas.mu / v_bar * _sq((z3 - z1) / np.sqrt(2.0))
    return heat + visc


@dataclass(frozen=True)
class DiagonalFrame:
    grid: Grid1D
    v_bar: np.ndarray
    lambda3: np.ndarray
    L_mat: np.ndarray
    R_mat: np.ndarray
    A1: np.ndarray
    A4: np.ndarray
    B: np.ndarray           # shape (4, 3, N): B and its first three x-derivatives

    def identity_errors(self) -> tuple[float, float]:
        """max |L R - I| and max |L A1 R - diag(-lam3, 0, lam3)| over nodes."""
        I = np.eye(3)
        e1 = np.max(np.abs(self.L_mat @ self.R_mat - I))
        lam = np.zeros_like(self.A1)
        lam[:, 0, 0] = -self.lambda3
        lam[:, 2, 2] = self.lambda3
        e2 = np.max(np.abs(self.L_mat @ self.A1 @ self.R_mat - lam))
        return float(e1), float(e2)


def diagonal_frame(pert: PerturbationSet, cw: ContactWave, gas: GasModel,
                   ends: EndStates) -> DiagonalFrame:
    """Build l_i, r_i, A4 from v_bar and B = L (Phi, Psi, W) with derivatives up to order 3."""
    if np.any(cw.v_bar <= 0):
        raise InvalidArgument("v_bar must be positive")
    pp = ends.p_plus(gas)
    L, Rm, lam3, A1 = eigen_matrices(cw.v_bar, gas, pp)
    A4 = a4_matrix(cw.v_bar, gas)
    Wc = np.stack([pert.Phi, pert.Psi, pert.W])          # (3, N)
    B0 = np.einsum("nij,jn->in", L, Wc)
    dx = pert.grid.dx
    Bs = [B0]
    for _ in range(3):
        Bs.append(fd(Bs[-1], dx))
    return DiagonalFrame(pert.grid, cw.v_bar, lam3, L, Rm, A1, A4, np.stack(Bs))


# -- weighted energies -------------------------------------------------------------

def weight_exponent(delta: float) -> int:
    """n = [delta^{-1/2}] + 1; 0 (no weight) when delta = 0."""
    if delta <= 0:
        return 0
    return int(np.floor(delta ** -0.5)) + 1


@dataclass(frozen=True)
class EnergyConstants:
    C_hat: float
    C_bar: float


def choose_energy_constants(v_tilde_max: float, ratio_max: float, weight_min: float,
                            gas: GasModel) -> EnergyConstants:
    """Constants making E_i dominate the plain quadratic norms.

    With C_hat >= 4 v/mu the phi^2 coefficient after Young's inequality on the
    phi Psi cross term is >= 1; the leftover C_hat (v/mu) Psi^2 is bounded by
    C_hat (v/mu)(p+/v_bar)(b1^2 + b3^2), which the weighted part absorbs once
    C_bar weight_min / 2 >= 1 + C_hat max(v p+ / (mu v_bar)).  ``ratio_max`` is
    that last maximum.  C_bar is also kept above 8 C_hat (1 + v/mu).
    """
    C_hat = max(2.0, 4.0 * v_tilde_max / gas.mu)
    C_bar = max(8.0 * C_hat * (1.0 + v_tilde_max / gas.mu),
                2.0 / weight_min * (1.0 + C_hat * ratio_max))
    return EnergyConstants(C_hat, C_bar)


def energy_constants_for(base_v: np.ndarray, v_bar: np.ndarray, ends: EndStates, gas: GasModel,
                         margin: float = 1.1) -> EnergyConstants:
    n = weight_exponent(ends.delta)
    lo, hi = min(ends.theta_minus, ends.theta_plus), max(ends.theta_minus, ends.theta_plus)
    wmin = (lo / hi) ** n
    ratio = float(np.max(base_v * ends.p_plus(gas) / (gas.mu * v_bar)))
    return choose_energy_constants(margin * float(np.max(base_v)), margin * ratio, wmin, gas)


@dataclass(frozen=True)
class WeightedEnergies:
    t: float
    n: int
    sign: int
    E_tilde: np.ndarray      # k = 0, 1, 2
    K_tilde: np.ndarray
    G: np.ndarray
    K: np.ndarray
    E: np.ndarray            # E_i
    E_floor: np.ndarray      # integral of |d^i B|^2 + |d^i phi|^2
    min_a1: float
    min_a3: float
    min_dissipation: float
    constants: EnergyConstants

    def as_row(self) -> dict:
        row = {"n": self.n}
        for k in range(3):
            row[f"E_tilde_{k}"] = self.E_tilde[k]
            row[f"K_tilde_{k}"] = self.K_tilde[k]
            row[f"G_{k}"] = self.G[k]
            row[f"K_{k}"] = self.K[k]
            row[f"E_{k}"] = self.E[k]
            row[f"E_floor_{k}"] = self.E_floor[k]
        row["min_a1"] = self.min_a1
        row["min_a3"] = self.min_a3
        return row


def absorption_coefficients(v1, v1_x, lambda3_plus: float, n: int, s: int):
    """a1, a3 for the weights v1^{s n} on b1 and v1^{-s n} on b3 (lambda3 = lambda3_plus v1^{-1/2})."""
    a1 = 0.5 * lambda3_plus * (s * n - 0.5) * v1 ** (s * n - 1.5) * v1_x
    a3 = 0.5 * lambda3_plus * (s * n + 0.5) * v1 ** (-s * n - 1.5) * v1_x
    return a1, a3


def weighted_energies(frame: DiagonalFrame, pert: PerturbationSet, cw: ContactWave,
                      ends: EndStates, gas: GasModel,
                      constants: EnergyConstants | None = None) -> WeightedEnergies:
    dx = frame.grid.dx
    n = weight_exponent(ends.delta)
    if n == 0:
        log.warning("delta = 0: weighted energies fall back to n = 0")
    s = 1 if ends.theta_plus >= ends.theta_minus else -1
    v1 = cw.Theta / ends.theta_plus
    v1_x = cw.Theta_x / ends.theta_plus
    w1, w3 = v1 ** (s * n), v1 ** (-s * n)
    lam3p = np.sqrt(gas.gamma * ends.p_plus(gas) / ends.v_plus)
    a1, a3 = absorption_coefficients(v1, v1_x, lam3p, n, s)
    if constants is None:
        constants = energy_constants_for(pert.base_v, cw.v_bar, ends, gas)
    B = frame.B
    phis = [pert.phi, fd(pert.phi, dx), fd(fd(pert.phi, dx), dx)]
    Psis = [pert.Psi, pert.psi, fd(pert.psi, dx)]
    Et, Kt, G, K, E, floor = (np.zeros(3) for _ in range(6))
    min_diss = np.inf
    for k in range(3):
        bk, bk1 = B[k], B[k + 1]
        Et[k] = trapz(0.5 * w1 * bk[0] ** 2 + 0.5 * bk[1] ** 2 + 0.5 * w3 * bk[2] ** 2, dx)
        dens = dissipation_form(bk1.T, frame.v_bar, gas)
        min_diss = min(min_diss, float(dens.min()))
        Kt[k] = trapz(dens, dx)
        G[k] = trapz(a1 * bk[0] ** 2 + a3 * bk[2] ** 2, dx)
        K[k] = trapz((bk1 ** 2).sum(axis=0), dx)
        cross = gas.mu / (2.0 * pert.base_v) * phis[k] ** 2 - phis[k] * Psis[k]
        E[k] = constants.C_bar * Et[k] + constants.C_hat * trapz(cross, dx)
        floor[k] = trapz((bk ** 2).sum(axis=0) + phis[k] ** 2, dx)
    return WeightedEnergies(pert.t, n, s, Et, Kt, G, K, E, floor, float(a1.min()),
                            float(a3.min()), min_diss, constants)


# -- heat-kernel weights and audits -------------------------------------------------

@dataclass(frozen=True)
class HeatKernelWeights:
    alpha: float
    t: float
    grid: Grid1D
    omega: np.ndarray
    g: np.ndarray
    f: np.ndarray

    @property
    def g_t(self) -> np.ndarray:
        """Exact g_t = omega_x / (4 alpha)."""
        s = 1.0 + self.t
        omega_x = -2.0 * self.alpha * self.grid.x / s * self.omega
        return omega_x / (4.0 * self.alpha)


def heat_weights(alpha: float, grid: Grid1D, t: float) -> HeatKernelWeights:
    if not alpha > 0:
        raise InvalidArgument("alpha must be positive")
    if t < 0:
        raise InvalidArgument("t must be non-negative")
    s = 1.0 + t
    omega = s ** -0.5 * np.exp(-alpha * grid.x ** 2 / s)
    return HeatKernelWeights(alpha, t, grid, omega, cumtrapz(omega, grid.dx),
                             cumtrapz(omega * omega, grid.dx))


def heat_identity_errors(alpha: float, grid: Grid1D, t: float, dt: float = 1e-3) -> dict:
    """Discrete checks of 4 alpha g_t = omega_x, sup g and the f bound."""
    hw = heat_weights(alpha, grid, t)
    if t >= dt:
        lo, hi = heat_weights(alpha, grid, t - dt), heat_weights(alpha, grid, t + dt)
        g_t = (hi.g - lo.g) / (2.0 * dt)
    else:
        # second-order one-sided stencil at the initial time
        h1, h2 = heat_weights(alpha, grid, t + dt), heat_weights(alpha, grid, t + 2.0 * dt)
        g_t = (-3.0 * hw.g + 4.0 * h1.g - h2.g) / (2.0 * dt)
    omega_x = fd(hw.omega, grid.dx)
    return {
        "g_t_residual": float(np.max(np.abs(4.0 * alpha * g_t - omega_x))),
        "g_sup_error": float(abs(hw.g.max() - np.sqrt(np.pi / alpha))),
        "f_sup_scaled": float(hw.f.max() * np.sqrt(1.0 + t)),
        "f_bound": float(2.0 / np.sqrt(alpha)),
    }


@dataclass(frozen=True)
class PoincareAudit:
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    ratio: np.ndarray
    sup_ratio: float
    heat_lhs: np.ndarray
    heat_rhs_terms: np.ndarray      # shape (len(times), 3)
    heat_ratio: np.ndarray

    def variation(self, t_lo: float, t_hi: float) -> float:
        """(max - min) / max of the running ratio over [t_lo, t_hi]."""
        m = (self.times >= t_lo) & (self.times <= t_hi)
        r = self.ratio[m]
        if r.size == 0 or r.max() == 0:
            return 0.0
        return float((r.max() - r.min()) / r.max())


def poincare_integrands(pert: PerturbationSet, alpha: float, gas: GasModel, p_plus: float) -> dict:
    """Instantaneous space integrals used by the Poincare and heat-kernel audits."""
    if pert.mode != ZERO:
        raise InvalidArgument("the Poincare audit applies to the zero-mass mode")
    dx = pert.grid.dx
    hw = heat_weights(alpha, pert.grid, pert.t)
    w2 = hw.omega ** 2
    Phi, Psi, W = pert.Phi, pert.Psi, pert.W
    Wx = fd(W, dx)
    h = gas.R * W + (gas.gamma - 1.0) * p_plus * Phi
    hx = gas.R * Wx + (gas.gamma - 1.0) * p_plus * pert.phi
    return {
        "t": pert.t,
        "weighted": trapz((Phi ** 2 + Psi ** 2 + W ** 2) * w2, dx),
        "grad": trapz(pert.phi ** 2 + pert.psi ** 2 + Wx ** 2, dx),
        "hess": trapz(fd(pert.psi, dx) ** 2 + fd(Wx, dx) ** 2, dx),
        "h_w": trapz(h * h * w2, dx),
        "h_norm": trapz(h * h, dx),
        "h_x": trapz(hx * hx, dx),
        "h_g2": trapz(h * h * hw.g ** 2, dx),
        "h_ggt": trapz(h * h * hw.g * hw.g_t, dx),
    }


def _cumtrapz_t(y, t):
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


def poincare_audit(rows: Sequence[dict], alpha: float) -> PoincareAudit:
    """Accumulate the audits from per-snapshot integrals (see :func:`poincare_integrands`).

    The duality term of the heat-kernel lemma uses
    int_0^T <h_t, h g^2> dt = [int h^2 g^2 / 2]_0^T - int_0^T int h^2 g g_t,
    so no time differencing of h is needed.
    """
    if len(rows) < 2:
        raise InvalidArgument("need at least two snapshots")
    t = np.array([r["t"] for r in rows])
    get = lambda k: np.array([r[k] for r in rows])
    lhs = _cumtrapz_t(get("weighted"), t)
    rhs = _cumtrapz_t(get("grad"), t) + _cumtrapz_t(get("hess"), t)
    ratio = lhs / (1.0 + rhs)
    h_lhs = _cumtrapz_t(get("h_w"), t)
    hg2 = get("h_g2")
    duality = 0.5 * (hg2 - hg2[0]) - _cumtrapz_t(get("h_ggt"), t)
    terms = np.column_stack([
        np.full(t.size, 4.0 * np.pi * rows[0]["h_norm"]),
        4.0 * np.pi / alpha * _cumtrapz_t(get("h_x"), t),
        8.0 * alpha * duality,
    ])
    total = terms.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        h_ratio = np.where(total > 0, h_lhs / total, 0.0)
    return PoincareAudit(t, lhs, rhs, ratio, float(ratio.max()), h_lhs, terms, h_ratio)


# -- norms and ledger rows ------------------------------------------------------------

def perturbation_norms(pert: PerturbationSet, s, cw: ContactWave) -> dict:
    dx = pert.grid.dx
    fields = (pert.phi, pert.psi, pert.zeta)
    L2 = np.sqrt(sum(l2(f, dx) ** 2 for f in fields))
    ders = [fd(f, dx) for f in fields]
    D = np.sqrt(sum(l2(f, dx) ** 2 for f in ders))
    phixx = l2(fd(ders[0], dx), dx)
    Linf_pert = max(float(np.max(np.abs(f))) for f in fields)
    Linf = max(float(np.max(np.abs(s.v - cw.v_bar))), float(np.max(np.abs(s.u - cw.u_bar))),
               float(np.max(np.abs(s.theta - cw.theta_bar))))
    anti_inf = max(float(np.max(np.abs(f))) for f in (pert.Phi, pert.Psi, pert.W))
    return {"L2": float(L2), "H1": float(np.sqrt(L2 ** 2 + D ** 2)), "DL2": float(D),
            "phi_xx_L2": float(phixx), "Linf_pert": Linf_pert, "Linf": Linf,
            "anti_Linf": anti_inf}


@dataclass
class AprioriTracker:
    """Running sup N(t) of the a priori functional and the derived chi, delta_bar (metadata)."""

    eps: float
    delta: float
    mode: str = NONZERO
    N: float = 0.0

    def update(self, t: float, norms: dict) -> dict:
        s = 1.0 + t
        if self.mode == NONZERO:
            val = (norms["anti_Linf"] ** 2 + s ** 0.5 * norms["L2"] ** 2
                   + s ** 1.5 * (norms["DL2"] ** 2 + norms["phi_xx_L2"] ** 2))
        else:
            lg = np.log(2.0 + t)
            val = (norms["anti_Linf"] ** 2 + s / lg * norms["L2"] ** 2
                   + s ** 2 / lg * (norms["DL2"] ** 2 + norms["phi_xx_L2"] ** 2))
        self.N = max(self.N, float(val))
        chi = np.sqrt(self.N)
        return {"N_T": self.N, "chi": float(chi), "delta_bar": float(self.eps + chi + self.delta)}


# -- perturbed-system substitution check ------------------------------------------------

def perturbed_system_imbalance(prev: PerturbationSet, mid: PerturbationSet, nxt: PerturbationSet,
                               s_mid, we: WaveEnsemble, we_prev: WaveEnsemble,
                               we_next: WaveEnsemble, gas: GasModel, ends: EndStates) -> np.ndarray:
    """Substitute (Phi, Psi, W) into the linearized anti-derivative system with sources.

    Q1, Q2 are built as explicit fields; the return value is the interior
    max-norm mismatch of the three equations (centred time differences).
    """
    dt2 = nxt.t - prev.t
    dx = mid.grid.dx
    d = lambda a: fd(a, dx)
    R, g, mu, kap = gas.R, gas.gamma, gas.mu, gas.kappa
    pp = ends.p_plus(gas)
    vt, ut, tht, pt = we.v_tilde, we.u_tilde, we.theta_tilde, we.p_tilde
    v, u, th = s_mid.v, s_mid.u, s_mid.theta
    p = R * th / v
    Phi, Psi, W, Y = mid.Phi, mid.Psi, mid.W, mid.Y
    Phi_x, Psi_x, W_x = d(Phi), d(Psi), d(W)
    u_x, th_x = d(u), d(th)
    J1 = (pt - pp) / vt * Phi_x - (p - pt + pt / vt * Phi_x - R / vt * (th - tht))
    J2 = (pp - p) * Psi_x
    ut_t = (we_next.u_tilde - we_prev.u_tilde) / dt2
    Q1 = (mu / v - mu / vt) * u_x + J1 + R / vt * Y - we.Rt2
    Q2 = ((kap / v - kap / vt) * th_x + mu * u_x / v * Psi_x - we.Rt3 - ut_t * Psi
          + ut * we.Rt2 + J2 - kap / vt * d(Y))
    e1 = (nxt.Phi - prev.Phi) / dt2 - Psi_x + we.Rt1
    e2 = (nxt.Psi - prev.Psi) / dt2 - pp / vt * Phi_x + R / vt * W_x - mu / vt * d(Psi_x) - Q1
    e3 = R / (g - 1.0) * (nxt.W - prev.W) / dt2 + pp * Psi_x - kap / vt * d(W_x) - Q2
    inner = slice(4, -4)
    return np.array([np.max(np.abs(e[inner])) for e in (e1, e2, e3)])
