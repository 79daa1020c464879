"""Endpoint eigen-structure of the Euler flux and excess-mass decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from contactwave.core import EndStates, GasModel, trapz
from contactwave.errors import InvalidArgument, InvalidState

DET_MIN = 1e-8


def flux_jacobian(v, u, theta, gas: GasModel) -> np.ndarray:
    """Jacobian of the flux (-u, p, (gamma-1) p u / R) in the variables (v, u, theta + (gamma-1)u^2/(2R))."""
    if not v > 0 or not theta > 0:
        raise InvalidArgument("flux Jacobian needs v > 0 and theta > 0")
    R, g = gas.R, gas.gamma
    p = R * theta / v
    return np.array([
        [0.0, -1.0, 0.0],
        [-p / v, 0.0, R / v],
        [-(g - 1.0) * p * u / (R * v), (g - 1.0) * p / R, (g - 1.0) * u / v],
    ])


@dataclass(frozen=True)
class EndpointEigen:
    lambda1_minus: float
    lambda3_plus: float
    r1_minus: np.ndarray
    r3_plus: np.ndarray
    m_jump: np.ndarray

    @property
    def basis(self) -> np.ndarray:
        """Columns r1-, m+ - m-, r3+."""
        return np.column_stack([self.r1_minus, self.m_jump, self.r3_plus])

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.basis))


def endpoint_eigen(ends: EndStates, gas: GasModel) -> EndpointEigen:
    ends.validate(gas)
    g, R = gas.gamma, gas.R
    pm, pp = ends.p_minus(gas), ends.p_plus(gas)
    lam1 = -np.sqrt(g * pm / ends.v_minus)
    lam3 = np.sqrt(g * pp / ends.v_plus)
    r1 = np.array([-1.0, lam1, (g - 1.0) * pm / R])
    r3 = np.array([-1.0, lam3, (g - 1.0) * pp / R])
    jump = np.array([ends.v_plus - ends.v_minus, 0.0, ends.theta_plus - ends.theta_minus])
    eig = EndpointEigen(float(lam1), float(lam3), r1, r3, jump)

    A = flux_jacobian(ends.v_minus, 0.0, ends.theta_minus, gas)
    if np.linalg.norm(A @ r1 - lam1 * r1) > 1e-10:
        raise InvalidState("r1- is not an eigenvector of A(v-, 0, theta-)")
    A = flux_jacobian(ends.v_plus, 0.0, ends.theta_plus, gas)
    if np.linalg.norm(A @ r3 - lam3 * r3) > 1e-10:
        raise InvalidState("r3+ is not an eigenvector of A(v+, 0, theta+)")
    if ends.delta > 0 and abs(eig.determinant) <= DET_MIN:
        raise InvalidState(f"degenerate characteristic basis, det = {eig.determinant:.3e}")
    return eig


def conserved(v, u, theta, gas: GasModel) -> np.ndarray:
    """Stack of m = (v, u, theta + (gamma-1) u^2 / (2R))."""
    u = np.asarray(u)
    return np.stack([np.asarray(v), u, np.asarray(theta) + (gas.gamma - 1.0) * u * u / (2.0 * gas.R)])


def excess_mass(init, cw, grid, gas: GasModel) -> np.ndarray:
    """Component-wise trapezoid integral of m(x,0) - m_bar(x,0)."""
    if init.grid != grid or cw.grid != grid:
        raise InvalidArgument("initial data and contact wave must live on the same grid")
    m = conserved(init.v, init.u, init.theta, gas)
    mbar = conserved(cw.v_bar, cw.u_bar, cw.theta_bar, gas)
    return np.array([trapz(row, grid.dx) for row in (m - mbar)])


def lu_solve3(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting for a 3x3 system."""
    M = np.array(A, dtype=float)
    y = np.array(b, dtype=float)
    n = 3
    for k in range(n - 1):
        piv = k + int(np.argmax(np.abs(M[k:, k])))
        if M[piv, k] == 0.0:
            raise InvalidState("singular 3x3 system")
        if piv != k:
            M[[k, piv]] = M[[piv, k]]
            y[[k, piv]] = y[[piv, k]]
        for i in range(k + 1, n):
            f = M[i, k] / M[k, k]
            M[i, k:] -= f * M[k, k:]
            y[i] -= f * y[k]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - M[i, i + 1:] @ x[i + 1:]) / M[i, i]
    return x


@dataclass(frozen=True)
class MassDecomposition:
    theta_bar_1: float
    theta_bar_2: float
    theta_bar_3: float
    excess: np.ndarray

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([self.theta_bar_1, self.theta_bar_2, self.theta_bar_3])


def decompose_mass(excess, eig: EndpointEigen) -> MassDecomposition:
    """Solve excess = t1 r1- + t2 (m+ - m-) + t3 r3+."""
    excess = np.asarray(excess, dtype=float)
    det = eig.determinant
    if abs(det) <= DET_MIN:
        if not np.any(eig.m_jump):
            # no contact jump: the middle direction is absent, decompose on {r1, r3} in the
            # (v, u) plane and require the rest to be consistent
            B = np.column_stack([eig.r1_minus, eig.r3_plus])
            coef, *_ = np.linalg.lstsq(B, excess, rcond=None)
            if np.linalg.norm(B @ coef - excess) > 1e-10 * max(1.0, np.linalg.norm(excess)):
                raise InvalidState(f"excess mass not representable without a contact jump (det = {det:.3e})")
            return MassDecomposition(float(coef[0]), 0.0, float(coef[1]), excess)
        raise InvalidState(f"near-singular characteristic basis, det = {det:.3e}")
    t1, t2, t3 = lu_solve3(eig.basis, excess)
    dec = MassDecomposition(float(t1), float(t2), float(t3), excess)
    recon = eig.basis @ dec.coefficients
    if np.linalg.norm(recon - excess) > 1e-10 * max(1.0, np.linalg.norm(excess)):
        raise InvalidState("mass decomposition failed to reconstruct the excess")
    return dec


def decomposition_report(dec: MassDecomposition, eig: EndpointEigen) -> str:
    fmt = lambda v: " ".join(f"{x:+.12e}" for x in v)
    lines = [
        f"excess        {fmt(dec.excess)}",
        f"r1_minus      {fmt(eig.r1_minus)}",
        f"m_jump        {fmt(eig.m_jump)}",
        f"r3_plus       {fmt(eig.r3_plus)}",
        f"coefficients  {fmt(dec.coefficients)}",
        f"determinant   {eig.determinant:+.12e}",
    ]
    return "\n".join(lines) + "\n"
