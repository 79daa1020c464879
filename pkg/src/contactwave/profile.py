"""Self-similar solution of the nonlinear heat equation Theta_t = a (Theta_x/Theta)_x.

With xi = x / sqrt(1+t) the profile solves the boundary value problem

    -(xi/2) Theta' = a (Theta'/Theta)' ,   Theta(-inf) = theta_-, Theta(+inf) = theta_+

which is truncated to [-Xi, Xi] and solved by damped Newton on a fourth-order
central-difference discretisation of ``a (ln Theta)'' + (xi/2) Theta' = 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import cumulative_simpson, simpson
from scipy.interpolate import CubicHermiteSpline
from scipy.sparse.linalg import spsolve

from contactwave.core import EndStates, GasModel, fd4
from contactwave.errors import InvalidArgument, SolverFailure

log = logging.getLogger(__name__)

DEFAULT_XI = 12.0
DEFAULT_NODES = 4801


@dataclass(frozen=True)
class ProfileTable:
    xi_grid: np.ndarray
    theta_hat: np.ndarray
    dtheta: np.ndarray
    ddtheta: np.ndarray
    a_coef: float
    theta_minus: float
    theta_plus: float
    newton_residual: float = 0.0
    gauss_c1: float = float("nan")
    gauss_c2: float = float("nan")
    d3theta: np.ndarray = field(default=None, repr=False)
    _splines: tuple = field(default=None, repr=False, compare=False)

    @property
    def Xi(self) -> float:
        return float(self.xi_grid[-1])

    @property
    def delta(self) -> float:
        return abs(self.theta_plus - self.theta_minus)

    @property
    def h(self) -> float:
        return float(self.xi_grid[1] - self.xi_grid[0])

    def with_gauss(self, c1: float, c2: float) -> "ProfileTable":
        return ProfileTable(self.xi_grid, self.theta_hat, self.dtheta, self.ddtheta,
                            self.a_coef, self.theta_minus, self.theta_plus,
                            self.newton_residual, c1, c2, self.d3theta, self._splines)

    def dump(self, path) -> None:
        """Write the table as whitespace-separated columns xi, Theta, Theta', Theta''."""
        data = np.column_stack([self.xi_grid, self.theta_hat, self.dtheta, self.ddtheta])
        header = (f"a={self.a_coef!r} theta_minus={self.theta_minus!r} "
                  f"theta_plus={self.theta_plus!r}\nxi theta_hat dtheta ddtheta")
        np.savetxt(path, data, header=header, fmt="%.17e")


# -- finite-difference operators on the similarity grid ----------------------

def _stencil_matrices(n: int, h: float):
    """First/second derivative matrices (rows 1..n-2), 4th order inside, 2nd order next to the ends."""
    rows1, cols1, vals1 = [], [], []
    rows2, cols2, vals2 = [], [], []
    for i in range(1, n - 1):
        if 2 <= i <= n - 3:
            c1 = {-2: 1.0, -1: -8.0, 1: 8.0, 2: -1.0}
            c2 = {-2: -1.0, -1: 16.0, 0: -30.0, 1: 16.0, 2: -1.0}
            s1, s2 = 12.0 * h, 12.0 * h * h
        else:
            c1 = {-1: -1.0, 1: 1.0}
            c2 = {-1: 1.0, 0: -2.0, 1: 1.0}
            s1, s2 = 2.0 * h, h * h
        for k, c in c1.items():
            rows1.append(i - 1), cols1.append(i + k), vals1.append(c / s1)
        for k, c in c2.items():
            rows2.append(i - 1), cols2.append(i + k), vals2.append(c / s2)
    D1 = sp.csr_matrix((vals1, (rows1, cols1)), shape=(n - 2, n))
    D2 = sp.csr_matrix((vals2, (rows2, cols2)), shape=(n - 2, n))
    return D1, D2


def _residual(theta, xi, a, D1, D2):
    return a * (D2 @ np.log(theta)) + 0.5 * xi[1:-1] * (D1 @ theta)


def _newton(theta0, xi, a, D1, D2, tol, max_iter):
    theta = theta0.copy()
    F = _residual(theta, xi, a, D1, D2)
    res = np.max(np.abs(F))
    half_xi = sp.diags(0.5 * xi[1:-1])
    for _ in range(max_iter):
        if res <= tol:
            return theta, res, True
        J = (a * D2 @ sp.diags(1.0 / theta) + half_xi @ D1)[:, 1:-1].tocsc()
        step = spsolve(J, -F)
        lam = 1.0
        while lam > 1e-6:
            trial = theta.copy()
            trial[1:-1] += lam * step
            if np.all(trial > 0):
                Ft = _residual(trial, xi, a, D1, D2)
                rt = np.max(np.abs(Ft))
                if rt < res or rt <= tol:
                    theta, F, res = trial, Ft, rt
                    break
            lam *= 0.5
        else:
            return theta, res, False
    return theta, res, res <= tol


def solve_profile(gas: GasModel, ends: EndStates, Xi: float = DEFAULT_XI,
                  n: int = DEFAULT_NODES, tol: float = 1e-10, max_iter: int = 60,
                  continuation_steps: int = 8) -> ProfileTable:
    """Solve the similarity BVP for the contact-layer temperature profile."""
    if Xi < 8:
        raise InvalidArgument(f"cutoff Xi must be at least 8, got {Xi}")
    if n < 9:
        raise InvalidArgument("profile grid too coarse")
    ends.validate(gas)
    p_plus = ends.p_plus(gas)
    a = gas.diffusion_coefficient(p_plus)
    tm, tp = ends.theta_minus, ends.theta_plus
    xi = np.linspace(-Xi, Xi, n)
    xi = 0.5 * (xi - xi[::-1])
    h = xi[1] - xi[0]

    if tm == tp:
        theta = np.full(n, float(tm))
        res = 0.0
    else:
        D1, D2 = _stencil_matrices(n, h)
        scale = max(abs(tm), abs(tp))
        ramp = tm + (tp - tm) * (xi + Xi) / (2 * Xi)
        theta, res, ok = _newton(ramp, xi, a, D1, D2, tol * scale, max_iter)
        if not ok:
            log.info("Newton from linear ramp failed (residual %.3e); continuing in the jump", res)
            theta = np.full(n, float(tm))
            for k in range(1, continuation_steps + 1):
                tp_k = tm + (tp - tm) * k / continuation_steps
                guess = tm + (theta - tm) * (tp_k - tm) / (theta[-1] - tm) if k > 1 else (
                    tm + (tp_k - tm) * (xi + Xi) / (2 * Xi))
                guess[0], guess[-1] = tm, tp_k
                theta, res, ok = _newton(guess, xi, a, D1, D2, tol * scale, max_iter)
                if not ok:
                    raise SolverFailure(
                        f"profile Newton iteration failed at continuation step {k}", residual=res)

    if tm != tp:
        # flat tails carry round-off wiggles and ~1e-14 undershoots of the discrete solve;
        # project onto a monotone sequence within the range tolerance of _check_table
        # (larger reversals are left for it to reject)
        mono = np.maximum.accumulate(theta) if tp > tm else np.minimum.accumulate(theta)
        if np.max(np.abs(mono - theta)) <= 1e-12 * max(abs(tm), abs(tp)):
            theta = np.clip(mono, min(tm, tp), max(tm, tp))

    if tm == tp:
        dtheta = np.zeros(n)
        ddtheta = np.zeros(n)
        d3theta = np.zeros(n)
    else:
        dtheta, ddtheta, d3theta = _derivatives(theta, xi, a, tp - tm)
    table = ProfileTable(xi, theta, dtheta, ddtheta, a, float(tm), float(tp), float(res),
                         d3theta=d3theta)
    _check_table(table)
    return _attach_splines(table)


def _derivatives(theta, xi, a, jump):
    """First three derivatives of Theta from the first integral of the profile equation.

    With q = (ln Theta)' the equation reads a q' = -(xi/2) Theta q, so
    q(xi) = q0 exp(-I(xi) / (2a)) with I the integral of s Theta(s) from 0 to xi,
    and q0 is fixed by requiring Theta' to integrate to theta_+ - theta_-.
    This keeps Theta' strictly signed and accurate in the tails, where
    differencing Theta only returns round-off.
    """
    mid = xi.size // 2
    expo = cumulative_simpson(xi * theta, x=xi, initial=0.0)
    expo = -(expo - expo[mid]) / (2.0 * a)
    q0 = jump / simpson(theta * np.exp(expo), x=xi)
    q = q0 * np.exp(expo)
    qp = -xi * theta * q / (2.0 * a)
    d1 = theta * q
    d2 = d1 * q + theta * qp
    qpp = -((theta + xi * d1) * q + xi * theta * qp) / (2.0 * a)
    d3 = d2 * q + 2.0 * d1 * qp + theta * qpp
    return d1, d2, d3


def _check_table(p: ProfileTable) -> None:
    lo, hi = min(p.theta_minus, p.theta_plus), max(p.theta_minus, p.theta_plus)
    if p.theta_plus != p.theta_minus:
        s = np.sign(p.theta_plus - p.theta_minus)
        # flat tails are constant to round-off; only resolvable slopes carry a sign
        noise = 1e-12 * p.delta / p.h
        if np.any(s * p.dtheta < -noise) or np.any(s * np.diff(p.theta_hat) < -1e-14 * hi):
            raise SolverFailure("profile is not monotone", residual=p.newton_residual)
    tol = 1e-12 * hi
    if p.theta_hat.min() < lo - tol or p.theta_hat.max() > hi + tol:
        raise SolverFailure("profile leaves the range of the end states")


def monotone_violations(p: ProfileTable) -> int:
    """Nodes whose slope sign disagrees with sign(theta_+ - theta_-).

    Tail nodes where Theta equals its far-field value to round-off are exempt.
    """
    if p.theta_plus == p.theta_minus:
        return int(np.count_nonzero(p.dtheta))
    s = np.sign(p.theta_plus - p.theta_minus)
    far = np.where(p.xi_grid < 0, p.theta_minus, p.theta_plus)
    resolved = np.abs(p.theta_hat - far) > 1e-10 * p.delta
    return int(np.count_nonzero(resolved & (s * p.dtheta <= 0)))


def _monotone_slopes(y, m, h):
    """Fritsch-Carlson limiting of Hermite slopes; inactive for a well resolved profile."""
    m = m.copy()
    delta = np.diff(y) / h
    flat = delta == 0
    m[:-1][flat] = 0.0
    m[1:][flat] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(flat, 0.0, m[:-1] / delta)
        beta = np.where(flat, 0.0, m[1:] / delta)
    m[:-1][alpha < 0] = 0.0
    m[1:][beta < 0] = 0.0
    r2 = alpha**2 + beta**2
    big = r2 > 9.0
    if np.any(big):
        tau = 3.0 / np.sqrt(r2[big])
        idx = np.nonzero(big)[0]
        m[idx] = tau * alpha[big] * delta[big]
        m[idx + 1] = tau * beta[big] * delta[big]
    return m


def _attach_splines(p: ProfileTable) -> ProfileTable:
    xi = p.xi_grid
    s0 = CubicHermiteSpline(xi, p.theta_hat, _monotone_slopes(p.theta_hat, p.dtheta, p.h))
    s1 = CubicHermiteSpline(xi, p.dtheta, p.ddtheta)
    s2 = CubicHermiteSpline(xi, p.ddtheta, p.d3theta)
    object.__setattr__(p, "_splines", (s0, s1, s2))
    return p


def sample_xi(p: ProfileTable, xi):
    """Theta, Theta', Theta'' at similarity coordinates ``xi``."""
    if p._splines is None:
        _attach_splines(p)
    xi = np.asarray(xi, dtype=float)
    s0, s1, s2 = p._splines
    inside = np.abs(xi) <= p.Xi
    th = np.where(xi < 0, p.theta_minus, p.theta_plus).astype(float)
    d1 = np.zeros_like(xi)
    d2 = np.zeros_like(xi)
    if np.any(inside):
        xs = xi[inside]
        th[inside] = s0(xs)
        d1[inside] = s1(xs)
        d2[inside] = s2(xs)
    return th, d1, d2


def sample_profile(p: ProfileTable, x, t: float):
    """Return (Theta, Theta_x, Theta_xx, Theta_t) at positions ``x`` and time ``t``."""
    if t < 0:
        raise InvalidArgument(f"time must be non-negative, got {t}")
    s = np.sqrt(1.0 + t)
    xi = np.asarray(x, dtype=float) / s
    th, d1, d2 = sample_xi(p, xi)
    return th, d1 / s, d2 / (1.0 + t), -xi * d1 / (2.0 * (1.0 + t))


def ode_residual(p: ProfileTable) -> np.ndarray:
    """Residual of -(xi/2)Theta' - a(Theta''/Theta - Theta'^2/Theta^2) on the stored nodes.

    Derivatives are fourth-order differences of Theta itself and the equation
    is used in its expanded (product-rule) form, so the check is independent of
    both the log-Laplacian form the Newton solver discretises and the
    first-integral derivatives stored in the table.
    """
    th = p.theta_hat
    d1 = fd4(th, p.h)
    d2 = fd4(d1, p.h)
    return -0.5 * p.xi_grid * d1 - p.a_coef * (d2 / th - (d1 / th) ** 2)


def bound_lhs(p: ProfileTable, xi) -> np.ndarray:
    """(1+t)|Theta_xx| + (1+t)^(1/2)|Theta_x| + |Theta - theta_+-| written in xi (t drops out)."""
    th, d1, d2 = sample_xi(p, xi)
    far = np.where(np.asarray(xi) < 0, p.theta_minus, p.theta_plus)
    return np.abs(d2) + np.abs(d1) + np.abs(th - far)


def verify_gaussian_bounds(p: ProfileTable, x_lattice=None, t_lattice=(0.0, 1.0, 10.0, 99.0),
                           c2_candidates=None, growth_cap: float = 10.0):
    """Fit constants of the bound LHS(x,t) <= c1 delta exp(-c2 x^2/(1+t)) on an (x,t) lattice.

    For every candidate c2 the smallest admissible c1 is the lattice maximum of
    LHS exp(c2 x^2/(1+t)) / delta.  The reported c2 is the largest candidate
    whose c1 stays within ``growth_cap`` times the c1 of the smallest candidate.
    Lattice points where LHS is at round-off level are skipped.

    Returns ``(c1_fit, c2_fit, passed)``.
    """
    delta = p.delta
    if delta == 0:
        return 0.0, float("inf"), True
    if x_lattice is None:
        x_lattice = np.linspace(-120.0, 120.0, 9601)
    if c2_candidates is None:
        c2_candidates = np.logspace(-3, 1, 161)
    x = np.asarray(x_lattice, dtype=float)
    xis, lhs = [], []
    for t in t_lattice:
        xi = x / np.sqrt(1.0 + t)
        xis.append(xi)
        lhs.append(bound_lhs(p, xi))
    xi = np.concatenate(xis)
    lhs = np.concatenate(lhs) / delta
    keep = lhs > 1e-10
    xi, lhs = xi[keep], lhs[keep]
    if xi.size == 0:
        return 0.0, float("inf"), True
    logc1 = np.array([np.max(np.log(lhs) + c2 * xi**2) for c2 in c2_candidates])
    ok = logc1 <= logc1[0] + np.log(growth_cap)
    best = np.nonzero(ok)[0].max()
    c1, c2 = float(np.exp(logc1[best])), float(c2_candidates[best])
    passed = bool(np.isfinite(c1) and c2 > 0)
    return c1, c2, passed
