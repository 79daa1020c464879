"""IMEX finite-difference solver for 1-D Navier-Stokes in Lagrangian coordinates.

    v_t = u_x
    u_t + p_x = mu (u_x / v)_x
    (e + u^2/2)_t + (p u)_x = (kappa theta_x / v + mu u u_x / v)_x

All three fields live on the nodes of a uniform grid.  Convective fluxes are
averaged to the half points (central differences, explicit); the viscous and
heat fluxes are built on the half points with v averaged there and are treated
implicitly.  Time integration uses the ARS(2,2,2) IMEX pair.  Since v has no
diffusion it is always known before the implicit solves, and the implicit
problems are linear: first in u, then in theta once u is known.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded

from contactwave.core import GasModel, Grid1D, make_grid, trapz
from contactwave.errors import InvalidArgument, InvalidState, StepRejected

log = logging.getLogger(__name__)

ARS_GAMMA = 1.0 - 1.0 / np.sqrt(2.0)
ARS_DELTA = 1.0 - 1.0 / (2.0 * ARS_GAMMA)
MAX_HALVINGS = 10
CHECKPOINT_MAGIC = b"CWSIM1"


@dataclass(frozen=True)
class SimState:
    t: float
    v: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        n = self.grid.n_nodes
        for name in ("v", "u", "theta"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise InvalidArgument(f"{name} has shape {arr.shape}, grid has {n} nodes")
            object.__setattr__(self, name, arr)

    def pressure(self, gas: GasModel) -> np.ndarray:
        return gas.R * self.theta / self.v

    def internal_energy(self, gas: GasModel) -> np.ndarray:
        return gas.R * self.theta / (gas.gamma - 1.0)

    def total_energy(self, gas: GasModel) -> np.ndarray:
        return self.internal_energy(gas) + 0.5 * self.u * self.u

    def conserved(self, gas: GasModel) -> np.ndarray:
        """Rows v, u, E."""
        return np.stack([self.v, self.u, self.total_energy(gas)])

    def is_admissible(self) -> bool:
        return bool(np.all(self.v > 0) and np.all(self.theta > 0)
                    and np.all(np.isfinite(self.u)))


@dataclass(frozen=True)
class StepConfig:
    """Step size and CFL bound.

    ``theta_scheme`` is validated for compatibility with one-step theta
    methods; the ARS(2,2,2) pair used by :func:`step` fixes its own implicit
    weights, so the value does not enter the update.
    """

    dt: float
    theta_scheme: float = 0.5
    cfl_max: float = 0.4

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidArgument(f"dt must be positive, got {self.dt}")
        if not 0.5 <= self.theta_scheme <= 1.0:
            raise InvalidArgument(f"theta_scheme must lie in [1/2, 1], got {self.theta_scheme}")
        if not self.cfl_max > 0:
            raise InvalidArgument("cfl_max must be positive")


@dataclass(frozen=True)
class PerturbationSpec:
    """Localized perturbation added to the conserved variables (v, u, theta + (gamma-1)u^2/(2R))."""

    shape: str = "bump"
    amplitudes: tuple = (0.01, 0.01, 0.01)
    width: float = 4.0
    center: float = 0.0

    def __post_init__(self):
        if self.shape not in ("bump", "bump-derivative"):
            raise InvalidArgument(f"unknown perturbation shape {self.shape!r}")
        if len(self.amplitudes) != 3:
            raise InvalidArgument("need three amplitudes (eps_v, eps_u, eps_theta)")
        if not self.width > 0:
            raise InvalidArgument("perturbation width must be positive")

    @property
    def zero_mass(self) -> bool:
        return self.shape == "bump-derivative"

    def profile(self, x: np.ndarray) -> np.ndarray:
        """Unit-mass Gaussian, or its (zero-mass) scaled x-derivative."""
        z = (x - self.center) / self.width
        g = np.exp(-0.5 * z * z) / (self.width * np.sqrt(2.0 * np.pi))
        if self.shape == "bump":
            return g
        return -z * g


def max_char_speed(state: SimState, gas: GasModel) -> float:
    """Largest |characteristic speed| sqrt(gamma p / v) of the Lagrangian system."""
    return float(np.max(np.sqrt(gas.gamma * state.pressure(gas) / state.v)))


def cfl_dt(state: SimState, gas: GasModel, cfl: float = 0.4) -> float:
    return cfl * state.grid.dx / max_char_speed(state, gas)


def initial_data(base, spec: PerturbationSpec, grid: Grid1D, gas: GasModel) -> SimState:
    """Base wave at t = 0 plus the perturbation on the conserved variables.

    ``base`` is a contact wave or an ansatz (anything with v/u/theta arrays
    named ``v_bar, u_bar, theta_bar`` or ``v_tilde, u_tilde, theta_tilde``).
    """
    if base.grid != grid:
        raise InvalidArgument("base wave lives on a different grid")
    if hasattr(base, "v_tilde"):
        v, u, th = base.v_tilde, base.u_tilde, base.theta_tilde
    else:
        v, u, th = base.v_bar, base.u_bar, base.theta_bar
    k = (gas.gamma - 1.0) / (2.0 * gas.R)
    shape = spec.profile(grid.x)
    ev, eu, eth = spec.amplitudes
    v0 = v + ev * shape
    u0 = u + eu * shape
    m3 = th + k * u * u + eth * shape
    th0 = m3 - k * u0 * u0
    if np.any(v0 <= 0) or np.any(th0 <= 0):
        raise InvalidArgument("perturbed initial data lose positivity")
    return SimState(float(getattr(base, "t", 0.0)), v0, u0, th0, grid)


# -- spatial operators --------------------------------------------------------

def _explicit_rhs(v, u, th, dx, gas):
    """Central convective terms at interior nodes (boundary entries are 0)."""
    p = gas.R * th / v
    pu = p * u
    fv = np.zeros_like(v)
    fu = np.zeros_like(v)
    fE = np.zeros_like(v)
    inv = 1.0 / (2.0 * dx)
    fv[1:-1] = (u[2:] - u[:-2]) * inv
    fu[1:-1] = -(p[2:] - p[:-2]) * inv
    fE[1:-1] = -(pu[2:] - pu[:-2]) * inv
    return fv, fu, fE


def _diff_u(u, v, dx, gas):
    vh = 0.5 * (v[1:] + v[:-1])
    flux = gas.mu * (u[1:] - u[:-1]) / (dx * vh)
    out = np.zeros_like(u)
    out[1:-1] = (flux[1:] - flux[:-1]) / dx
    return out


def _diff_E(th, u, v, dx, gas):
    vh = 0.5 * (v[1:] + v[:-1])
    uh = 0.5 * (u[1:] + u[:-1])
    flux = (gas.kappa * (th[1:] - th[:-1]) + gas.mu * uh * (u[1:] - u[:-1])) / (dx * vh)
    out = np.zeros_like(u)
    out[1:-1] = (flux[1:] - flux[:-1]) / dx
    return out


def _tridiag_solve(diag, off_lo, off_hi, rhs):
    n = diag.size
    ab = np.zeros((3, n))
    ab[0, 1:] = off_hi
    ab[1] = diag
    ab[2, :-1] = off_lo
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def _solve_u(rhs, v, a, dx, gas, left, right):
    """(I - a mu D(1/v D)) u = rhs at interior nodes, Dirichlet ends."""
    n = v.size
    w = a * gas.mu / (dx * dx * 0.5 * (v[1:] + v[:-1]))   # half-point coefficients
    diag = np.ones(n)
    lo = np.zeros(n - 1)
    hi = np.zeros(n - 1)
    diag[1:-1] += w[1:] + w[:-1]
    lo[:-1] = -w[:-1]
    hi[1:] = -w[1:]
    b = rhs.copy()
    b[0], b[-1] = left, right
    return _tridiag_solve(diag, lo, hi, b)


def _solve_theta(rhs_E, u, v, a, dx, gas, left, right):
    """Solve E - a D(kappa theta_x/v + mu u u_x/v) = rhs_E for theta with u fixed."""
    n = v.size
    vh = 0.5 * (v[1:] + v[:-1])
    w = a * gas.kappa / (dx * dx * vh)
    cv = gas.R / (gas.gamma - 1.0)
    uh = 0.5 * (u[1:] + u[:-1])
    vis = gas.mu * uh * (u[1:] - u[:-1]) / (dx * vh)
    b = rhs_E - 0.5 * u * u
    b[1:-1] += a * (vis[1:] - vis[:-1]) / dx
    diag = np.full(n, cv)
    diag[0] = diag[-1] = 1.0
    lo = np.zeros(n - 1)
    hi = np.zeros(n - 1)
    diag[1:-1] += w[1:] + w[:-1]
    lo[:-1] = -w[:-1]
    hi[1:] = -w[1:]
    b[0], b[-1] = left, right
    return _tridiag_solve(diag, lo, hi, b)


def boundary_fluxes(state: SimState, gas: GasModel) -> np.ndarray:
    """Discrete fluxes through the first and last interior half points.

    Returns shape (3, 2): rows (v, u, E), columns (left, right), for the form
    q_t + F_x = 0 with F = (-u, p - mu u_x/v, p u - kappa theta_x/v - mu u u_x/v).
    The interior sum dx * sum_{i=1}^{N-2} q_i then changes at rate F_left - F_right.
    """
    v, u, th, dx = state.v, state.u, state.theta, state.grid.dx
    p = gas.R * th / v
    out = np.empty((3, 2))
    for col, (i, j) in enumerate(((0, 1), (-2, -1))):
        vh = 0.5 * (v[i] + v[j])
        uh = 0.5 * (u[i] + u[j])
        ux = (u[j] - u[i]) / dx
        tx = (th[j] - th[i]) / dx
        out[0, col] = -0.5 * (u[i] + u[j])
        out[1, col] = 0.5 * (p[i] + p[j]) - gas.mu * ux / vh
        out[2, col] = 0.5 * (p[i] * u[i] + p[j] * u[j]) - (gas.kappa * tx + gas.mu * uh * ux) / vh
    return out


def interior_integrals(state: SimState, gas: GasModel) -> np.ndarray:
    """dx * sum over interior nodes of (v, u, E)."""
    return state.grid.dx * state.conserved(gas)[:, 1:-1].sum(axis=1)


def drift_scale(state: SimState, gas: GasModel) -> np.ndarray:
    """dx * sum over interior nodes of |(v, u, E)|: the magnitude drifts are measured against.

    A component at round-off level (momentum of fluid at rest) is measured
    against the interior length instead, i.e. as a unit-scale drift.
    """
    dx = state.grid.dx
    sc = dx * np.abs(state.conserved(gas)[:, 1:-1]).sum(axis=1)
    length = dx * (state.grid.n_nodes - 2)
    return np.where(sc > 1e-12 * length, sc, length)


# -- time stepping -------------------------------------------------------------

Boundary = Callable[[float], tuple]
Forcing = Callable[[float, np.ndarray], tuple]


def step(s: SimState, cfg: StepConfig, gas: GasModel, boundary: Boundary | None = None,
         forcing: Forcing | None = None, check_cfl: bool = True) -> SimState:
    """Advance one ARS(2,2,2) step of size cfg.dt.

    ``boundary(t)`` returns the Dirichlet values ((vL, uL, thL), (vR, uR, thR));
    by default the current boundary nodes are kept.  ``forcing(t, x)`` returns
    source terms for the v, u and E equations (used for manufactured solutions).
    Raises StepRejected when v or theta lose positivity.
    """
    dt = cfg.dt
    dx = s.grid.dx
    if check_cfl and dt * max_char_speed(s, gas) / dx > cfg.cfl_max * (1 + 1e-12):
        raise InvalidArgument(
            f"CFL violated: dt = {dt:g} exceeds {cfg.cfl_max} dx / max speed")
    g, d = ARS_GAMMA, ARS_DELTA
    x = s.grid.x

    def bvals(t):
        if boundary is None:
            return (s.v[0], s.u[0], s.theta[0]), (s.v[-1], s.u[-1], s.theta[-1])
        return boundary(t)

    def fexp(v, u, th, t):
        fv, fu, fE = _explicit_rhs(v, u, th, dx, gas)
        if forcing is not None:
            Sv, Su, SE = forcing(t, x)
            fv[1:-1] += Sv[1:-1]
            fu[1:-1] += Su[1:-1]
            fE[1:-1] += SE[1:-1]
        return fv, fu, fE

    v1, u1, th1 = s.v, s.u, s.theta
    E1 = s.total_energy(gas)
    fv1, fu1, fE1 = fexp(v1, u1, th1, s.t)

    # stage 2
    t2 = s.t + g * dt
    (vL, uL, tL), (vR, uR, tR) = bvals(t2)
    v2 = v1 + g * dt * fv1
    v2[0], v2[-1] = vL, vR
    _check_positive(v2, "v", s.t)
    u2 = _solve_u(u1 + g * dt * fu1, v2, g * dt, dx, gas, uL, uR)
    th2 = _solve_theta(E1 + g * dt * fE1, u2, v2, g * dt, dx, gas, tL, tR)
    _check_positive(th2, "theta", s.t)
    gu2 = _diff_u(u2, v2, dx, gas)
    gE2 = _diff_E(th2, u2, v2, dx, gas)
    fv2, fu2, fE2 = fexp(v2, u2, th2, t2)

    # stage 3 (stiffly accurate: final value)
    t3 = s.t + dt
    (vL, uL, tL), (vR, uR, tR) = bvals(t3)
    v3 = v1 + dt * (d * fv1 + (1 - d) * fv2)
    v3[0], v3[-1] = vL, vR
    _check_positive(v3, "v", s.t)
    u3 = _solve_u(u1 + dt * ((1 - g) * gu2 + d * fu1 + (1 - d) * fu2), v3, g * dt, dx, gas, uL, uR)
    th3 = _solve_theta(E1 + dt * ((1 - g) * gE2 + d * fE1 + (1 - d) * fE2), u3, v3, g * dt,
                       dx, gas, tL, tR)
    _check_positive(th3, "theta", s.t)
    if not (np.all(np.isfinite(u3)) and np.all(np.isfinite(th3))):
        raise StepRejected(f"non-finite values after step at t = {s.t:g}")
    return SimState(t3, v3, u3, th3, s.grid)


def _check_positive(arr, name, t):
    if not np.all(arr > 0):
        raise StepRejected(f"{name} lost positivity in step from t = {t:g}")


def step_with_retry(s: SimState, cfg: StepConfig, gas: GasModel, **kw) -> tuple[SimState, int]:
    """Advance by cfg.dt, halving the sub-step on rejection up to MAX_HALVINGS times."""
    for k in range(MAX_HALVINGS + 1):
        n_sub = 2 ** k
        sub = StepConfig(cfg.dt / n_sub, cfg.theta_scheme, cfg.cfl_max)
        try:
            cur = s
            for _ in range(n_sub):
                cur = step(cur, sub, gas, check_cfl=False, **kw)
            return cur, k
        except StepRejected as exc:
            log.info("step rejected (%s); halving dt to %g", exc, sub.dt / 2)
    raise StepRejected(f"step from t = {s.t:g} rejected after {MAX_HALVINGS} halvings")


# -- driver --------------------------------------------------------------------

def output_times(t0: float, t_end: float, rho: float = 1.1, first: float = 0.1) -> np.ndarray:
    """Geometric schedule t_k = (1 + t0) rho^k - 1 (starting from t0 + first), capped at t_end."""
    if rho <= 1:
        raise InvalidArgument("rho must exceed 1")
    times = [t0]
    if t_end <= t0:
        return np.array(times)
    base = 1.0 + t0
    k = int(np.ceil(np.log((base + first) / base) / np.log(rho)))
    while True:
        tk = base * rho**k - 1.0
        if tk >= t_end * (1 - 1e-12):
            break
        if tk > times[-1] + 1e-12:
            times.append(tk)
        k += 1
    times.append(t_end)
    return np.array(times)


Observer = Callable[[SimState], dict]


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    ledger: list = field(default_factory=list)
    flux_integral: list = field(default_factory=list)   # accumulated (3, 2) boundary flux per stored state
    n_steps: int = 0
    n_halvings: int = 0
    dt: float = float("nan")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> SimState:
        return self.states[-1]


def _base_record(s: SimState, gas: GasModel) -> dict:
    m = s.conserved(gas)
    dx = s.grid.dx
    return {"t": s.t, "mass_v": trapz(m[0], dx), "mass_u": trapz(m[1], dx),
            "mass_E": trapz(m[2], dx), "min_v": float(s.v.min()),
            "min_theta": float(s.theta.min())}


def simulate(init: SimState, cfg: StepConfig, t_end: float, gas: GasModel,
             observers: Sequence[Observer] = (), rho: float = 1.1,
             boundary: Boundary | None = None, forcing: Forcing | None = None,
             keep_states: bool = True) -> Trajectory:
    """Integrate to ``t_end`` and record diagnostics.

    With observers, the state is stored and every observer is called at the
    geometric output times; without observers only the endpoints are stored.
    Each stored time adds one ledger row (basic integrals plus whatever the
    observers return).  The accumulated boundary flux (trapezoid rule over
    every step) is stored alongside for :func:`conservation_audit`.
    """
    if not init.is_admissible():
        raise InvalidState("initial state is not admissible")
    if t_end < init.t:
        raise InvalidArgument("t_end precedes the initial time")
    if observers:
        schedule = output_times(init.t, t_end, rho)
    else:
        schedule = np.array([init.t, t_end]) if t_end > init.t else np.array([init.t])
    traj = Trajectory(dt=cfg.dt)

    def record(s, acc):
        row = _base_record(s, gas)
        for obs in observers:
            row.update(obs(s))
        traj.ledger.append(row)
        traj.states.append(s if keep_states or s is init else None)
        traj.flux_integral.append(acc.copy())

    acc = np.zeros((3, 2))
    s = init
    record(s, acc)
    fl_prev = boundary_fluxes(s, gas)
    for t_out in schedule[1:]:
        while s.t < t_out - 1e-12 * max(1.0, t_out):
            h = min(cfg.dt, t_out - s.t)
            s_new, k = step_with_retry(s, StepConfig(h, cfg.theta_scheme, cfg.cfl_max), gas,
                                       boundary=boundary, forcing=forcing)
            if abs(s_new.t - t_out) < 1e-9 * max(1.0, t_out):
                s_new = SimState(float(t_out), s_new.v, s_new.u, s_new.theta, s_new.grid)
            if not s_new.is_admissible():
                raise InvalidState("positivity lost in an accepted step")
            fl = boundary_fluxes(s_new, gas)
            acc += 0.5 * (s_new.t - s.t) * (fl_prev + fl)
            fl_prev = fl
            traj.n_steps += 1
            traj.n_halvings += k
            s = s_new
        record(s, acc)
    if not keep_states:
        traj.states[-1] = s
    return traj


@dataclass(frozen=True)
class DriftReport:
    times: np.ndarray
    drift: np.ndarray        # shape (len(times), 3), relative
    max_relative: np.ndarray


def conservation_audit(traj: Trajectory, gas: GasModel) -> DriftReport:
    """Mismatch of interior integrals against the accumulated boundary flux.

    Relative to the initial magnitude dx * sum |q|, which equals |integral q|
    for the sign-definite v and E and stays meaningful for momentum.
    """
    states = [s for s in traj.states if s is not None]
    if len(states) < 2:
        raise InvalidArgument("conservation audit needs at least two snapshots")
    idx = [i for i, s in enumerate(traj.states) if s is not None]
    q0 = interior_integrals(states[0], gas)
    scale = drift_scale(states[0], gas)
    rows = []
    for i, s in zip(idx, states):
        acc = traj.flux_integral[i] - traj.flux_integral[idx[0]]
        dq = interior_integrals(s, gas) - q0
        rows.append(np.abs(dq - (acc[:, 0] - acc[:, 1])) / scale)
    drift = np.array(rows)
    return DriftReport(np.array([s.t for s in states]), drift, drift.max(axis=0))


def domain_half_width(lambda3_plus: float, t_end: float, lambda1_minus: float | None = None) -> float:
    """Smallest L keeping both diffusion waves 20 sqrt(1+t_end) inside the domain."""
    lam = max(abs(lambda3_plus), abs(lambda1_minus or 0.0))
    return lam * (1.0 + t_end) + 20.0 * np.sqrt(1.0 + t_end)


# -- I/O ---------------------------------------------------------------------

def dump_state(s: SimState, path) -> None:
    np.savetxt(path, np.column_stack([s.grid.x, s.v, s.u, s.theta]), fmt="%.17e",
               header=f"t={s.t!r}\nx v u theta")


def write_checkpoint(s: SimState, path) -> None:
    """Little-endian: b"CWSIM1", u64 n, f64 t, f64 half_width, f64[n] v, u, theta."""
    n = s.grid.n_nodes
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<Qdd", n, s.t, s.grid.half_width))
        for arr in (s.v, s.u, s.theta):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_checkpoint(path) -> SimState:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:6] != CHECKPOINT_MAGIC:
        raise InvalidArgument(f"{path}: not a checkpoint file")
    n, t, L = struct.unpack_from("<Qdd", data, 6)
    off = 6 + struct.calcsize("<Qdd")
    if len(data) != off + 24 * n:
        raise InvalidArgument(f"{path}: truncated checkpoint ({len(data)} bytes for n = {n})")
    arrs = np.frombuffer(data, dtype="<f8", count=3 * n, offset=off).reshape(3, n)
    grid = make_grid(L, int(n))
    return SimState(t, arrs[0].copy(), arrs[1].copy(), arrs[2].copy(), grid)
