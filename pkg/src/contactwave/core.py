"""Grids, fields, quadrature, finite differences and norms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from contactwave.errors import InvalidArgument

MIN_NODES = 16


@dataclass(frozen=True)
class GasModel:
    """Ideal polytropic gas with viscosity ``mu`` and heat conductivity ``kappa``."""

    R: float = 1.0
    gamma: float = 5.0 / 3.0
    mu: float = 1.0
    kappa: float = 1.0
    A_const: float = 1.0

    def __post_init__(self):
        for name in ("R", "mu", "kappa", "A_const"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive, got {getattr(self, name)}")
        if not self.gamma > 1:
            raise InvalidArgument(f"gamma must exceed 1, got {self.gamma}")

    def pressure(self, v, theta):
        return self.R * np.asarray(theta) / np.asarray(v)

    def diffusion_coefficient(self, p_plus: float) -> float:
        """Coefficient ``a`` of the nonlinear heat equation driving the contact layer."""
        return self.kappa * p_plus * (self.gamma - 1.0) / (self.gamma * self.R**2)

    @property
    def heat_speed(self) -> float:
        # kappa (gamma-1) / (gamma R): prefactor of u_bar = u_- + c Theta_x / Theta
        return self.kappa * (self.gamma - 1.0) / (self.gamma * self.R)


@dataclass(frozen=True)
class EndStates:
    """Far-field states of a contact discontinuity (equal pressure on both sides)."""

    v_minus: float
    v_plus: float
    theta_minus: float
    theta_plus: float
    u_minus: float = 0.0

    def __post_init__(self):
        for name in ("v_minus", "v_plus", "theta_minus", "theta_plus"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")

    @classmethod
    def matched(cls, gas: GasModel, theta_minus: float, theta_plus: float,
                pressure: float = 1.0, u_minus: float = 0.0) -> "EndStates":
        """Build end states with ``p_- = p_+ = pressure``."""
        return cls(gas.R * theta_minus / pressure, gas.R * theta_plus / pressure,
                   theta_minus, theta_plus, u_minus)

    @property
    def delta(self) -> float:
        return abs(self.theta_plus - self.theta_minus)

    def p_minus(self, gas: GasModel) -> float:
        return gas.R * self.theta_minus / self.v_minus

    def p_plus(self, gas: GasModel) -> float:
        return gas.R * self.theta_plus / self.v_plus

    def validate(self, gas: GasModel) -> None:
        pm, pp = self.p_minus(gas), self.p_plus(gas)
        if abs(pm - pp) > 1e-12 * max(abs(pm), abs(pp)):
            raise InvalidArgument(f"end states are not pressure matched: p- = {pm}, p+ = {pp}")


@dataclass(frozen=True)
class Grid1D:
    half_width: float
    n_nodes: int
    nodes: np.ndarray = field(repr=False, compare=False)
    dx: float

    def __eq__(self, other):
        return (isinstance(other, Grid1D) and self.n_nodes == other.n_nodes
                and self.half_width == other.half_width)

    def __hash__(self):
        return hash((self.half_width, self.n_nodes))

    @property
    def x(self) -> np.ndarray:
        return self.nodes

    def field(self, values) -> "Field":
        return Field(np.asarray(values, dtype=float), self)


def make_grid(L: float, n: int) -> Grid1D:
    """Uniform grid of ``n`` nodes on ``[-L, L]``, ``dx = 2L/(n-1)``.

    Quadrature-only grids may be as small as 3 nodes; anything that takes
    derivatives or runs the solver goes through :func:`make_simulation_grid`.
    """
    if not L > 0:
        raise InvalidArgument(f"half width must be positive, got {L}")
    if n < 3:
        raise InvalidArgument(f"need at least 3 nodes, got {n}")
    nodes = np.linspace(-L, L, n)
    # exact symmetry about 0
    nodes = 0.5 * (nodes - nodes[::-1])
    return Grid1D(float(L), int(n), nodes, 2.0 * L / (n - 1))


def make_simulation_grid(L: float, n: int) -> Grid1D:
    if n < MIN_NODES:
        raise InvalidArgument(f"simulation grids need at least {MIN_NODES} nodes, got {n}")
    return make_grid(L, n)


@dataclass(frozen=True)
class Field:
    values: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes,):
            raise InvalidArgument(
                f"field has {vals.size} values for a grid of {self.grid.n_nodes} nodes")
        if not np.all(np.isfinite(vals)):
            raise InvalidArgument("field contains non-finite values")
        object.__setattr__(self, "values", vals)

    def __add__(self, other):
        return Field(self.values + _vals(other), self.grid)

    def __sub__(self, other):
        return Field(self.values - _vals(other), self.grid)

    def __mul__(self, c):
        return Field(self.values * _vals(c), self.grid)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(-self.values, self.grid)


def _vals(obj):
    return obj.values if isinstance(obj, Field) else obj


# -- array kernels -----------------------------------------------------------

def cumtrapz(values: np.ndarray, dx: float) -> np.ndarray:
    """Running composite trapezoid integral from the left end (0 at node 0)."""
    values = np.asarray(values, dtype=float)
    out = np.empty_like(values)
    out[0] = 0.0
    np.cumsum(0.5 * dx * (values[1:] + values[:-1]), out=out[1:])
    return out


def trapz(values: np.ndarray, dx: float) -> float:
    values = np.asarray(values, dtype=float)
    return float(dx * (values.sum(axis=-1) - 0.5 * (values[..., 0] + values[..., -1])))


def fd(values: np.ndarray, dx: float, order: int = 1) -> np.ndarray:
    """Second-order central differences, one-sided second order at the ends."""
    f = np.asarray(values, dtype=float)
    if f.shape[-1] < 5:
        raise InvalidArgument("finite differences need at least 5 nodes")
    out = np.empty_like(f)
    if order == 1:
        out[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * dx)
        out[..., 0] = (-3.0 * f[..., 0] + 4.0 * f[..., 1] - f[..., 2]) / (2.0 * dx)
        out[..., -1] = (3.0 * f[..., -1] - 4.0 * f[..., -2] + f[..., -3]) / (2.0 * dx)
    elif order == 2:
        h2 = dx * dx
        out[..., 1:-1] = (f[..., 2:] - 2.0 * f[..., 1:-1] + f[..., :-2]) / h2
        out[..., 0] = (2.0 * f[..., 0] - 5.0 * f[..., 1] + 4.0 * f[..., 2] - f[..., 3]) / h2
        out[..., -1] = (2.0 * f[..., -1] - 5.0 * f[..., -2] + 4.0 * f[..., -3] - f[..., -4]) / h2
    else:
        raise InvalidArgument(f"unsupported derivative order {order}")
    return out


def fd4(values: np.ndarray, dx: float) -> np.ndarray:
    """Fourth-order first derivative, one-sided fourth order at two nodes per end."""
    f = np.asarray(values, dtype=float)
    if f.shape[-1] < 5:
        raise InvalidArgument("finite differences need at least 5 nodes")
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * dx)
    w = f[:5]
    out[0] = (-25 * w[0] + 48 * w[1] - 36 * w[2] + 16 * w[3] - 3 * w[4]) / (12 * dx)
    out[1] = (-3 * w[0] - 10 * w[1] + 18 * w[2] - 6 * w[3] + w[4]) / (12 * dx)
    w = f[-5:]
    out[-1] = (25 * w[4] - 48 * w[3] + 36 * w[2] - 16 * w[1] + 3 * w[0]) / (12 * dx)
    out[-2] = (3 * w[4] + 10 * w[3] - 18 * w[2] + 6 * w[1] - w[0]) / (12 * dx)
    return out


# -- Field operations --------------------------------------------------------

def antiderivative_from_left(f: Field) -> Field:
    """x -> integral of f from -L to x (composite trapezoid)."""
    return Field(cumtrapz(f.values, f.grid.dx), f.grid)


def norms(f: Field) -> dict:
    vals = f.values
    dx = f.grid.dx
    return {
        "L2": l2(vals, dx),
        "Linf": float(np.max(np.abs(vals))),
        "L1": trapz(np.abs(vals), dx),
    }


def derivative(f: Field, order: int = 1) -> Field:
    if order not in (1, 2):
        raise InvalidArgument(f"unsupported derivative order {order}")
    return Field(fd(f.values, f.grid.dx, order), f.grid)


def l2(values: np.ndarray, dx: float) -> float:
    values = np.asarray(values)
    m = float(np.max(np.abs(values))) if values.size else 0.0
    if m == 0.0:
        return 0.0
    # scaled so tiny or huge fields neither underflow nor overflow when squared
    w = values / m
    return m * float(np.sqrt(trapz(w * w, dx)))
