"""Decay-rate fits, theorem verdicts, experiment configuration and the run pipeline."""

from __future__ import annotations

import configparser
import csv
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from contactwave.core import EndStates, GasModel, make_simulation_grid, trapz
from contactwave.diagnostics import (NONZERO, ZERO, AprioriTracker, EnergyConstants,
                                     a4_entries, a4_matrix, diagonal_frame, dissipation_form,
                                     eigen_matrices, energy_constants_for, heat_identity_errors,
                                     perturbation_fields, perturbation_norms, poincare_audit,
                                     poincare_integrands, viscosity_matrix, weighted_energies)
from contactwave.errors import (ConfigError, ContactWaveError, IllConditioned, InvalidArgument,
                                SolverFailure, StepRejected)
from contactwave.massdecomp import (decompose_mass, decomposition_report, endpoint_eigen,
                                    excess_mass, flux_jacobian)
from contactwave.profile import solve_profile, verify_gaussian_bounds
from contactwave.solver import (PerturbationSpec, StepConfig, cfl_dt, domain_half_width,
                                drift_scale, dump_state, initial_data, interior_integrals, simulate,
                                write_checkpoint)
from contactwave.waves import WaveModel, dump_snapshot

log = logging.getLogger(__name__)

MIN_FIT_SAMPLES = 10
Q_GAIN_MAX = 200.0          # noise-to-q amplification above which (p, q) fits are refused
BAND = 0.15
NONZERO_TARGETS = {"L2": 0.25, "DL2": 0.75, "Linf": 0.5}
ZERO_TARGETS = {"L2": (0.5, 0.5), "DL2": (1.0, 0.5), "Linf": (0.75, 0.5)}

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


# -- fitting -------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    p: float
    q: float
    intercept: float
    t_lo: float
    t_hi: float
    residual: float          # max |ln y - model|
    rms: float
    n_samples: int
    condition: float = 1.0

    def model(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.exp(self.intercept - self.p * np.log1p(t) + self.q * np.log(np.log(2.0 + t)))


def _window(t, y, window):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape:
        raise InvalidArgument("t and y differ in length")
    lo, hi = window if window is not None else (t.min(), t.max())
    m = (t >= lo) & (t <= hi)
    if m.sum() < MIN_FIT_SAMPLES:
        raise InvalidArgument(f"fit window [{lo:g}, {hi:g}] holds {int(m.sum())} samples, "
                              f"need {MIN_FIT_SAMPLES}")
    if np.any(~(y[m] > 0)):
        raise InvalidArgument("fit needs positive values")
    return t[m], y[m], float(lo), float(hi)


def fit_power(t, y, window=None) -> DecayFit:
    """Least squares of ln y against ln(1+t): y ~ C (1+t)^{-p}."""
    t, y, lo, hi = _window(t, y, window)
    X = np.column_stack([np.ones_like(t), -np.log1p(t)])
    ly = np.log(y)
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    r = ly - X @ coef
    return DecayFit(float(coef[1]), 0.0, float(coef[0]), lo, hi, float(np.max(np.abs(r))),
                    float(np.sqrt(np.mean(r * r))), t.size)


def q_gain(t) -> float:
    """1 / rms of ln ln(2+t) after projecting out span{1, ln(1+t)}: how strongly noise leaks into q."""
    t = np.asarray(t, dtype=float)
    A = np.column_stack([np.ones_like(t), np.log1p(t)])
    z = np.log(np.log(2.0 + t))
    r = z - A @ np.linalg.lstsq(A, z, rcond=None)[0]
    rms = float(np.sqrt(np.mean(r * r)))
    return float("inf") if rms == 0 else 1.0 / rms


def fit_power_log(t, y, window=None, q: float | None = None,
                  max_gain: float = Q_GAIN_MAX) -> DecayFit:
    """Least squares of ln y against {ln(1+t), ln ln(2+t)}: y ~ C (1+t)^{-p} ln^q(2+t).

    With ``q`` given only (C, p) are fitted.  A free q is refused with
    IllConditioned when the window is too short for ln ln(2+t) to be
    distinguishable from ln(1+t) (see :func:`q_gain`).
    """
    t, y, lo, hi = _window(t, y, window)
    ly = np.log(y)
    L1 = np.log1p(t)
    L2 = np.log(np.log(2.0 + t))
    if q is not None:
        X = np.column_stack([np.ones_like(t), -L1])
        coef, *_ = np.linalg.lstsq(X, ly - q * L2, rcond=None)
        r = ly - q * L2 - X @ coef
        return DecayFit(float(coef[1]), float(q), float(coef[0]), lo, hi,
                        float(np.max(np.abs(r))), float(np.sqrt(np.mean(r * r))), t.size)
    gain = q_gain(t)
    if gain > max_gain:
        raise IllConditioned(f"window [{lo:g}, {hi:g}] cannot separate ln(1+t) from ln ln(2+t) "
                             f"(q gain {gain:.1f} > {max_gain:g})", condition_number=gain)
    X = np.column_stack([np.ones_like(t), -L1, L2])
    coef, *_ = np.linalg.lstsq(X, ly, rcond=None)
    r = ly - X @ coef
    return DecayFit(float(coef[1]), float(coef[2]), float(coef[0]), lo, hi,
                    float(np.max(np.abs(r))), float(np.sqrt(np.mean(r * r))), t.size, gain)


# -- theorem verdicts ----------------------------------------------------------------------

@dataclass
class SeriesVerdict:
    name: str
    target_p: float
    target_q: float
    fit: DecayFit | None
    power_fit: DecayFit | None
    log_fit: DecayFit | None
    in_band: bool
    log_preferred: bool
    note: str = ""


@dataclass
class Verdict:
    mode: str
    status: str              # "pass", "fail" or "inconclusive"
    window: tuple
    series: list = field(default_factory=list)
    reasons: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def report(self) -> str:
        lines = [f"mode {self.mode}", f"verdict {self.status}",
                 f"window [{self.window[0]:g}, {self.window[1]:g}]", ""]
        for s in self.series:
            lines.append(f"[{s.name}] target p = {s.target_p:g}, q = {s.target_q:g}")
            for label, f in (("fit", s.fit), ("power", s.power_fit), ("log(q=1/2)", s.log_fit)):
                if f is not None:
                    lines.append(f"  {label:11s} p = {f.p:+.6f} q = {f.q:+.6f} "
                                 f"C = {np.exp(f.intercept):.6e} max resid = {f.residual:.3e} "
                                 f"rms = {f.rms:.3e} n = {f.n_samples}")
            lines.append(f"  in band (+-{BAND}) {s.in_band}; log model preferred {s.log_preferred}")
            if s.note:
                lines.append(f"  note: {s.note}")
        if self.reasons:
            lines.append("")
            lines.extend(f"reason: {r}" for r in self.reasons)
        return "\n".join(lines) + "\n"


def default_window(t_end: float) -> tuple:
    return (max(10.0, t_end / 20.0), t_end)


def verify_theorem(ledger: Sequence[dict], mode: str, band: float = BAND,
                   window: tuple | None = None) -> Verdict:
    """Fit the ledger's norm series and compare with the theorem's rates.

    Nonzero-mass: pure power fits, targets 1/4, 3/4, 1/2; the verdict also
    requires that the ln^{1/2}(2+t)-corrected model does not fit better.
    Zero-mass: free (p, q) fits with p targets 1/2, 1, 3/4; the verdict also
    requires the ln^{1/2}(2+t)-corrected model to beat the pure power model on
    the L2 series.
    """
    t = np.array([r["t"] for r in ledger], dtype=float)
    t_end = float(t.max()) if t.size else 0.0
    win = window or default_window(t_end)
    verdict = Verdict(mode, "pass", win)
    if t.size < 40 or t_end < 500:
        verdict.status = "inconclusive"
        verdict.reasons.append(f"ledger spans t <= {t_end:g} with {t.size} rows "
                               "(need t >= 500 and >= 40 rows)")
        return verdict
    if mode == NONZERO:
        targets = {k: (v, 0.0) for k, v in NONZERO_TARGETS.items()}
    elif mode == ZERO:
        targets = ZERO_TARGETS
    else:
        raise InvalidArgument(f"unknown mode {mode!r}")
    ok = True
    for name, (tp, tq) in targets.items():
        y = np.array([r[name] for r in ledger], dtype=float)
        try:
            pw = fit_power(t, y, win)
            lg = fit_power_log(t, y, win, q=0.5)
        except InvalidArgument as exc:
            verdict.status = "inconclusive"
            verdict.reasons.append(f"{name}: {exc}")
            return verdict
        log_pref = lg.residual < pw.residual
        note = ""
        if mode == NONZERO:
            fit = pw
            good = abs(fit.p - tp) <= band and not log_pref
        else:
            try:
                fit = fit_power_log(t, y, win)
            except IllConditioned as exc:
                verdict.status = "inconclusive"
                verdict.reasons.append(f"{name}: {exc}")
                return verdict
            good = abs(fit.p - tp) <= band
            if name == "L2":
                good = good and log_pref
        in_band = abs(fit.p - tp) <= band
        if not good:
            ok = False
            verdict.reasons.append(
                f"{name}: fitted p = {fit.p:.4f} vs target {tp:g} (band {band:g}); "
                f"log model preferred = {log_pref}")
        verdict.series.append(SeriesVerdict(name, tp, tq, fit, pw, lg, in_band, log_pref, note))
    verdict.status = "pass" if ok else "fail"
    return verdict


# -- configuration -----------------------------------------------------------------------------

def _flag(raw: str) -> bool:
    low = raw.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


_SCHEMA = {
    "gas": {"R": float, "gamma": float, "mu": float, "kappa": float},
    "ends": {"theta_minus": float, "theta_plus": float, "delta": float, "pressure": float,
             "u_minus": float},
    "grid": {"L": float, "N": int},
    "time": {"t_end": float, "cfl": float, "rho": float},
    "perturbation": {"shape": str, "eps": float, "eps_v": float, "eps_u": float,
                     "eps_theta": float, "width": float, "center": str},
    "mode": {"mode": str, "alpha": str, "seed": int, "out_dir": str, "run_identities": _flag},
}


@dataclass(frozen=True)
class ExperimentConfig:
    gas: GasModel = GasModel()
    theta_minus: float = 1.0
    theta_plus: float = 1.1
    pressure: float = 1.0
    u_minus: float = 0.0
    L: float | None = None
    N: int = 8192
    t_end: float = 2000.0
    cfl: float = 0.4
    rho: float = 1.1
    shape: str = "bump"
    amplitudes: tuple = (0.01, 0.01, 0.01)
    width: float = 4.0
    center: float | str = 0.0
    mode: str = NONZERO
    alpha: float | str = "auto"
    seed: int = 0
    out_dir: str | None = None
    run_identities: bool = False

    @property
    def ends(self) -> EndStates:
        return EndStates.matched(self.gas, self.theta_minus, self.theta_plus, self.pressure,
                                 self.u_minus)

    @property
    def delta(self) -> float:
        return abs(self.theta_plus - self.theta_minus)

    def min_half_width(self) -> float:
        eig = endpoint_eigen(self.ends, self.gas)
        return domain_half_width(eig.lambda3_plus, self.t_end, eig.lambda1_minus)

    def half_width(self) -> float:
        return self.L if self.L is not None else self.min_half_width()

    def perturbation(self) -> PerturbationSpec:
        c = self.center
        if c == "random":
            c = float(np.random.default_rng(self.seed).uniform(-self.width, self.width))
        return PerturbationSpec(self.shape, tuple(self.amplitudes), self.width, float(c))

    def validate(self) -> "ExperimentConfig":
        if self.mode not in (NONZERO, ZERO):
            raise ConfigError(f"mode must be '{NONZERO}' or '{ZERO}', got {self.mode!r}")
        if self.mode == ZERO and self.shape != "bump-derivative":
            raise ConfigError("zero-mass mode requires the bump-derivative perturbation shape")
        if self.mode == NONZERO and self.shape != "bump":
            raise ConfigError("nonzero-mass mode requires the bump perturbation shape")
        if self.t_end < 0:
            raise ConfigError("t_end must be non-negative")
        if not (0 < self.cfl <= 1):
            raise ConfigError("cfl must lie in (0, 1]")
        if self.rho <= 1:
            raise ConfigError("rho must exceed 1")
        if self.N < 16:
            raise ConfigError("N must be at least 16")
        if self.center != "random" and not isinstance(self.center, (int, float)):
            raise ConfigError("center must be a number or 'random'")
        if self.alpha != "auto" and not (isinstance(self.alpha, float) and self.alpha > 0):
            raise ConfigError("alpha must be 'auto' or a positive number")
        try:
            self.ends.validate(self.gas)
            L_min = self.min_half_width()
            self.perturbation()
        except ContactWaveError as exc:
            raise ConfigError(str(exc)) from exc
        if self.L is not None and self.L < L_min * (1 - 1e-12):
            raise ConfigError(f"L = {self.L:g} violates the domain rule L >= "
                              f"lambda3+ (1+t_end) + 20 sqrt(1+t_end) = {L_min:.6g}")
        return self


def load_config(path) -> ExperimentConfig:
    """Read an INI-style config with sections [gas] [ends] [grid] [time] [perturbation] [mode]."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    vals: dict = {}
    for sec in cp.sections():
        if sec not in _SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key, raw in cp.items(sec):
            if key not in _SCHEMA[sec]:
                raise ConfigError(f"unknown key '{key}' in [{sec}]")
            typ = _SCHEMA[sec][key]
            try:
                vals[(sec, key)] = typ(raw.strip())
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: cannot parse {raw!r}") from exc
    return config_from_values(vals)


def config_from_values(vals: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    get = lambda sec, key, default: vals.get((sec, key), default)
    try:
        gas = GasModel(get("gas", "R", cfg.gas.R), get("gas", "gamma", cfg.gas.gamma),
                       get("gas", "mu", cfg.gas.mu), get("gas", "kappa", cfg.gas.kappa))
    except ContactWaveError as exc:
        raise ConfigError(str(exc)) from exc
    tm = get("ends", "theta_minus", cfg.theta_minus)
    if ("ends", "theta_plus") in vals and ("ends", "delta") in vals:
        raise ConfigError("give either theta_plus or delta in [ends], not both")
    if ("ends", "delta") in vals:
        tp = tm + vals[("ends", "delta")]
    else:
        tp = get("ends", "theta_plus", cfg.theta_plus if base else tm + 0.1)
    eps = get("perturbation", "eps", None)
    amps = list(cfg.amplitudes) if eps is None else [eps] * 3
    for i, key in enumerate(("eps_v", "eps_u", "eps_theta")):
        amps[i] = get("perturbation", key, amps[i])
    mode = get("mode", "mode", cfg.mode)
    mode = {"zero": ZERO, "nonzero": NONZERO}.get(mode, mode)
    shape = get("perturbation", "shape", None)
    if shape is None:
        shape = "bump-derivative" if mode == ZERO else "bump"
    center = get("perturbation", "center", cfg.center)
    if isinstance(center, str) and center != "random":
        try:
            center = float(center)
        except ValueError as exc:
            raise ConfigError(f"center must be a number or 'random', got {center!r}") from exc
    alpha = get("mode", "alpha", cfg.alpha)
    if isinstance(alpha, str) and alpha != "auto":
        try:
            alpha = float(alpha)
        except ValueError as exc:
            raise ConfigError(f"alpha must be 'auto' or a number, got {alpha!r}") from exc
    out = replace(cfg, gas=gas, theta_minus=tm, theta_plus=tp,
                  pressure=get("ends", "pressure", cfg.pressure),
                  u_minus=get("ends", "u_minus", cfg.u_minus),
                  L=get("grid", "L", cfg.L), N=get("grid", "N", cfg.N),
                  t_end=get("time", "t_end", cfg.t_end), cfl=get("time", "cfl", cfg.cfl),
                  rho=get("time", "rho", cfg.rho), shape=shape, amplitudes=tuple(amps),
                  width=get("perturbation", "width", cfg.width), center=center,
                  mode=mode, alpha=alpha, seed=get("mode", "seed", cfg.seed),
                  out_dir=get("mode", "out_dir", cfg.out_dir),
                  run_identities=get("mode", "run_identities", cfg.run_identities))
    return out.validate()


# -- identity suite ------------------------------------------------------------------------------

def run_identities(gas: GasModel | None = None, n_states: int = 1000, seed: int = 0) -> dict:
    """Algebraic checks of the eigen-structure and the dissipation identity on random states."""
    gas = gas or GasModel()
    rng = np.random.default_rng(seed)
    v_bar = rng.uniform(0.5, 2.0, n_states)
    p_plus = rng.uniform(0.5, 2.0, n_states)
    L, Rm, lam3, A1 = eigen_matrices(v_bar, gas, p_plus)
    I = np.eye(3)
    lr = float(np.max(np.abs(L @ Rm - I)))
    Lam = np.zeros((n_states, 3, 3))
    Lam[:, 0, 0], Lam[:, 2, 2] = -lam3, lam3
    lar = float(np.max(np.abs(L @ A1 @ Rm - Lam)))
    A4_num = L @ viscosity_matrix(v_bar, gas) @ Rm
    a4 = float(np.max(np.abs(A4_num - a4_matrix(v_bar, gas))))
    z = rng.normal(size=(n_states, 3))
    quad = np.einsum("ni,nij,nj->n", z, a4_matrix(v_bar, gas), z)
    form = dissipation_form(z, v_bar, gas)
    ds = float(np.max(np.abs(quad - form) / np.maximum(1.0, np.abs(quad))))
    ends = EndStates.matched(gas, 1.0, 1.1)
    eig = endpoint_eigen(ends, gas)
    Am = flux_jacobian(ends.v_minus, 0.0, ends.theta_minus, gas)
    eig_err = float(np.linalg.norm(Am @ eig.r1_minus - eig.lambda1_minus * eig.r1_minus))
    dec = decompose_mass(np.array([0.1, 0.05, 0.02]), eig)
    recon = float(np.linalg.norm(eig.basis @ dec.coefficients - dec.excess))
    checks = {
        "L_R_identity": (lr, 1e-12),
        "L_A1_R_diagonal": (lar, 1e-10),
        "A4_closed_forms": (a4, 1e-12),
        "dissipation_identity": (ds, 1e-12),
        "dissipation_nonnegative": (float(max(0.0, -form.min())), 0.0),
        "endpoint_eigenpair": (eig_err, 1e-10),
        "mass_decomposition_roundtrip": (recon, 1e-10),
    }
    return {k: {"value": v, "tol": tol, "pass": bool(v <= tol)} for k, (v, tol) in checks.items()}


# -- pipeline ----------------------------------------------------------------------------------

NORM_KEYS = ("L2", "DL2", "Linf")


@dataclass
class RunResult:
    config: ExperimentConfig
    ledger: list
    verdict: Verdict | None
    exit_code: int
    out_dir: Path | None
    runtime: float
    alpha: float | None = None
    constants: EnergyConstants | None = None
    trajectory: object = None
    model: WaveModel | None = None


def ledger_columns(mode: str) -> list:
    cols = ["t", "L2", "DL2", "H1", "phi_xx_L2", "Linf", "Linf_pert", "anti_Linf",
            "Phi_end", "Psi_end", "Wbar_end", "zeta_identity", "n"]
    for k in range(3):
        cols += [f"E_tilde_{k}", f"K_tilde_{k}", f"G_{k}", f"K_{k}", f"E_{k}", f"E_floor_{k}"]
    cols += ["min_a1", "min_a3", "min_dissipation", "N_T", "chi", "delta_bar",
             "mass_v", "mass_u", "mass_E", "drift_v", "drift_u", "drift_E", "min_v", "min_theta"]
    if mode == ZERO:
        cols += ["weighted", "grad", "hess", "h_w", "h_norm", "h_x", "h_g2", "h_ggt"]
    return cols


def write_ledger(rows: Sequence[dict], path, mode: str) -> None:
    cols = ledger_columns(mode)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(float(r[c])) for c in cols])


def read_ledger(path) -> list:
    with open(path) as fh:
        rd = csv.reader(fh, delimiter="\t")
        header = next(rd)
        return [{k: float(v) for k, v in zip(header, row)} for row in rd]


def _prepare(cfg: ExperimentConfig):
    gas, ends = cfg.gas, cfg.ends
    try:
        profile = solve_profile(gas, ends)
    except ContactWaveError as exc:
        raise SolverFailure(f"profile stage: {exc}") from exc
    c1, c2, _ = verify_gaussian_bounds(profile)
    profile = profile.with_gauss(c1, c2)
    eig = endpoint_eigen(ends, gas)
    grid = make_simulation_grid(cfg.half_width(), cfg.N)
    cw0 = WaveModel(profile, gas, ends).contact(grid, 0.0)
    s0 = initial_data(cw0, cfg.perturbation(), grid, gas)
    if cfg.mode == NONZERO:
        dec = decompose_mass(excess_mass(s0, cw0, grid, gas), eig)
        model = WaveModel(profile, gas, ends, dec, shift=dec.theta_bar_2)
    else:
        dec = None
        model = WaveModel(profile, gas, ends)
    return profile, eig, grid, cw0, s0, dec, model


def make_observer(cfg: ExperimentConfig, model: WaveModel, s0, alpha: float | None):
    """Per-snapshot diagnostics returning one ledger row."""
    gas, ends, mode = cfg.gas, cfg.ends, cfg.mode
    grid = s0.grid
    eps = float(max(abs(a) for a in cfg.amplitudes))
    tracker = AprioriTracker(eps, cfg.delta, mode)
    base0 = model.ansatz(grid, 0.0) if mode == NONZERO else model.contact(grid, 0.0)
    cw_init = model.contact(grid, 0.0)
    bv0 = base0.v_tilde if mode == NONZERO else base0.v_bar
    constants = energy_constants_for(bv0, cw_init.v_bar, ends, gas)
    q0 = interior_integrals(s0, gas)
    pp = ends.p_plus(gas)

    def observe(s):
        cw = model.contact(grid, s.t)
        base = model.ansatz(grid, s.t) if mode == NONZERO else cw
        pert = perturbation_fields(s, base, mode, gas)
        row = perturbation_norms(pert, s, cw)
        row.update({"Phi_end": float(pert.Phi[-1]), "Psi_end": float(pert.Psi[-1]),
                    "Wbar_end": float(pert.Wbar[-1]),
                    "zeta_identity": pert.zeta_identity_residual()})
        frame = diagonal_frame(pert, cw, gas, ends)
        we = weighted_energies(frame, pert, cw, ends, gas, constants)
        row.update(we.as_row())
        row["min_dissipation"] = we.min_dissipation
        row.update(tracker.update(s.t, row))
        if mode == ZERO and alpha is not None:
            row.update({k: v for k, v in poincare_integrands(pert, alpha, gas, pp).items()
                        if k != "t"})
        return row

    observe.constants = constants
    observe.q0 = q0
    return observe


def _add_drift(traj, gas, q0, scale):
    for i, (row, s) in enumerate(zip(traj.ledger, traj.states)):
        acc = traj.flux_integral[i]
        q = interior_integrals(s, gas) if s is not None else None
        d = (np.abs(q - q0 - (acc[:, 0] - acc[:, 1])) / scale) if q is not None else [np.nan] * 3
        row.update({"drift_v": float(d[0]), "drift_u": float(d[1]), "drift_E": float(d[2])})


def write_plotdata(rows: Sequence[dict], out: Path, mode: str, window: tuple) -> None:
    """One file per norm: t, value, log10(1+t), log10(value), reference power law."""
    out.mkdir(parents=True, exist_ok=True)
    t = np.array([r["t"] for r in rows])
    for name in NORM_KEYS:
        y = np.array([r[name] for r in rows])
        target = NONZERO_TARGETS[name] if mode == NONZERO else ZERO_TARGETS[name][0]
        q = 0.0 if mode == NONZERO else 0.5
        anchor = int(np.argmin(np.abs(t - window[0])))
        shape = (1 + t) ** -target * np.log(2 + t) ** q
        ref = y[anchor] * shape / shape[anchor]
        with np.errstate(divide="ignore"):
            data = np.column_stack([t, y, np.log10(1 + t), np.log10(y), ref])
        np.savetxt(out / f"{name}.tsv", data, delimiter="\t", fmt="%.10e",
                   header=f"t\t{name}\tlog10_1pt\tlog10_{name}\treference_p{target:g}_q{q:g}",
                   comments="")


def run_experiment(cfg: ExperimentConfig, out_dir=None, keep_trajectory: bool = False) -> RunResult:
    """Full pipeline: profile, decomposition, initial data, simulation, fits, verdict, artifacts."""
    t_start = time.time()
    cfg.validate()
    gas = cfg.gas
    profile, eig, grid, cw0, s0, dec, model = _prepare(cfg)
    alpha = None
    if cfg.mode == ZERO:
        alpha_max = profile.gauss_c2 / 4.0
        if cfg.alpha == "auto":
            alpha = alpha_max
        else:
            alpha = float(cfg.alpha)
            if alpha > alpha_max:
                raise ConfigError(f"alpha = {alpha:g} exceeds c2/4 = {alpha_max:g}")
    observer = make_observer(cfg, model, s0, alpha)
    dt = cfl_dt(s0, gas, cfg.cfl)
    try:
        traj = simulate(s0, StepConfig(dt, cfl_max=cfg.cfl), cfg.t_end, gas, [observer],
                        rho=cfg.rho, keep_states=True)
    except StepRejected as exc:
        raise SolverFailure(f"simulation stage: {exc}") from exc
    _add_drift(traj, gas, observer.q0, drift_scale(s0, gas))
    rows = traj.ledger
    verdict = verify_theorem(rows, cfg.mode) if cfg.t_end > 0 else None
    code = EXIT_PASS if verdict is None or verdict.status != "fail" else EXIT_FAIL
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_ledger(rows, out / "ledger.tsv", cfg.mode)
        snaps = out / "snapshots"
        snaps.mkdir(exist_ok=True)
        keep = sorted({0, len(traj.states) - 1} | set(range(0, len(traj.states), 10)))
        for i in keep:
            s = traj.states[i]
            dump_state(s, snaps / f"state_{i:03d}.txt")
        dump_snapshot(model.ansatz(grid, 0.0), snaps / "waves_000.txt")
        write_checkpoint(traj.final, out / "checkpoint.bin")
        with open(out / "fit_report.txt", "w") as fh:
            fh.write(run_header(cfg, grid, dt, traj, observer.constants, alpha, dec, eig, profile))
            if verdict is not None:
                fh.write("\n" + verdict.report())
                if cfg.mode == ZERO and alpha is not None and len(rows) > 1:
                    fh.write("\n" + audit_report(rows, alpha))
            else:
                fh.write("\nverdict: none (t_end = 0, initial diagnostics only)\n")
        window = default_window(max(cfg.t_end, 1.0))
        if len(rows) > 1:
            write_plotdata(rows, out / "plotdata", cfg.mode, window)
    result = RunResult(cfg, rows, verdict, code, out, time.time() - t_start, alpha,
                       observer.constants, traj if keep_trajectory else None, model)
    return result


def run_header(cfg, grid, dt, traj, constants, alpha, dec, eig, profile) -> str:
    lines = [
        "configuration",
        f"  gas R={cfg.gas.R:g} gamma={cfg.gas.gamma:.12g} mu={cfg.gas.mu:g} kappa={cfg.gas.kappa:g}",
        f"  theta-={cfg.theta_minus:g} theta+={cfg.theta_plus:g} p={cfg.pressure:g} delta={cfg.delta:g}",
        f"  L={grid.half_width:.6f} N={grid.n_nodes} dx={grid.dx:.6f} dt={dt:.6f}",
        f"  t_end={cfg.t_end:g} rho={cfg.rho:g} steps={traj.n_steps} halvings={traj.n_halvings}",
        f"  perturbation {cfg.shape} amplitudes={cfg.amplitudes} width={cfg.width:g} center={cfg.center}",
        f"  profile a={profile.a_coef:.6g} newton residual={profile.newton_residual:.3e} "
        f"gauss c1={profile.gauss_c1:.4g} c2={profile.gauss_c2:.4g}",
        f"  energy constants C_hat={constants.C_hat:.6g} C_bar={constants.C_bar:.6g}",
    ]
    if alpha is not None:
        lines.append(f"  alpha={alpha:.6g}")
    if dec is not None:
        lines.append("mass decomposition")
        lines.extend("  " + ln for ln in decomposition_report(dec, eig).splitlines())
    return "\n".join(lines) + "\n"


def audit_report(rows: Sequence[dict], alpha: float, t_range=(500.0, 2000.0)) -> str:
    aud = poincare_audit(rows, alpha)
    lines = ["poincare audit",
             f"  alpha = {alpha:.6g}",
             f"  sup LHS/(1+RHS) = {aud.sup_ratio:.6e}",
             f"  variation over [{t_range[0]:g}, {t_range[1]:g}] = "
             f"{aud.variation(*t_range):.4f}",
             f"  heat-kernel lemma LHS/RHS at end = {aud.heat_ratio[-1]:.6e} "
             f"(sup {np.nanmax(aud.heat_ratio):.6e})"]
    return "\n".join(lines) + "\n"
