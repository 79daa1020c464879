import subprocess
import sys

import numpy as np
import pytest

from contactwave import harness as hx
from contactwave.cli import main
from contactwave.diagnostics import NONZERO, ZERO
from contactwave.errors import ConfigError, IllConditioned, InvalidArgument
from contactwave.solver import output_times, read_checkpoint

T = output_times(0.0, 2000.0, 1.1)


def test_fit_power_examples():
    t = np.geomspace(1, 1000, 40)
    f = hx.fit_power(t, (1 + t) ** -0.5)
    assert f.p == pytest.approx(0.5, abs=1e-12) and f.residual <= 1e-12
    f = hx.fit_power(t, 3 * (1 + t) ** -0.75)
    assert f.p == pytest.approx(0.75, abs=1e-12)
    assert f.intercept == pytest.approx(np.log(3), abs=1e-12)


def test_fit_power_noise(rng):
    t = np.geomspace(10, 2000, 60)
    for _ in range(20):
        y = (1 + t) ** -0.75 * (1 + 0.01 * rng.normal(size=t.size))
        assert abs(hx.fit_power(t, y).p - 0.75) <= 0.02


def test_fit_window_errors():
    t = np.geomspace(1, 100, 40)
    with pytest.raises(InvalidArgument):
        hx.fit_power(t, np.ones_like(t), window=(90, 100))
    with pytest.raises(InvalidArgument):
        hx.fit_power(t, -np.ones_like(t))
    with pytest.raises(InvalidArgument):
        hx.fit_power(t, np.ones(5))


def test_fit_power_log_examples():
    t = np.geomspace(10, 1e4, 60)
    f = hx.fit_power_log(t, (1 + t) ** -0.5 * np.log(2 + t) ** 0.5)
    assert abs(f.p - 0.5) <= 1e-10 and abs(f.q - 0.5) <= 1e-10
    f = hx.fit_power_log(t, (1 + t) ** -1.0)
    assert abs(f.p - 1) <= 0.02 and abs(f.q) <= 0.02
    f = hx.fit_power_log(t, 2 * (1 + t) ** -0.3, q=0.5)
    assert f.q == 0.5 and f.n_samples == 60


def test_short_window_ill_conditioned():
    t = np.linspace(10, 30, 20)
    with pytest.raises(IllConditioned) as info:
        hx.fit_power_log(t, (1 + t) ** -0.5)
    assert info.value.condition_number > hx.Q_GAIN_MAX


def synthetic(rates, q=0.0):
    return [{"t": t, **{k: (1 + t) ** -p * np.log(2 + t) ** q for k, p in rates.items()}} for t in T]


def test_verdict_exact_rates():
    v = hx.verify_theorem(synthetic(hx.NONZERO_TARGETS), NONZERO)
    assert v.passed and v.window == (100.0, 2000.0)
    for s in v.series:
        assert s.fit.p == pytest.approx(s.target_p, abs=1e-12)
    rates = {k: p for k, (p, _) in hx.ZERO_TARGETS.items()}
    v = hx.verify_theorem(synthetic(rates, 0.5), ZERO)
    assert v.passed
    for s in v.series:
        assert s.fit.p == pytest.approx(s.target_p, abs=1e-10)
        assert s.fit.q == pytest.approx(0.5, abs=1e-10)
    assert "verdict pass" in v.report()


def test_verdict_failures():
    v = hx.verify_theorem(synthetic({"L2": 0.5, "DL2": 0.75, "Linf": 0.5}), NONZERO)
    assert v.status == "fail" and any("L2" in r for r in v.reasons)
    # a log-corrected series at the nonzero rates is not accepted as a pure power
    v = hx.verify_theorem(synthetic(hx.NONZERO_TARGETS, 0.5), NONZERO)
    assert v.status == "fail"
    # zero mass without the logarithm fails the model comparison
    rates = {k: p for k, (p, _) in hx.ZERO_TARGETS.items()}
    assert hx.verify_theorem(synthetic(rates), ZERO).status == "fail"


def test_verdict_inconclusive():
    rows = [r for r in synthetic(hx.NONZERO_TARGETS) if r["t"] <= 400]
    assert hx.verify_theorem(rows, NONZERO).status == "inconclusive"
    rates = {k: p for k, (p, _) in hx.ZERO_TARGETS.items()}
    rows = synthetic(rates, 0.5)
    v = hx.verify_theorem(rows, ZERO, window=(1500.0, 2000.0))
    assert v.status == "inconclusive" and not v.passed


def test_verdict_deterministic():
    rows = synthetic(hx.NONZERO_TARGETS)
    assert hx.verify_theorem(rows, NONZERO).report() == hx.verify_theorem(rows, NONZERO).report()


# -- configuration ---------------------------------------------------------------------

def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_config(tmp_path):
    cfg = hx.load_config(write(tmp_path, """
[gas]
gamma = 1.4
[ends]
theta_minus = 1.0
delta = 0.2
[time]
t_end = 50
[perturbation]
eps = 0.02
[mode]
mode = zero
seed = 3
"""))
    assert cfg.gas.gamma == 1.4 and cfg.theta_plus == pytest.approx(1.2)
    assert cfg.mode == ZERO and cfg.shape == "bump-derivative"
    assert cfg.amplitudes == (0.02, 0.02, 0.02) and cfg.seed == 3
    assert cfg.half_width() == pytest.approx(cfg.min_half_width())


@pytest.mark.parametrize("text", [
    "[grid]\nM = 3\n",
    "[colour]\nred = 1\n",
    "[mode]\nmode = zero\n[perturbation]\nshape = bump\n",
    "[mode]\nmode = nonzero\n[perturbation]\nshape = bump-derivative\n",
    "[grid]\nL = 100\n",
    "[time]\nt_end = abc\n",
    "[ends]\ntheta_plus = 1.2\ndelta = 0.2\n",
    "[mode]\nmode = sideways\n",
    "[time]\nrho = 1.0\n",
])
def test_config_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        hx.load_config(write(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        hx.load_config(tmp_path / "nope.ini")


def test_random_center_is_seeded():
    a = hx.config_from_values({("perturbation", "center"): "random", ("mode", "seed"): 5})
    b = hx.config_from_values({("perturbation", "center"): "random", ("mode", "seed"): 5})
    assert a.perturbation().center == b.perturbation().center
    assert abs(a.perturbation().center) <= a.width


def test_identity_suite():
    res = hx.run_identities()
    assert set(res) >= {"L_R_identity", "L_A1_R_diagonal", "dissipation_identity"}
    assert all(r["pass"] for r in res.values())


# -- pipeline ------------------------------------------------------------------------

def small(**kw):
    vals = {("grid", "N"): 512, ("time", "t_end"): 0.0}
    vals.update({tuple(k.split(".")): v for k, v in kw.items()})
    return hx.config_from_values(vals)


def test_run_t_end_zero(tmp_path):
    res = hx.run_experiment(small(), tmp_path)
    assert res.exit_code == hx.EXIT_PASS and res.verdict is None and len(res.ledger) == 1
    rows = hx.read_ledger(tmp_path / "ledger.tsv")
    assert len(rows) == 1 and list(rows[0]) == hx.ledger_columns(NONZERO)
    assert "initial diagnostics only" in (tmp_path / "fit_report.txt").read_text()
    assert read_checkpoint(tmp_path / "checkpoint.bin").t == 0.0


def test_short_runs_are_inconclusive_and_reproducible(tmp_path):
    outs = []
    for name in ("a", "b"):
        cfg = small(**{"time.t_end": 5.0, "mode.mode": "zero"})
        res = hx.run_experiment(cfg, tmp_path / name)
        assert res.verdict.status == "inconclusive" and res.exit_code == hx.EXIT_PASS
        outs.append(tmp_path / name)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    assert any(str(f).startswith("plotdata") for f in files)
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f
    rows = hx.read_ledger(outs[0] / "ledger.tsv")
    assert list(rows[0]) == hx.ledger_columns(ZERO)
    assert max(max(r["drift_v"], r["drift_u"], r["drift_E"]) for r in rows) <= 1e-6
    assert max(abs(r["Phi_end"]) for r in rows) <= 1e-6


def test_alpha_above_admissible_range():
    cfg = small(**{"mode.mode": "zero", "mode.alpha": "5.0"})
    with pytest.raises(ConfigError):
        hx.run_experiment(cfg)


# -- command line -----------------------------------------------------------------------

def test_cli_exit_codes(tmp_path, capsys):
    assert main(["identities"]) == 0
    assert "PASS L_R_identity" in capsys.readouterr().out
    bad = write(tmp_path, "[mode]\nmode = zero\n[perturbation]\nshape = bump\n")
    assert main(["simulate", "--config", str(bad)]) == 2
    assert main(["simulate", "--config", str(write(tmp_path, "[grid]\nL = 100\n", "l.ini"))]) == 2
    assert main(["simulate", "--config", str(write(tmp_path, "[grid]\nfoo = 1\n", "k.ini"))]) == 2
    assert main(["fit"]) == 2
    out = tmp_path / "run"
    assert main(["simulate", "--t-end", "0", "--grid-n", "512", "--out", str(out)]) == 0
    assert (out / "ledger.tsv").exists()
    assert main(["profile", "--delta", "0.2"]) == 0


def test_cli_identities_flag(tmp_path, capsys):
    cfg = write(tmp_path, "[mode]\nrun_identities = yes\n")
    assert main(["simulate", "--config", str(cfg)]) == 0
    assert "dissipation_identity" in capsys.readouterr().out


def test_cli_fit_and_audit(tmp_path, capsys):
    out = tmp_path / "z"
    assert main(["simulate", "--mode", "zero", "--t-end", "5", "--grid-n", "512",
                 "--out", str(out)]) == 0
    assert main(["fit", "--out", str(out)]) == 0
    assert "verdict inconclusive" in capsys.readouterr().out
    assert main(["audit", "--mode", "zero", "--t-end", "5", "--grid-n", "512",
                 "--ledger", str(out / "ledger.tsv")]) == 0
    text = capsys.readouterr().out
    assert "poincare audit" in text and "conservation drift" in text


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "contactwave", "simulate", "--mode", "zero",
                        "--config", "/nonexistent.ini"], capture_output=True, text=True)
    assert r.returncode == 2 and "config error" in r.stderr
