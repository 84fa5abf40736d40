import csv

import numpy as np
import pytest

from qedisk.cli import main, point_id
from qedisk.config import RunConfig, load_config, parse_config
from qedisk.errors import ConfigError
from qedisk.spectral import LorentzianSumSpectrum, MaterialParams, read_spectrum_csv, sigma_inter_re, sigma_res

BASE = """
omega0 = 1.92128
gamma0 = 59e-6
z = 2.0
lorentzians = 500, 1.95, 0.001; 200, 1.99, 0.002   # lambda, omega, beta
support = 1.8, 2.1
tmax = 400
dt = 1.0
"""


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_summary(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- config


def test_parse_basic():
    cfg = parse_config(BASE)
    assert cfg.omega0 == 1.92128
    assert cfg.lorentzians == ((500.0, 1.95, 0.001), (200.0, 1.99, 0.002))
    assert cfg.support == (1.8, 2.1)
    assert cfg.rwa is True and cfg.solver == "volterra"


def test_exclusive_sources():
    with pytest.raises(ConfigError, match="exactly one spectrum source"):
        parse_config(BASE + "spectrum_csv = spec.csv\n")
    with pytest.raises(ConfigError, match="exactly one spectrum source"):
        parse_config("omega0 = 1.9\n")


def test_config_errors():
    with pytest.raises(ConfigError, match="unknown config key"):
        parse_config(BASE + "omega_0 = 2\n")
    with pytest.raises(ConfigError, match="support"):
        parse_config("lorentzians = 1, 2, 3\n")
    with pytest.raises(ConfigError, match="sweep_param"):
        parse_config(BASE + "sweep_param = colour\nsweep_values = 1, 2\n")
    with pytest.raises(ConfigError, match="go together"):
        parse_config(BASE + "sweep_param = gamma0\n")
    with pytest.raises(ConfigError, match="finite"):
        parse_config(BASE + "sweep_param = gamma0\nsweep_values = 1e-6, inf\n")
    with pytest.raises(ConfigError):
        parse_config(BASE + "solver = magic\n")


def test_relative_paths_follow_config(tmp_path):
    sub = tmp_path / "cfgs"
    sub.mkdir()
    cfg = load_config(write_cfg(sub, "spectrum_csv = data/spec.csv\n"))
    assert cfg.spectrum_csv == sub / "data" / "spec.csv"


def test_point_id_stable_and_distinct():
    cfg = parse_config(BASE)
    assert point_id(cfg) == point_id(parse_config(BASE))
    assert point_id(cfg) != point_id(cfg.with_value("gamma0", 413.5e-6))
    assert point_id(cfg) == point_id(cfg.with_value("output_dir", "elsewhere"))


# ---------------------------------------------------------------- verbs


def test_spectrum_verb_roundtrip(tmp_path):
    cfg = write_cfg(tmp_path, BASE + "grid = 1.8, 2.1, 301\n")
    assert main(["spectrum", "--config", str(cfg), "--output", str(tmp_path / "o")]) == 0
    w, lam = read_spectrum_csv(tmp_path / "o" / "spectrum.csv")
    spec = LorentzianSumSpectrum(((500, 1.95, 0.001), (200, 1.99, 0.002)), (1.8, 2.1))
    np.testing.assert_array_equal(lam, spec.evaluate(w))
    assert not (tmp_path / "o" / "conductivity.csv").exists()


def test_conductivity_table(tmp_path):
    cfg = write_cfg(tmp_path, BASE + "grid = 1.8, 2.2, 5\nsigma0 = 0.3\n")
    assert main(["spectrum", "--config", str(cfg), "--output", str(tmp_path)]) == 0
    with open(tmp_path / "conductivity.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["quality"] for r in rows] == ["high"] * 5 + ["low"] * 5
    for r in rows:
        mat = MaterialParams.preset(r["quality"], 0.3)
        w = float(r["omega_eV"])
        s = complex(sigma_res(w, mat))
        got = complex(float(r["re_sigma_res"]), float(r["im_sigma_res"]))
        assert got == pytest.approx(s, rel=1e-14)
        assert float(r["re_sigma_inter"]) == pytest.approx(float(sigma_inter_re(w, mat)), rel=1e-14)


def test_empty_grid(tmp_path, capsys):
    cfg = write_cfg(tmp_path, BASE + "grid = 2.0, 1.8, 10\n")
    assert main(["spectrum", "--config", str(cfg), "--output", str(tmp_path)]) == 2
    assert "grid" in capsys.readouterr().err
    cfg = write_cfg(tmp_path, BASE + "grid = 1.8, 2.0, 0\n")
    assert main(["spectrum", "--config", str(cfg), "--output", str(tmp_path)]) == 2


def test_greens_source_requires_file(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "greens_coefficients = missing.csv\ndisk_radius = 7.5\nz = 2\ngrid = 1.8, 2.0, 3\n")
    assert main(["spectrum", "--config", str(cfg), "--output", str(tmp_path)]) == 2
    assert "missing.csv" in capsys.readouterr().err


def test_kernel_and_fit_verbs(tmp_path):
    cfg = write_cfg(tmp_path, BASE + "n_peaks = 2\n")
    assert main(["kernel", "--config", str(cfg), "--output", str(tmp_path)]) == 0
    assert (tmp_path / "kernel.csv").read_text().count("\n") == 4 + 1 + 401
    assert main(["fit", "--config", str(cfg), "--output", str(tmp_path)]) == 0
    lines = (tmp_path / "fit.csv").read_text().splitlines()
    assert lines[0].startswith("# residual=")
    assert len([ln for ln in lines if not ln.startswith("#")]) == 3


def test_simulate_all_solvers_agree(tmp_path):
    text = """
omega0 = 1.92128
gamma0 = 59e-6
z = 2.0
lorentzians = 200, 1.92128, 0.001
support = 1.5, 2.5
lorentzian_extent = extended
solver = all
tmax = 2000
dt = 0.5
"""
    cfg = write_cfg(tmp_path, text)
    assert main(["simulate", "--config", str(cfg), "--output", str(tmp_path)]) == 0
    rows = read_summary(tmp_path / "summary.csv")
    assert [r["solver"] for r in rows] == ["volterra", "pseudomode", "analytic"]
    assert all(r["converged"] == "True" for r in rows)
    assert len({r["regime"] for r in rows}) == 1
    pops = []
    for r in rows:
        data = np.loadtxt(tmp_path / f"traj_{r['point_id']}_{r['solver']}.csv", delimiter=",", comments="#", skiprows=6)
        pops.append(data[:, 3])
    assert np.max(np.abs(pops[0] - pops[2])) < 1e-5
    assert np.max(np.abs(pops[1] - pops[2])) < 1e-6


def test_gamma0_sweep_scaling(tmp_path):
    cfg = write_cfg(tmp_path, BASE + "sweep_param = gamma0\nsweep_values = 59e-6, 413.5e-6\n")
    assert main(["sweep", "--config", str(cfg), "--output", str(tmp_path)]) == 0
    rows = read_summary(tmp_path / "summary.csv")
    assert [r["value"] for r in rows] == ["5.9e-05", "0.0004135"]
    ratio = float(rows[1]["markov_rate_eV"]) / float(rows[0]["markov_rate_eV"])
    assert ratio == pytest.approx(413.5 / 59, rel=1e-14)


def test_failing_point_recorded(tmp_path):
    cfg = write_cfg(tmp_path, BASE + "sweep_param = dt\nsweep_values = 1.0, 0.3, 0.5\n")
    assert main(["sweep", "--config", str(cfg), "--output", str(tmp_path)]) == 0
    rows = read_summary(tmp_path / "summary.csv")
    assert [r["value"] for r in rows] == ["1.0", "0.3", "0.5"]
    assert rows[1]["regime"].startswith("error: DomainError")
    assert rows[0]["converged"] == "True" and rows[2]["converged"] == "True"


def test_sweep_determinism_across_jobs(tmp_path):
    text = BASE + "rwa = false\nsolver = all\nn_peaks = 2\nsweep_param = z\nsweep_values = 2, 5, 15\n"
    cfg = write_cfg(tmp_path, text)
    outs = []
    for jobs in (1, 3):
        out = tmp_path / f"jobs{jobs}"
        assert main(["sweep", "--config", str(cfg), "--output", str(out), "--jobs", str(jobs)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0].keys() == outs[1].keys()
    assert len(outs[0]) == 1 + 3 * 3
    for name in outs[0]:
        assert outs[0][name] == outs[1][name], name


def test_simulate_rejects_sweep_config(tmp_path):
    cfg = write_cfg(tmp_path, BASE + "sweep_param = gamma0\nsweep_values = 1e-5\n")
    assert main(["simulate", "--config", str(cfg), "--output", str(tmp_path)]) == 2


def test_run_config_defaults():
    cfg = RunConfig()
    assert cfg.shift_prefactor == "one-over-2pi" and cfg.host_eps == 1.0
