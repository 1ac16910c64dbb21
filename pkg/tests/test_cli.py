import os

import numpy as np
import pytest

from swvac.cli import main
from swvac.config import ConfigError, SolverConfig, load_config


def write_config(path, body):
    path.write_text(body)
    return str(path)


SMALL = """\
[grid]
n1 = 16
n2 = 16

[solver]
n_modes = 16
dt = 0.005
t_final = 0.25
truncation_order = 2
"""


def test_load_defaults(tmp_path):
    cfg = load_config(write_config(tmp_path / "c.ini", "[grid]\nn1 = 8\nn2 = 8\n"))
    assert cfg.n1 == 8 and cfg.n2 == 8
    assert cfg.profile == "sine"
    assert cfg.scheme == "crank-nicolson"
    assert cfg.pressure is True
    assert cfg.n_steps == 200


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path / "c.ini", "[grid]\nn1 = 8\nbogus = 1\n"))
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path / "c.ini", "[mystery]\nx = 1\n"))


def test_bad_values_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path / "c.ini", "[grid]\nn1 = two\n"))
    with pytest.raises(ConfigError):
        load_config(
            write_config(tmp_path / "c.ini", "[solver]\nscheme = leapfrog\n")
        )
    with pytest.raises(ConfigError):
        load_config(
            write_config(tmp_path / "c.ini", "[solver]\ndt = 0.004\nt_final = 0.25\n[grid]\nn1=8\nn2=8\n")
        )


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.ini")


def test_validate_ranges():
    with pytest.raises(ConfigError):
        SolverConfig(n1=2).validate()
    with pytest.raises(ConfigError):
        SolverConfig(truncation_order=7).validate()
    with pytest.raises(ConfigError):
        SolverConfig(u0_profile="vortex").validate()
    SolverConfig().validate()


def test_cli_run_small(tmp_path):
    cfg = write_config(tmp_path / "c.ini", SMALL)
    out = tmp_path / "out"
    code = main(["run", cfg, "--out", str(out), "--quiet"])
    assert code == 0
    files = set(os.listdir(out))
    assert {"energy.csv", "picard.csv", "manifest.txt"} <= files
    assert {"energy.png", "picard.png", "boundary.png"} <= files


def test_cli_run_zero_pressure_off(tmp_path):
    body = SMALL + "pressure = off\nu0_profile = zero\n"
    cfg = write_config(tmp_path / "c.ini", body)
    out = tmp_path / "out"
    code = main(["run", cfg, "--out", str(out), "--quiet"])
    assert code == 0
    state = np.genfromtxt(out / "state_0000.csv", delimiter=",", names=True)
    assert np.abs(state["v1"]).max() == 0.0
    assert np.abs(state["v2"]).max() == 0.0


def test_cli_eigen(tmp_path):
    cfg = write_config(tmp_path / "c.ini", SMALL)
    out = tmp_path / "eig"
    code = main(["eigen", cfg, "--out", str(out), "--quiet"])
    assert code == 0
    data = np.genfromtxt(out / "eigenvalues.csv", delimiter=",", names=True)
    assert data["sigma"][0] == pytest.approx(1.0, abs=1e-8)
    assert (out / "eigenvalues.png").exists()
    assert (out / "modes.csv").exists()


def test_cli_check(tmp_path):
    cfg = write_config(tmp_path / "c.ini", SMALL)
    out = tmp_path / "chk"
    code = main(["check", cfg, "--out", str(out), "--quiet"])
    assert code == 0
    lines = (out / "inequalities.csv").read_text().strip().splitlines()
    assert lines[0] == "name,lhs,rhs,constant,n1,n2,seed"
    assert len(lines) > 1
    assert (out / "inequalities.png").exists()


def test_cli_bad_config_exit_2(tmp_path):
    cfg = write_config(tmp_path / "c.ini", "[grid]\nn1 = 8\nwhatever = 3\n")
    assert main(["run", cfg]) == 2


def test_cli_missing_config_exit_2(tmp_path):
    assert main(["run", str(tmp_path / "no.ini")]) == 2


def test_cli_unknown_subcommand_exit_2(tmp_path, capsys):
    assert main(["frobnicate", "x.ini"]) == 2
    capsys.readouterr()


def test_cli_byte_identical_reruns(tmp_path):
    import filecmp

    cfg = write_config(tmp_path / "c.ini", SMALL)
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["run", cfg, "--out", str(out1), "--quiet"]) == 0
    assert main(["run", cfg, "--out", str(out2), "--quiet"]) == 0
    for name in sorted(os.listdir(out1)):
        if name.endswith(".csv") or name == "manifest.txt":
            assert filecmp.cmp(out1 / name, out2 / name, shallow=False), name
