import subprocess
import sys

import pytest

from secagg.cli import EXIT_ABORT, EXIT_AUDIT, EXIT_CONFIG, EXIT_OK, main

SMALL_CFG = "N = 40\nn = 12\nd = 16\nL = 4\nell = 1\nrho = 1\nT = 3\nR = 2\ndelta = 0.1\n"


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "small.cfg"
    p.write_text(SMALL_CFG)
    return str(p)


def test_plan_reference(capsys):
    assert main(["plan", "--N", "10000", "--n", "1024", "--delta", "0.01", "--eta", "0.01", "--kappa", "20"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "L = 76" in out and "ell = 25" in out
    assert "neighbors = 41" in out
    assert "epsilon = 0.02" in out


def test_plan_validates_config_file(cfg, capsys):
    assert main(["plan", "--config", cfg]) == EXIT_OK
    assert "N = 40" in capsys.readouterr().out


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text(SMALL_CFG + "L = 8\n")
    assert main(["plan", "--config", str(bad)]) == EXIT_CONFIG
    assert "ell = floor((L-1)/3)" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert main(["plan", "--N", "100", "--n", "50", "--kappa", "40"]) == EXIT_CONFIG


def test_run_is_deterministic(cfg, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", "--config", cfg, "--seed", "4", "--out", str(a), "--drops", "1"]) == EXIT_OK
    assert main(["run", "--config", cfg, "--seed", "4", "--out", str(b), "--drops", "1"]) == EXIT_OK
    assert a.read_text() == b.read_text()
    lines = a.read_text().splitlines()
    assert lines[0].startswith("t,tau,outcome,rt_count")
    assert len(lines) == 4 and all(",sum-ok,3," in line for line in lines[1:])


def test_run_float_workload_and_trace(cfg, tmp_path, capsys):
    trace = tmp_path / "t.bin"
    assert main(["run", "--config", cfg, "--workload", "float", "--trace", str(trace), "--rounds", "1"]) == EXIT_OK
    err = capsys.readouterr().err
    assert "float sum error" in err
    assert trace.stat().st_size > 0


def test_run_abort_exit_code(cfg):
    # more dropouts than delta allows: every round aborts
    assert main(["run", "--config", cfg, "--drops", "5", "--rounds", "1"]) == EXIT_ABORT


def test_attack_all(cfg, capsys):
    assert main(["attack", "--config", cfg]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 7 and "FAIL" not in out
    assert main(["attack", "--config", cfg, "--script", "nonsense"]) == EXIT_CONFIG


def test_attack_failure_exit_code(cfg, monkeypatch):
    from secagg.sim import adversary

    monkeypatch.setitem(adversary.EXPECTED, "honest", "abort")
    assert main(["attack", "--config", cfg, "--script", "honest"]) == EXIT_AUDIT


def test_bench(cfg, capsys):
    assert main(["bench", "--config", cfg, "--repeat", "3"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "elgamal encrypt" in out and "collection round" in out


def test_console_entry_point(cfg):
    proc = subprocess.run(
        [sys.executable, "-m", "secagg.cli", "plan", "--config", cfg], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0 and "N = 40" in proc.stdout
