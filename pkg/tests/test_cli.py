import json
import subprocess
import sys

import pytest

from udtomo.cli import EXIT_INFEASIBLE, EXIT_USAGE, build_alm_config, main, read_config_file


def run_single(capsys, *args):
    code = main(["single", *args])
    return code, capsys.readouterr()


def test_single_qutrit_a6_basis_state(capsys):
    code, out = run_single(capsys, "--qutrit", "1,0,0", "--framework", "a6")
    assert code == 0
    doc = json.loads(out.out)
    assert doc["category"] == "UDA"
    assert doc["witness"] is None


def test_single_ghz_pi_over_4(capsys):
    code, out = run_single(capsys, "--ghz-theta", "0.7854")
    assert code == 0
    doc = json.loads(out.out)
    assert doc["category"] == "NOT_UDP"
    assert doc["witness"]["valid"]
    assert doc["witness"]["fidelity"] < 0.01


def test_single_amplitudes(capsys):
    code, out = run_single(capsys, "--amplitudes", "1, 0, 1j", "--framework", "a8")
    assert code == 0
    assert json.loads(out.out)["category"] == "UDA"


@pytest.mark.parametrize(
    "args",
    [
        ["single", "--amplitudes", "1,zz,0"],
        ["single", "--qutrit", "1,0"],
        ["single", "--symmetric", "0,0,0"],
        ["single", "--qutrit", "1,0,0", "--framework", "pauli2"],
        ["single", "--amplitudes", "1,0,0,0"],
        ["qutrit-sphere", "--framework", "pauli2", "--samples", "2"],
        ["ghz-sweep", "--framework", "a8"],
        ["qutrit-sphere", "--samples", "0"],
        ["qutrit-sphere", "--rank-budget", "zero"],
        ["qutrit-sphere", "--jobs", "0"],
        ["no-such-command"],
        [],
    ],
)
def test_usage_errors(capsys, args):
    assert main(args) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_infeasible_exit_code(tmp_path, capsys):
    cfg = tmp_path / "tight.cfg"
    cfg.write_text("inner_iters = 1\nmax_outer_iters = 1\nn_restarts = 1\nmax_attempts = 1\n")
    code = main(["single", "--ghz-theta", "0.3", "--config", str(cfg)])
    assert code == EXIT_INFEASIBLE


def test_sweep_to_file(tmp_path, capsys):
    out = tmp_path / "a8.csv"
    code = main(["qutrit-sphere", "--framework", "a8", "--samples", "3", "--seed", "2", "--out", str(out)])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["categories"]["UDA"]["count"] == 3
    assert out.read_text().count("\n") == 1 + 1 + 3 + 1


def test_sweep_to_stdout(capsys):
    assert main(["ghz-sweep", "--samples", "2"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("# schema=udtomo-v1\ntheta,")
    assert "# summary=" in text


def test_config_file_mirrors_flags(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nframework = A8\nsamples = 2\nrank-budget = 3\nseed=5\nadam_step_size = 0.01\n")
    out = tmp_path / "x.csv"
    assert main(["qutrit-circle", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n"] == 2 and summary["seed"] == 5 and summary["framework"] == "a8"


def test_config_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("inner-iters = 7\ndelta=0.05\n")
    settings = read_config_file(p)
    assert settings == {"inner_iters": "7", "delta": "0.05"}
    cfg = build_alm_config(settings, None)
    assert cfg.inner_iters == 7
    p.write_text("no equals sign\n")
    with pytest.raises(Exception):
        read_config_file(p)


def test_env_parallelism(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("UDTOMO_JOBS", "banana")
    assert main(["qutrit-sphere", "--samples", "1"]) == EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "udtomo", "single", "--qutrit", "1,0"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_USAGE
