import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from cdgsurf import cli
from cdgsurf.exceptions import SolverBreakdown


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_solve_sphere_level_2(capsys):
    code, out, _ = run(["solve", "--problem", "sphere", "--level", "2", "--beta", "10"], capsys)
    assert code == 0
    (row,) = rows(out)
    assert row["level"] == "2" and row["ndof"] == "642"
    assert np.isfinite(float(row["l2_error"])) and np.isfinite(float(row["energy_error"]))
    assert row["eoc_l2"] == "nan"


@pytest.mark.parametrize("beta", ["-1", "0", "nan", "abc"])
def test_bad_beta_is_usage_error(beta, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", "--beta", beta])
    assert exc.value.code == 2
    assert "--beta" in capsys.readouterr().err


def test_console_script_exit_code():
    proc = subprocess.run(
        [sys.executable, "-m", "cdgsurf.cli", "solve", "--beta", "-1"], capture_output=True, text=True
    )
    assert proc.returncode == 2


def test_solve_level_0_with_dumps(tmp_path, capsys):
    off, mat, sol = tmp_path / "m.off", tmp_path / "A.txt", tmp_path / "u.txt"
    code, out, _ = run(
        ["solve", "--level", "0", "--off", str(off), "--dump-matrix", str(mat), "--solution", str(sol)], capsys
    )
    assert code == 0
    assert rows(out)[0]["ndof"] == "42"
    assert off.read_text().splitlines()[:2] == ["OFF", "12 20 30"]
    entries = np.loadtxt(mat)
    assert entries[:, :2].min() == 0 and entries[:, :2].max() == 41
    A = np.zeros((42, 42))
    A[entries[:, 0].astype(int), entries[:, 1].astype(int)] = entries[:, 2]
    np.testing.assert_array_equal(A, A.T)
    assert np.loadtxt(sol).shape == (42,)


def test_convergence_deterministic_with_svg(tmp_path, capsys):
    a, b, svg = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "p.svg"
    argv = ["convergence", "--levels", "0-2", "--mesh", "perturbed", "--seed", "3", "--h-mode", "per-edge"]
    assert cli.main(argv + ["--out", str(a), "--svg", str(svg)]) == 0
    assert cli.main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "level,h,ndof,l2_error,energy_error,eoc_l2,eoc_energy"
    assert len(lines) == 4
    text = svg.read_text()
    assert text.startswith("<svg") and text.count("<polyline") == 3 and "slope 2" in text


def test_convergence_needs_two_levels(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["convergence", "--levels", "2"])
    assert exc.value.code == 2


def test_geomcheck_sphere(capsys):
    code, out, _ = run(["geomcheck", "--levels", "1-4"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "h,max_d,max_n_diff,max_one_ndot,max_mu,max_conormal"
    slope = lines[-1].split(",")
    assert slope[0] == "slope"
    assert float(slope[1]) >= 1.9


def test_geomcheck_torus_perturbed(capsys):
    code, out, _ = run(["geomcheck", "--problem", "torus", "--levels", "1,2,3,4", "--mesh", "perturbed", "--seed", "7"], capsys)
    assert code == 0
    s = [float(v) for v in out.splitlines()[-1].split(",")[1:]]
    assert s[0] >= 1.9 and 0.9 <= s[1] <= 1.5 and min(s[2:]) >= 1.9


def test_geomcheck_single_level_warns(capsys):
    code, out, err = run(["geomcheck", "--levels", "2"], capsys)
    assert code == 0
    assert "warning" in err
    assert "slope" not in out and len(out.splitlines()) == 2


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"problem": "torus", "levels": [1], "load_source": "paper", "h_mode": "per-edge", "beta": 5}))
    code, out, _ = run(["solve", "--config", str(cfg)], capsys)
    assert code == 0 and rows(out)[0]["ndof"] == "240"
    code, out, _ = run(["solve", "--config", str(cfg), "--level", "0"], capsys)
    assert code == 0 and rows(out)[0]["level"] == "0"


def test_config_out_field(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    target = tmp_path / "res.csv"
    cfg.write_text(json.dumps({"levels": "0-1", "out": str(target)}))
    code, out, _ = run(["convergence", "--config", str(cfg)], capsys)
    assert code == 0 and out == ""
    assert len(target.read_text().splitlines()) == 3


@pytest.mark.parametrize(
    "payload", [{"colour": 1}, {"beta": -2}, {"levels": [3, 1]}, [1, 2]]
)
def test_bad_config_is_usage_error(tmp_path, payload, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(payload))
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", "--config", str(cfg)])
    assert exc.value.code == 2


def test_module_error_reported_by_name(monkeypatch, capsys):
    def boom(config, level):
        raise SolverBreakdown("no convergence")

    monkeypatch.setattr(cli, "run_level", boom)
    code, _, err = run(["solve", "--level", "1"], capsys)
    assert code == 1
    assert "SolverBreakdown" in err


def test_thread_cap(monkeypatch, capsys):
    monkeypatch.setenv("CDG_THREADS", "1")
    assert run(["solve", "--level", "0"], capsys)[0] == 0
    monkeypatch.setenv("CDG_THREADS", "zero")
    with pytest.raises(SystemExit) as exc:
        cli.main(["solve", "--level", "0"])
    assert exc.value.code == 2


def test_parse_levels():
    assert cli.parse_levels("1-4") == (1, 2, 3, 4)
    assert cli.parse_levels("0,2,5") == (0, 2, 5)
    assert cli.parse_levels([2, 3]) == (2, 3)
