import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cpschwarz import cli


def run(tmp_path, *args, sub="o"):
    out = tmp_path / sub
    code = cli.main(list(args) + ["--out", str(out)])
    return code, out


def read_csv(path):
    with open(path) as fh:
        first = fh.readline()
        assert first.startswith("# surface=")
        return list(csv.DictReader(fh))


def test_solve_circle(tmp_path):
    code, out = run(tmp_path, "solve", "--surface", "circle", "--nsub", "4")
    assert code == 0
    for name in ("solution.csv", "residuals.csv", "summary.json"):
        assert (out / name).exists()
    summary = json.loads((out / "summary.json").read_text())
    rows = read_csv(out / "residuals.csv")
    assert summary["converged"] and len(rows) == summary["iterations"] + 1
    sol = read_csv(out / "solution.csv")
    assert len(sol) == summary["n_active"] and set(sol[0]) == {"x", "y", "u"}
    assert summary["max_error"] < 0.01


def test_robin_alpha_zero_is_config_error(tmp_path, capsys):
    code, _ = run(tmp_path, "solve", "--tc", "robin", "--alpha", "0")
    assert code == 1
    assert "alpha must be > 0" in capsys.readouterr().err


@pytest.mark.parametrize("args, msg", [
    (["--dx", "-1"], "dx must be > 0"),
    (["--c", "0"], "c must be > 0"),
    (["--tc", "robin", "--alpha", "2", "--noverlap", "1"], "noverlap must be >= 2"),
    (["--nsub", "0"], "nsub must be >= 1"),
    (["--surface", "mesh"], "mesh path"),
    (["--dx", "abc"], "cannot parse"),
])
def test_validation_messages(tmp_path, capsys, args, msg):
    code, _ = run(tmp_path, "solve", *args)
    assert code == 1 and msg in capsys.readouterr().err


def test_sphere_iterations_match_history(tmp_path):
    code, out = run(tmp_path, "solve", "--surface", "sphere", "--dx", "0.2", "--nsub", "4",
                    "--mode", "gmres-preconditioned", "--tc", "robin", "--alpha", "4")
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert len(read_csv(out / "residuals.csv")) == summary["iterations"] + 1


def test_nonconvergence_exit_code(tmp_path):
    code, out = run(tmp_path, "solve", "--nsub", "8", "--max-iter", "2")
    assert code == 2
    assert json.loads((out / "summary.json").read_text())["status"] == "max_iter"


def test_sweep_ras_alpha_invariant(tmp_path):
    code, out = run(tmp_path, "sweep", "--nsub", "8", "--alpha", "16,32,64")
    assert code == 0
    rows = read_csv(out / "sweep.csv")
    assert len(rows) == 3 and len({r["iterations"] for r in rows}) == 1
    assert [r["alpha"] for r in rows] == ["16.0", "32.0", "64.0"]


def test_single_point_sweep_equals_solve(tmp_path):
    _, out = run(tmp_path, "sweep", "--nsub", "4", "--tc", "robin", "--alpha", "3", sub="sw")
    _, out2 = run(tmp_path, "solve", "--nsub", "4", "--tc", "robin", "--alpha", "3", sub="so")
    row = read_csv(out / "sweep.csv")[0]
    summary = json.loads((out2 / "summary.json").read_text())
    assert int(row["iterations"]) == summary["iterations"]
    assert float(row["relative_residual"]) == pytest.approx(summary["relative_residual"], rel=1e-12)


def test_sweep_oras_overlap_trend(tmp_path):
    code, out = run(tmp_path, "sweep", "--nsub", "8", "--noverlap", "2,4", "--tc", "robin", "--alpha", "4")
    rows = read_csv(out / "sweep.csv")
    assert code == 0 and int(rows[1]["iterations"]) <= int(rows[0]["iterations"])


def test_sweep_records_failures(tmp_path):
    code, out = run(tmp_path, "sweep", "--nsub", "2", "--noverlap", "2,80")
    rows = read_csv(out / "sweep.csv")
    assert code == 2 and rows[0]["converged"] == "True"
    assert rows[1]["converged"] == "False" and rows[1]["status"].startswith("error")


def test_partition_info_single(tmp_path, capsys):
    code, out = run(tmp_path, "partition-info", "--nsub", "1")
    assert code == 0
    info = json.loads((out / "summary.json").read_text())
    assert info["edge_cut"] == 0 and info["sizes"] == [info["n_active"]]
    assert set(np.loadtxt(out / "labels.txt", dtype=int).tolist()) == {0}
    assert "edge_cut=0" in capsys.readouterr().out


def test_partition_info_roles_and_round_trip(tmp_path):
    code, out = run(tmp_path, "partition-info", "--nsub", "8", "--noverlap", "4")
    assert code == 0
    with open(out / "roles.csv") as fh:
        roles = {r["role"] for r in csv.DictReader(fh)}
    assert roles == {"disjoint", "overlap", "ghost", "bc", "lambda"}
    labels = np.loadtxt(out / "labels.txt", dtype=int)
    assert [int(r["label"]) for r in read_csv(out / "partition.csv")] == labels.tolist()
    code, out2 = run(tmp_path, "partition-info", "--nsub", "8", "--partition-file",
                     str(out / "labels.txt"), sub="again")
    assert code == 0 and np.array_equal(np.loadtxt(out2 / "labels.txt", dtype=int), labels)
    code, _ = run(tmp_path, "solve", "--nsub", "8", "--partition-file", str(out / "labels.txt"), sub="s")
    assert code == 0


def test_bad_partition_file(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("0\n1\n")
    code, _ = run(tmp_path, "solve", "--nsub", "2", "--partition-file", str(tmp_path / "p.txt"))
    assert code == 1 and "labels" in capsys.readouterr().err


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# circle run\nsurface = circle\ndx=0.1\nnsub=4  # four pieces\ntc=robin\nalpha=2\nmax-iter=500\n")
    code, out = run(tmp_path, "solve", "--config", str(cfg), "--alpha", "8")
    assert code == 0
    conf = json.loads((out / "summary.json").read_text())["config"]
    assert conf["alpha"] == 8.0 and conf["nsub"] == 4 and conf["tc"] == "robin" and conf["max_iter"] == 500
    (tmp_path / "bad.cfg").write_text("wibble=3\n")
    assert run(tmp_path, "solve", "--config", str(tmp_path / "bad.cfg"))[0] == 1


def test_deterministic_outputs(tmp_path):
    outs = [run(tmp_path, "solve", "--nsub", "4", "--tc", "robin", "--alpha", "4", sub=s)[1] for s in "ab"]
    for name in ("solution.csv", "residuals.csv"):
        a = (outs[0] / name).read_text().split("\n", 1)[1]
        b = (outs[1] / name).read_text().split("\n", 1)[1]
        assert a == b


def test_block_jacobi_mode(tmp_path):
    code, out = run(tmp_path, "solve", "--nsub", "4", "--mode", "block-jacobi-gmres")
    assert code == 0 and json.loads((out / "summary.json").read_text())["converged"]


def test_mesh_surface(tmp_path):
    from cpschwarz.geometry import icosphere, write_off
    write_off(tmp_path / "ball.off", *icosphere(3))
    code, out = run(tmp_path, "solve", "--surface", "mesh", "--mesh", str(tmp_path / "ball.off"),
                    "--dx", "0.2", "--nsub", "2", "--rhs", "eigen-sphere")
    assert code == 0


def test_seed_points_parse():
    assert cli.parse_seed_points("1,0;0,1").shape == (2, 2)
    with pytest.raises(cli.ConfigError):
        cli.parse_seed_points("1,a")


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "cpschwarz.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "cpschwarz" in res.stdout
