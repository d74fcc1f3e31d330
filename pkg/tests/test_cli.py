import numpy as np
import pytest

from mfgprox.cli import main
from mfgprox.grid_ops import load_gf1, save_gf1


def write_config(path, extra_problem="", extra_solver="", out_dir=None):
    text = "[problem]\ntest = 2\nn = 12\nnu = 0.0\n" + extra_problem
    text += "\n[solver]\nalgorithm = CP-U\nrecord_every = 5\n" + extra_solver
    if out_dir is not None:
        text += f"\n[output]\ndir = {out_dir}\n"
    path.write_text(text)
    return path


def test_solve_end_to_end(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.ini")
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "history.csv").exists()
    assert (out / "summary.txt").exists()
    for name in ("m.gf1", "w.gf1", "u.gf1"):
        assert (out / name).exists()
    summary = dict(
        line.split("=", 1) for line in (out / "summary.txt").read_text().strip().splitlines()
    )
    assert summary["algorithm"] == "CP-U"
    assert summary["converged"] == "True"
    assert float(summary["l2_error_m"]) < 1e-3
    header = (out / "history.csv").read_text().splitlines()[0]
    assert header == "iter,primal_change,res_hjb,res_fp,res_mass,res_compl,gap,lambda"


def test_solve_missing_algorithm_names_key(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[problem]\ntest = 1\nn = 8\n\n[solver]\ngamma = 0.5\n")
    assert main(["solve", "--config", str(cfg)]) == 1
    assert "algorithm" in capsys.readouterr().err


def test_solve_unknown_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[problem]\ntest = 1\nn = 8\nbogus = 3\n\n[solver]\nalgorithm = CP-U\n")
    assert main(["solve", "--config", str(cfg)]) == 1
    assert "bogus" in capsys.readouterr().err


def test_solve_max_iter_exit_code(tmp_path):
    cfg = write_config(tmp_path / "run.ini", extra_solver="max_iter = 2\n")
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_dry_run_prints_resolved_config(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.ini")
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out), "--dry-run"]) == 0
    text = capsys.readouterr().out
    assert "solver.norm_xi" in text and "solver.gamma" in text
    assert not out.exists()


def test_check_round_trip_and_corruption(tmp_path, capsys):
    cfg = write_config(tmp_path / "run.ini")
    out = tmp_path / "out"
    main(["solve", "--config", str(cfg), "--out", str(out)])
    assert main(["check", "--dir", str(out)]) == 0
    # corrupt one density value by 10 percent: the continuity row breaks
    m = load_gf1(out / "m.gf1")
    m[3, 4] *= 1.1
    save_gf1(out / "m.gf1", m)
    assert main(["check", "--dir", str(out)]) == 1
    text = capsys.readouterr().out
    assert "FAIL" in text


def test_check_empty_dir_lists_missing(tmp_path, capsys):
    missing = tmp_path / "empty"
    missing.mkdir()
    assert main(["check", "--dir", str(missing)]) == 1
    err = capsys.readouterr().err
    for name in ("summary.txt", "m.gf1", "w.gf1", "u.gf1"):
        assert name in err


def test_norms_command(capsys):
    assert main(["norms", "--nh", "8", "--nu", "0.0"]) == 0
    out = capsys.readouterr().out
    entries = dict(line.split("=", 1) for line in out.strip().splitlines()[1:])
    # at nu = 0 the constraint norm is 4*N exactly
    assert float(entries["norm_G"]) == pytest.approx(32.0, rel=1e-4)
    assert float(entries["norm_B"]) == pytest.approx(32.0, rel=1e-4)


def test_bench_smoke(tmp_path):
    out = tmp_path / "bench"
    assert main(["bench", "--test", "1", "--algos", "CP-U", "--sizes", "8,12",
                 "--out", str(out)]) == 0
    cells = (out / "test1_cells.csv").read_text().splitlines()
    assert cells[0].startswith("algorithm,n,status")
    assert len(cells) == 3
    rates = (out / "test1_rates.csv").read_text().splitlines()
    assert len(rates) == 2


def test_custom_problem_config(tmp_path):
    cfg = tmp_path / "custom.ini"
    cfg.write_text(
        "[problem]\ncoupling = log\nn = 10\nnu = 0.0\nq = 2.0\n\n"
        "[solver]\nalgorithm = MS-U\nrecord_every = 20\n"
    )
    out = tmp_path / "o"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    summary = (out / "summary.txt").read_text()
    assert "coupling=log" in summary
