import numpy as np
import pytest

from multiway_mc.cli import main, parse_config
from multiway_mc.experiments import (run_ratio_experiment,
                                     run_speedup_experiment, synthesize_H,
                                     has_constant_abs_rowsums)
from multiway_mc import SparseMatrix, spectral_radius_nonneg, abs_matrix


def test_parse_config(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# experiment\nmode = ratio\nn=50\nphi-max = 8\n"
                   "rho = 0.5,0.9  # two radii\n")
    parsed = parse_config(cfg)
    assert parsed == {"mode": "ratio", "n": "50", "phi_max": "8",
                      "rho": "0.5,0.9"}


def test_parse_config_rejects_garbage(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("just words\n")
    with pytest.raises(ValueError, match=":1"):
        parse_config(cfg)


def test_mode_required():
    assert main([]) == 1


def test_solve_synthetic(tmp_path, capsys):
    out = tmp_path / "solve.csv"
    rc = main(["--mode", "solve", "--n", "40", "--density", "0.3",
               "--rho", "0.5", "--m", "2", "--walks", "2000",
               "--seed", "3", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "estimate" in text
    assert "direct <h,x>" in text
    header = out.read_text().splitlines()[0]
    assert header.startswith("estimate,sample_variance")


def test_solve_zero_diagonal_error(tmp_path, capsys):
    mtx = tmp_path / "zd.mtx"
    mtx.write_text("%%MatrixMarket matrix coordinate real general\n"
                   "2 2 3\n1 1 1.0\n1 2 1.0\n2 1 1.0\n")
    rc = main(["--mode", "solve", "--matrix", str(mtx)])
    assert rc == 1
    assert "row 1" in capsys.readouterr().err


def test_ratio_csv_deterministic(tmp_path):
    args = ["--mode", "ratio", "--n", "60", "--density", "0.2",
            "--rho", "0.3,0.9", "--m", "1,2", "--trials", "5",
            "--seed", "11"]
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().splitlines()
    assert lines[0] == "rho,m,solvable_fraction,trials,seed"
    for line in lines[1:]:
        frac = float(line.split(",")[2])
        assert 0.0 <= frac <= 1.0


def test_speedup_cli_small(tmp_path):
    out = tmp_path / "s.csv"
    rc = main(["--mode", "speedup", "--n", "50", "--density", "0.3",
               "--rho", "0.8", "--m", "2,3", "--trials", "3",
               "--seed", "5", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "rho,m,mean_speedup,trials_used,trials_excluded,seed"
    for line in lines[1:]:
        fields = line.split(",")
        if fields[2]:
            assert float(fields[2]) > 0


def test_config_file_with_override(tmp_path, capsys):
    cfg = tmp_path / "r.cfg"
    cfg.write_text("mode=ratio\nn=40\ndensity=0.3\nrho=0.5\nm=1,2\n"
                   "trials=3\nseed=2\n")
    rc = main(["--config", str(cfg), "--trials", "2"])
    assert rc == 0
    assert "rho" in capsys.readouterr().out


def test_diagnose_modes(capsys):
    rc = main(["--mode", "diagnose", "--n", "40", "--density", "0.3",
               "--rho", "0.4", "--seed", "1", "--phi-max", "8"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "first contractive m" in text
    assert "verdict: solvable" in text


def test_diagnose_unsolvable(capsys, tmp_path, monkeypatch):
    # rho(|H|) >= 1: no contractive m exists
    import multiway_mc.cli as cli

    def fake_synthesize(n, density, rho, seed):
        H, _ = synthesize_H(n, density, 0.5, seed)
        return H.with_data(H.data * 2.2), 0

    monkeypatch.setattr(cli, "synthesize_H", fake_synthesize)
    rc = main(["--mode", "diagnose", "--n", "30", "--density", "0.4",
               "--rho", "0.9", "--phi-max", "6"])
    assert rc == 2
    assert "not solvable" in capsys.readouterr().out


def test_divergence_demo_cli(tmp_path, capsys):
    out = tmp_path / "d.csv"
    rc = main(["--mode", "divergence-demo", "--n", "30", "--density", "0.4",
               "--rho", "0.9", "--seed", "4", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    assert "1-way" in text
    assert out.read_text().startswith("k,one_way_term")


def test_small_preset(capsys):
    rc = main(["--mode", "ratio", "--small", "--rho", "0.5", "--m", "1",
               "--density", "0.2", "--trials", "30", "--seed", "8"])
    assert rc == 0


def test_constant_rowsum_detector():
    dense = np.array([[0.3, 0.4], [0.4, 0.3]])
    assert has_constant_abs_rowsums(SparseMatrix.from_dense(dense))
    dense2 = np.array([[0.3, 0.5], [0.4, 0.3]])
    assert not has_constant_abs_rowsums(SparseMatrix.from_dense(dense2))


def test_synthesize_hits_radius():
    H, retries = synthesize_H(100, 0.1, 0.8, seed=3)
    assert retries == 0
    assert spectral_radius_nonneg(abs_matrix(H)) == pytest.approx(0.8,
                                                                  abs=1e-6)
