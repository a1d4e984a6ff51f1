import json

import numpy as np
import pytest

from kml.cli import (
    ConfigError,
    ExperimentConfig,
    blob_hash,
    build_solver_setup,
    load_config,
    main,
    parse_config,
)
from kml.discretization import PhaseGrid, SpatialGrid, VelocityGrid, read_field, read_trajectory, write_field
from kml.solver import gaussian_data

SMALL = "--grid 2,4,3 --extent 2,2,0.5 --amplitude 0.05 --tol 1e-6".split()


def run_json(capsys, argv):
    assert main(argv) == 0
    return json.loads(capsys.readouterr().out)


def test_triplets_modes(capsys):
    d = run_json(capsys, ["triplets", "--p-inv", "2/5"])
    assert d["solvable"] == {"q_inv": "1/5", "r_inv": "4/15", "p_inv": "2/5", "hm_inv": "1/3"}
    assert d["admissible"] is True and d["endpoint"] is False
    d = run_json(capsys, ["triplets", "--mode", "weighted-check", "--gamma", "-1/2"])
    assert d["ell"] == "51/100"
    d = run_json(capsys, ["triplets", "--mode", "weighted-check", "--gamma", "-1/2", "--loss",
                          "--exponents", "1/2,17/30,1/6,2/5"])
    assert d["holds"] is False
    d = run_json(capsys, ["triplets", "--mode", "companion", "--p-inv", "2/5", "--gamma", "-1"])
    assert "companion" in d
    assert main(["triplets", "--mode", "local", "--gamma", "-1"]) == 1
    assert main(["triplets", "--p-inv", "7/5"]) == 1


def test_config_parsing(tmp_path):
    cfg = parse_config("gamma = -1/2  # soft\nell = auto\ngrid = 2,4,3\n")
    assert cfg.gamma == -0.5 and cfg.ell == "auto"
    with pytest.raises(ConfigError, match=r"<config>:2: unknown key"):
        parse_config("gamma = -1\nbogus = 3\n")
    with pytest.raises(ConfigError, match=r":1: bad value"):
        parse_config("grid = 2,4\n")
    with pytest.raises(ConfigError, match="expected"):
        parse_config("grid\n")
    with pytest.raises(ConfigError):
        ExperimentConfig(grid=(2, 5, 3))
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.cfg")
    f0, scfg, tg = build_solver_setup(parse_config("grid = 2,4,3\nfamily = product\nell = 1/2\n"))
    assert scfg.ell == 0.5 and tg.n_t == 3 and f0.grid.v.n == 4


def test_bundled_configs_load():
    from kml.cli import bundled_configs

    names = bundled_configs()
    assert "small_gaussian.cfg" in names
    for n in names:
        cfg = load_config(n)
        assert cfg.eta is not None and cfg.amplitude > 0


def test_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("gamma = -1\ngrid = 2,4\n")
    assert main(["solve-full", "--config", str(bad)]) == 1
    assert "bad.cfg:2" in capsys.readouterr().err
    assert main(["solve-full", "--config", str(tmp_path / "nope.cfg")]) == 1
    assert main(["probe", "--estimate", "strichartz", "--exponents", "1/2,1/3,2/3", "--samples", "2"]) == 1
    assert main(["probe", "--estimate", "loss", "--exponents", "1/2,17/30,1/6,2/5", "--samples", "2"]) == 1
    assert main(["nonsense"]) == 1
    slow = tmp_path / "slow.cfg"
    slow.write_text("grid = 2,4,3\nextent = 2,2,0.5\namplitude = 0.05\nmax_iterations = 1\ntol = 1e-12\n")
    out = tmp_path / "fail"
    assert main(["solve-full", "--config", str(slow), "--out-dir", str(out)]) == 2
    assert "error" in json.loads((out / "ks_report.json").read_text())


def test_collide(tmp_path, capsys):
    grid = PhaseGrid(SpatialGrid(2.0, 2), VelocityGrid(3.0, 8))
    write_field(tmp_path / "f.bin", gaussian_data(grid, 1.0))
    rep = tmp_path / "r.json"
    assert main(["collide", "--input", str(tmp_path / "f.bin"), "--sphere", "1,4", "--out",
                 str(tmp_path / "q.bin"), "--report", str(rep)]) == 0
    d = json.loads(rep.read_text())
    assert abs(d["relative_moments"][1]) < 1e-10 and d["positivity_min"]["gain"] >= 0
    assert read_field(tmp_path / "q.bin").grid == grid
    assert main(["collide", "--input", str(tmp_path / "none.bin")]) == 1


def test_solve_pipeline_and_manifest(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["solve-full", *SMALL, "--out-dir", str(out)]) == 0
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert ma["input_hash"] == mb["input_hash"]
    assert (a / "ks_report.json").read_bytes() == (b / "ks_report.json").read_bytes()
    ks = json.loads((a / "ks_report.json").read_text())
    assert ks["sandwich_ok"] and ks["gap_history"][-1] < 1e-6 and "residual_ok" in ks
    traj = read_trajectory(a / "trajectory")
    assert traj.values.shape[0] == 3
    assert main(["scatter", *SMALL, "--out-dir", str(a), "--trajectory", str(a / "trajectory")]) == 0
    lines = (a / "scatter.csv").read_text().splitlines()
    assert lines[0] == "t,cauchy_difference,direct_difference" and len(lines) == 3
    assert main(["emit-plots", str(a)]) == 0
    assert (a / "plot_gap_history.csv").is_file() and (a / "plot_scatter.csv").is_file()
    assert main(["emit-plots", str(tmp_path / "empty")]) == 1
    c = tmp_path / "c"
    assert main(["solve-full", *SMALL, "--amplitude", "0.04", "--out-dir", str(c)]) == 0
    assert json.loads((c / "manifest.json").read_text())["input_hash"] != ma["input_hash"]


def test_solve_gain_and_run(tmp_path):
    out = tmp_path / "g"
    assert main(["solve-gain", *SMALL, "--method", "series", "--out-dir", str(out)]) == 0
    rep = json.loads((out / "solve_report.json").read_text())
    assert len(rep["term_norms"]) == 3 and rep["min_value"] >= 0
    cfg = tmp_path / "gain.cfg"
    cfg.write_text("command = solve-gain\ngrid = 2,4,3\nextent = 2,2,0.5\namplitude = 0.05\n"
                   f"out_dir = {tmp_path / 'r'}\n")
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "r" / "norm_history.csv").is_file()
    man = json.loads((tmp_path / "r" / "manifest.json").read_text())
    assert man["input_hashes"]["config_file"] == blob_hash(cfg.read_bytes())


def test_probe_command(tmp_path, capsys):
    d = run_json(capsys, ["probe", "--estimate", "hls", "--samples", "3"])
    assert d["samples"] == 3 and len(d["ratios"]) == 3
    outp = tmp_path / "probe_hls.json"
    assert main(["probe", "--estimate", "hls", "--samples", "3", "--out", str(outp)]) == 0
    assert json.loads(outp.read_text())["ratios"] == d["ratios"]
    assert main(["emit-plots", str(tmp_path)]) == 0
    counts = np.loadtxt(tmp_path / "plot_probe_hls_histogram.csv", delimiter=",", skiprows=1)[:, 2]
    assert counts.sum() == 3


def test_negative_values_joined():
    from kml.cli import _join_negative_values

    assert _join_negative_values(["--gamma", "-1/2", "-v"]) == ["--gamma=-1/2", "-v"]
    assert _join_negative_values(["--grid", "2,4,3"]) == ["--grid", "2,4,3"]
