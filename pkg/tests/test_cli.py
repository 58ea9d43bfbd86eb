import json
import subprocess
import sys

import numpy as np
import pytest

from grazesim.cli import load_config, main, resolve_config
from grazesim.output import TIMESTAMP_PREFIX, dump_config, load_json_config, read_csv

MAP = {"map": {"tau": 0.5, "delta": 0.05, "chi": 1, "mu": 0.005},
       "noise": {"eps": 0.00025, "theta": [1.0, 0.0, 1.0]}, "seed": 3}
OSC = {"oscillator": {"k_osc": 5.0, "b_osc": 0.5, "k_supp": 10.0, "b_supp": 0.0, "d": 0.1},
       "eps": 5e-5, "seed": 4}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, cmd, cfg, *extra, out="out"):
    return main([cmd, "--config", write(tmp_path, cfg), "--out", str(tmp_path / out), *extra])


def body(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith(TIMESTAMP_PREFIX)]


def test_bifurcation_and_reproducible(tmp_path):
    cfg = dict(MAP, mu_grid={"start": -0.005, "stop": 0.02, "num": 6}, iterates=200, discard=500)
    assert run(tmp_path, "bifurcation", cfg, out="a") == 0
    assert run(tmp_path, "bifurcation", cfg, out="b") == 0
    for name in ("bifurcation_scatter.csv", "bifurcation_branches.csv"):
        a, b = tmp_path / "a" / name, tmp_path / "b" / name
        assert body(a) == body(b)
        assert any(ln.startswith(TIMESTAMP_PREFIX) for ln in a.read_text().splitlines())
    header, rows = read_csv(tmp_path / "a" / "bifurcation_scatter.csv")
    assert header == ["mu", "x", "y"] and len(rows) == 6 * 200
    assert run(tmp_path, "bifurcation", cfg, "--seed", "99", out="c") == 0
    assert body(tmp_path / "c" / "bifurcation_scatter.csv") != body(tmp_path / "a" / "bifurcation_scatter.csv")


def test_bifurcation_zero_noise_collapses(tmp_path):
    cfg = dict(MAP, noise={"eps": 0.0}, mu_grid={"start": -0.01, "stop": 0.02, "num": 4},
               iterates=50, discard=5000)
    assert run(tmp_path, "bifurcation", cfg) == 0
    _, scatter = read_csv(tmp_path / "out" / "bifurcation_scatter.csv")
    _, branches = read_csv(tmp_path / "out" / "bifurcation_branches.csv")
    for mu, x, _ in scatter:
        xs = [float(b[4]) for b in branches if float(b[0]) == float(mu)]
        assert xs and min(abs(float(x) - v) for v in xs) < 1e-6


def test_density_clusters_and_plot(tmp_path):
    cfg = dict(MAP, iterates=100_000, discard=1000, clusters=True,
               histogram={"nx": 64, "ny": 64, "xlim": [-0.012, 0.008], "ylim": [-0.006, 0.008]})
    assert run(tmp_path, "density", cfg, "--plot") == 0
    out = tmp_path / "out"
    header, rows = read_csv(out / "density_histogram.csv")
    assert header == ["x_center", "y_center", "count", "probability"]
    assert all(int(r[2]) > 0 for r in rows)
    _, clusters = read_csv(out / "density_clusters.csv")
    assert len(clusters) == 4
    assert abs(sum(float(r[3]) for r in clusters) - 1.0) < 0.01
    assert (out / "density.png").stat().st_size > 0


def test_density_attractors(tmp_path):
    cfg = dict(MAP, iterates=20_000, discard=1000, attractors=True)
    assert run(tmp_path, "density", cfg) == 0
    _, rows = read_csv(tmp_path / "out" / "density_attractors.csv")
    assert [r[0] for r in rows] == ["period-4", "other"]
    assert sum(float(r[3]) for r in rows) == pytest.approx(1.0)


def test_periodic_and_covariance(tmp_path):
    cfg = dict(MAP, mu_grid={"start": 0.001, "stop": 0.03, "num": 60}, n_max=5)
    assert run(tmp_path, "periodic", cfg) == 0
    _, wins = read_csv(tmp_path / "out" / "periodic_windows.csv")
    assert sorted(int(w[0]) for w in wins) == [3, 4, 5]
    assert run(tmp_path, "covariance", MAP) == 0
    _, rows = read_csv(tmp_path / "out" / "covariance_lambda.csv")
    assert [int(r[0]) for r in rows] == [4, 4, 4, 4]


def test_derive_params(tmp_path):
    assert run(tmp_path, "derive-params", OSC) == 0
    d = json.loads((tmp_path / "out" / "derive-params.json").read_text())
    assert round(d["tau"], 5) == 0.07264 and round(d["delta"], 5) == 0.04321 and d["chi"] == 1
    assert np.allclose(d["theta"], [662.6, -7.450, 28.29], rtol=5e-4)


def test_oscillator_and_compare(tmp_path):
    cfg = dict(OSC, forcing_grid={"start": 4.1, "stop": 4.2, "num": 2}, periods=20, transient=10,
               map_iterates=20, etas=[0.15])
    assert run(tmp_path, "oscillator", cfg, "--plot") == 0
    out = tmp_path / "out"
    for name in ("oscillator_pi.csv", "oscillator_pi_prime.csv", "oscillator_map.csv", "oscillator.png"):
        assert (out / name).exists()
    assert run(tmp_path, "compare", cfg) == 0
    header, rows = read_csv(out / "compare_summary.csv")
    assert len(rows) == 1 and header[0] == "F"


def test_fraction_and_scaling(tmp_path):
    cfg = dict(MAP, eps_list=[2e-4, 5e-4, 8e-4], iterates=20_000, discard=1000, period=4)
    assert run(tmp_path, "fraction", cfg) == 0
    text = (tmp_path / "out" / "fraction_fraction.csv").read_text()
    assert "steepest_descent_eps" in text
    cfg = dict(MAP, eps_list=[1e-4, 4e-4], iterates=20_000, discard=1000)
    cfg["map"] = dict(MAP["map"], mu=0.0)
    assert run(tmp_path, "scaling", cfg) == 0
    _, rows = read_csv(tmp_path / "out" / "scaling_std.csv")
    assert len(rows) == 2


@pytest.mark.parametrize("cfg", [
    dict(MAP, mystery=1),
    dict(MAP, map={"tau": 0.5, "delta": 0.05, "chi": 1, "mu": 0.005, "extra": 2}),
    dict(MAP, map={"tau": 0.5, "delta": 0.05, "chi": 0, "mu": 0.005}),
    dict(MAP, noise={"eps": -1.0}),
    dict(MAP, noise={"eps": 1e-3, "theta": [1.0, 2.0, 1.0]}),
])
def test_config_errors(tmp_path, cfg, capsys):
    assert run(tmp_path, "covariance", cfg) == 2
    assert "config error" in capsys.readouterr().err


def test_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"map": {"tau": 0.5,\n  "delta": }}')
    assert main(["covariance", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_bad_seed(tmp_path):
    assert run(tmp_path, "covariance", MAP, "--seed", "-4") == 2


def test_numerical_failure(tmp_path, capsys):
    cfg = dict(MAP, map={"tau": 3.0, "delta": 0.05, "chi": 1}, mu_grid={"start": -0.1, "stop": -0.1, "num": 1},
               iterates=100, discard=10)
    assert run(tmp_path, "bifurcation", cfg) == 3
    assert "Diverged" in capsys.readouterr().err


def test_config_round_trip(tmp_path):
    cfg = dict(MAP, mu_grid={"start": 0.0, "stop": 0.01, "num": 3})
    path = write(tmp_path, cfg)
    a = load_config("bifurcation", path)
    p2 = tmp_path / "again.json"
    p2.write_text(dump_config(a))
    b = load_config("bifurcation", p2)
    assert a == b and dump_config(b) == dump_config(a)
    assert load_json_config(p2) == cfg


def test_presets_load():
    for name, cmd in [("fig2", "bifurcation"), ("fig3", "bifurcation"), ("fig5", "oscillator"),
                      ("fig6", "fraction"), ("fig7", "density"), ("fig8", "scaling"), ("fig9", "density")]:
        assert resolve_config(name).exists()
        load_config(cmd, name)


def test_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "grazesim.cli", "derive-params", "--config", "fig5",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "derive-params.json").exists()
