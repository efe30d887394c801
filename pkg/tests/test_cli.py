import csv
import json
from pathlib import Path

import numpy as np
import pytest

from waveray.cli import main, read_trajectories_csv, trajectories_csv
from waveray.config import load_config, load_spec
from waveray.integrator import run
from waveray.svg import parse_polylines

SMALL = """
[profile]
kind = algebraic
epsilon = 0.2
n_exp = 1

[numerics]
n_rays = 21
zeta_max = 60

[outputs]
figures = trajectories, density
stations = 30, 60
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def files(d: Path):
    return sorted(p.relative_to(d).as_posix() for p in d.rglob("*") if p.is_file())


def test_simulate_writes_listed_artifacts(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    listed = {o["path"] for o in manifest["outputs"]}
    assert listed == {"trajectories.csv", "density.csv", "trajectories.svg", "density.svg", "report.json"}
    for name in listed:
        assert (out / name).is_file()
    assert manifest["config_hash"] == load_config(cfg).config_hash
    assert manifest["wall_time_s"] >= 0
    roles = {o["path"]: o["role"] for o in manifest["outputs"]}
    assert roles["trajectories.csv"] == "trajectories" and roles["density.svg"] == "figure"

    with open(out / "trajectories.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["ray_id", "tau", "xi", "zeta", "rho_x", "rho_z", "amp_R", "g_val", "phase", "clamped"]
    report = json.loads((out / "report.json").read_text())
    for key in ("steps", "max_h_drift", "max_norm_drift", "crossings", "retirements", "first_gathering"):
        assert key in report
    svg = (out / "trajectories.svg").read_text()
    assert len(parse_polylines(svg)) == 21


def test_simulate_is_byte_deterministic(tmp_path):
    cfg = write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(b)]) == 0
    assert files(a) == files(b)
    for name in files(a):
        if name != "manifest.json":
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert ma["config_hash"] == mb["config_hash"]


def test_config_hash_ignores_formatting(tmp_path):
    a = load_spec(SMALL, tmp_path)
    b = load_spec(SMALL.replace("epsilon = 0.2", "epsilon=0.20") + "\n# comment\n", tmp_path)
    assert a.config_hash == b.config_hash
    c = load_spec(SMALL.replace("n_rays = 21", "n_rays = 23"), tmp_path)
    assert c.config_hash != a.config_hash


def test_csv_round_trips_full_precision(tmp_path):
    spec = load_spec(SMALL, tmp_path)
    traj = run(spec.sim)
    p = tmp_path / "t.csv"
    p.write_text(trajectories_csv(traj))
    rays = read_trajectories_csv(p)
    for j in (0, 10, 20):
        ok = traj.alive[:, j]
        np.testing.assert_array_equal(rays[j]["xi"], traj.samples["xi"][ok, j])
        np.testing.assert_array_equal(rays[j]["zeta"], traj.samples["zeta"][ok, j])


@pytest.mark.parametrize(
    "text, message",
    [
        (SMALL.replace("n_rays = 21", "n_rays = 2"), "n_rays"),
        (SMALL.replace("n_rays = 21", "n_rayz = 21"), "n_rayz"),
        (SMALL.replace("[outputs]", "[output]"), "output"),
        (SMALL.replace("kind = algebraic", "kind = lorentzian"), "lorentzian"),
        (SMALL.replace("epsilon = 0.2", "epsilon = wide"), "epsilon"),
    ],
)
def test_config_errors_exit_2(tmp_path, capsys, text, message):
    cfg = write(tmp_path, text)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert message in capsys.readouterr().err


def test_missing_config_and_bad_flags_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["simulate", "--config", str(tmp_path / "absent.ini")]) == 2
    assert main(["simulate", "--config", str(cfg), "--seedless"]) == 2
    assert "seedless" in capsys.readouterr().err
    assert main(["simulate", "--config", str(cfg), "--jobs", "0"]) == 2
    assert main(["frobnicate"]) == 2


def test_plot_kinds_and_mismatch(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    figs = tmp_path / "figs"
    assert main(["plot", str(out), "--kind", "trajectories", "--out", str(figs)]) == 0
    assert len(parse_polylines((figs / "trajectories.svg").read_text())) == 21
    assert main(["plot", str(out / "density.csv"), "--kind", "density", "--out", str(figs)]) == 0
    assert len(parse_polylines((figs / "density.svg").read_text())) == 2
    assert main(["plot", "--config", str(cfg), "--kind", "profiles", "--out", str(figs)]) == 0
    # kind / artifact mismatches
    assert main(["plot", str(out / "density.csv"), "--kind", "trajectories", "--out", str(figs)]) == 2
    assert main(["plot", str(out / "trajectories.csv"), "--kind", "density", "--out", str(figs)]) == 2
    assert main(["plot", str(out / "report.json"), "--kind", "profiles", "--out", str(figs)]) == 2
    assert main(["plot", str(tmp_path / "nothing"), "--kind", "density", "--out", str(figs)]) == 2


def test_collapse_exits_3_with_partial_artifacts(tmp_path):
    text = SMALL + "\n[medium]\nkind = linear_index\nalpha = 0.05\n"
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 3
    report = json.loads((out / "report.json").read_text())
    assert report["collapsed"] is True
    assert (out / "trajectories.csv").is_file() and (out / "manifest.json").is_file()


def test_compare_uniform_beam_is_exact(tmp_path):
    cfg = Path(__file__).resolve().parents[1] / "configs" / "compare_uniform.ini"
    out = tmp_path / "out"
    assert main(["compare", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads((out / "compare.json").read_text())
    assert doc["straight_line"]["max_abs_deviation"] <= 1e-12
    assert doc["passed"] is True


def test_compare_exits_4_when_a_tolerance_fails(tmp_path):
    # a Gaussian beam without the wave potential does not spread
    text = """
[profile]
kind = gaussian
epsilon = 0.1

[numerics]
n_rays = 41
zeta_max = 300
g_source = off
"""
    cfg = write(tmp_path, text)
    out = tmp_path / "out"
    assert main(["compare", "--config", str(cfg), "--out", str(out)]) == 4
    doc = json.loads((out / "compare.json").read_text())
    assert doc["checks"]["envelope"] is False
    assert doc["envelope"]["max_rel_error"] > 0.03


SWEEP = """
[profile]
kind = algebraic
n_exp = 1

[numerics]
n_rays = 41
zeta_max = 400
stop_on_gathering = true

[sweep]
epsilon = {eps}
"""


def test_single_point_sweep_matches_simulate(tmp_path):
    cfg = write(tmp_path, SWEEP.format(eps="0.2"), "sweep.ini")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "sw")]) == 0
    single = write(tmp_path, SWEEP.format(eps="0.2").replace("n_exp = 1", "n_exp = 1\nepsilon = 0.2"), "one.ini")
    assert main(["simulate", "--config", str(single), "--out", str(tmp_path / "one")]) == 0
    point = tmp_path / "sw" / "eps_0.2"
    for name in ("trajectories.csv", "report.json"):
        assert (point / name).read_bytes() == (tmp_path / "one" / name).read_bytes()


def test_sweep_order_independence_and_monotonicity(tmp_path):
    a = write(tmp_path, SWEEP.format(eps="0.3, 0.15, 0.2"), "a.ini")
    b = write(tmp_path, SWEEP.format(eps="0.15, 0.2, 0.3"), "b.ini")
    assert main(["sweep", "--config", str(a), "--out", str(tmp_path / "a"), "--jobs", "2"]) == 0
    assert main(["sweep", "--config", str(b), "--out", str(tmp_path / "b")]) == 0
    sa = (tmp_path / "a" / "summary.csv").read_text()
    assert sa == (tmp_path / "b" / "summary.csv").read_text()
    rows = list(csv.DictReader(sa.splitlines()))
    assert [float(r["epsilon"]) for r in rows] == [0.15, 0.2, 0.3]
    z = [float(r["first_gathering_zeta"]) for r in rows]
    assert z[0] > z[1] > z[2]
    doc = json.loads((tmp_path / "a" / "report.json").read_text())
    assert doc["first_gathering_strictly_decreasing"] is True
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    for o in manifest["outputs"]:
        assert (tmp_path / "a" / o["path"]).is_file()


def test_sweep_without_section_is_a_config_error(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
