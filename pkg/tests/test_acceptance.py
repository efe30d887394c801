"""
Acceptance criteria, one test per criterion.

Each test prints a single ``PASS``/``FAIL`` line with the measured numbers
before asserting, so the verdicts show up in ``pytest -v`` output.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from waveray.cli import launch_figure, main
from waveray.config import load_config
from waveray.integrator import run
from waveray.model import SimConfig, harmonic_potential
from waveray.oracles import (
    binned_intensity,
    density_histogram,
    fringe_positions,
    gaussian_envelope,
    paraxial_propagate,
)
from waveray.profiles import Algebraic, Gaussian, Uniform, eval_G0, eval_R, make_front
from waveray.svg import parse_polylines, render, transform
from waveray.wavefront import estimate_G, front_geometry, stencil_second_derivative

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def verdict(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail}")
    assert ok, f"criterion {number} failed: {detail}"


def test_criterion_1_gaussian_spreading(capsys):
    cfg = SimConfig(profile=Gaussian(0.1), n_rays=101, span=30.0, d_tau=0.1, zeta_max=700.0)
    t0 = time.perf_counter()
    traj = run(cfg)
    wall = time.perf_counter() - t0
    xi0 = traj.samples["xi0"][0]
    sel = (np.abs(xi0) <= 20.0) & (xi0 != 0.0)
    final = traj.final("xi")
    ref = gaussian_envelope(xi0[sel], 700.0, 0.1)
    err = float(np.max(np.abs(np.abs(final[sel]) - np.abs(ref)) / np.abs(ref)))
    reached = bool(np.all(traj.final("zeta") >= 700.0))
    ok = len(traj.crossings) == 0 and err <= 0.03 and wall < 10.0 and reached
    verdict(capsys, 1, "Gaussian spreading", ok,
            f"crossings={len(traj.crossings)} max envelope error={err:.2e} (<= 3e-2) runtime={wall:.1f}s (< 10s)")


def test_criterion_2_classical_limit(capsys):
    flat = run(SimConfig(profile=Uniform(0.1), n_rays=101, span=30.0, d_tau=0.1, zeta_max=700.0))
    dev = float(np.max(np.abs(flat.samples["xi"] - flat.samples["xi0"])))
    omega = 0.1
    osc = run(SimConfig(profile=Gaussian(0.1), medium=harmonic_potential(omega), n_rays=11, span=20.0, d_tau=0.01,
                        zeta_max=1e9, max_steps=10000, g_source="off", force_mode="cartesian",
                        renormalize=False, retire_crossed=False, output_stride=50))
    ref = osc.samples["xi0"] * np.cos(omega * osc.tau)[:, None]
    osc_err = float(np.max(np.abs(osc.samples["xi"] - ref)))
    ok = dev <= 1e-12 and osc_err <= 1e-8 and osc.tau[-1] == pytest.approx(100.0)
    verdict(capsys, 2, "classical limit", ok,
            f"straight-line deviation={dev:.1e} (<= 1e-12) oscillator error={osc_err:.1e} (<= 1e-8)")


def test_criterion_3_fringe_formation(capsys, algebraic_run):
    found = None
    events = [g for g in algebraic_run.gatherings if g.zeta <= 700.0]
    for g in events:
        d = density_histogram(algebraic_run, g.zeta, bins=64)
        peaks = fringe_positions(d.values, d.centers)
        if len(peaks) >= 2:
            found = (g, peaks)
            break
    first = algebraic_run.first_gathering
    detail = f"gatherings<=700: {len(events)}, first at zeta={first.zeta:.1f}" if first else "no gathering"
    if found:
        g, peaks = found
        detail += f"; density at zeta={g.zeta:.1f} has {len(peaks)} maxima at {[round(p, 1) for p in peaks]}"
    verdict(capsys, 3, "fringe formation", found is not None, detail)


def test_criterion_4_cross_method_agreement(capsys, algebraic_run):
    stations = (200.0, 400.0, 700.0)
    slices = {s.zeta: s for s in paraxial_propagate(Algebraic(0.1, 1), grid=(1000.0, 8192), zeta_max=700.0,
                                                      d_zeta=700.0, stations=stations)}
    parts, ok = [], True
    for z in stations:
        d = density_histogram(algebraic_run, z, bins=64)
        p_traj = fringe_positions(d.values, d.centers)
        p_wave = fringe_positions(binned_intensity(slices[z], d.edges), d.centers)
        match = len(p_traj) == len(p_wave) and all(abs(a - b) <= 2 * d.bin_width for a, b in zip(p_traj, p_wave))
        ok &= match
        parts.append(f"zeta={z:g}: {len(p_traj)} vs {len(p_wave)} peaks, bin={d.bin_width:.2f}, "
                     f"offsets={[round(abs(a - b), 2) for a, b in zip(p_traj, p_wave)]}")
    verdict(capsys, 4, "cross-method agreement", ok, "; ".join(parts))


def test_criterion_5_epsilon_focusing(capsys, tmp_path):
    out = tmp_path / "sweep"
    code = main(["sweep", "--config", str(CONFIGS / "sweep_epsilon.ini"), "--out", str(out), "--jobs", "3"])
    doc = json.loads((out / "report.json").read_text())
    pts = sorted(doc["points"], key=lambda r: r["epsilon"])
    eps = [r["epsilon"] for r in pts]
    z = [r["first_gathering_zeta"] for r in pts]
    ok = code == 0 and eps == [0.05, 0.1, 0.2] and None not in z and z[0] > z[1] > z[2]
    verdict(capsys, 5, "epsilon focusing", ok,
            "first gathering zeta " + ", ".join(f"eps={e:g}: {v:.1f}" if v else f"eps={e:g}: none" for e, v in zip(eps, z)))


def test_criterion_6_conservation(capsys, gaussian_run):
    norm = float(np.max(gaussian_run.drift["max_norm_drift"]))
    frozen = run(SimConfig(profile=Gaussian(0.1), n_rays=101, span=30.0, d_tau=0.1, zeta_max=1e9, max_steps=7000,
                           g_source="launch", force_mode="cartesian", renormalize=False, output_stride=100))
    h_frozen = float(np.max(frozen.drift["max_h_drift"]))
    h_self = float(np.max(gaussian_run.drift["max_h_drift"]))
    reported = gaussian_run.drift["max_h_drift"].size == gaussian_run.steps
    ok = norm <= 1e-14 and h_frozen <= 1e-8 and h_self <= 1e-3 and reported
    verdict(capsys, 6, "conservation", ok,
            f"vacuum | |rho|-1 |={norm:.1e} (<= 1e-14) frozen-G H drift={h_frozen:.1e} (<= 1e-8) "
            f"self-consistent H drift={h_self:.1e} (<= 1e-3, reported per step)")


def _rk4_final(d_tau, T=60.0):
    cfg = SimConfig(profile=Gaussian(0.3), g_source="launch", span=10.0, n_rays=21, d_tau=d_tau,
                    zeta_max=1e9, max_steps=int(round(T / d_tau)), output_stride=10**6)
    return run(cfg).final("xi")


def test_criterion_7_stencils_and_convergence(capsys):
    # exactness on a quadratic amplitude
    s = np.linspace(-3.0, 3.0, 13)
    R = 0.7 * s**2 - 0.4 * s + 9.0
    quad = float(np.max(np.abs(stencil_second_derivative(s, R) - 1.4)))
    # launch G at spacing 0.5
    launch = {}
    for p in (Gaussian(0.1), Algebraic(0.1, 1)):
        f = make_front(p, 121, 30.0)
        gf = estimate_G(f, front_geometry(f))
        err = np.abs(gf.g - eval_G0(p, f.xi0))
        launch[p.kind] = (float(np.max(err[np.abs(f.xi0) <= 15.0])), float(np.max(err)))
    launch_ok = all(core <= 1e-4 for core, _ in launch.values())
    # spatial order
    errs = []
    for n in (61, 121, 241, 481):
        f = make_front(Gaussian(0.1), n, 30.0)
        gf = estimate_G(f, front_geometry(f))
        errs.append(np.max(np.abs(gf.g[1:-1] - eval_G0(Gaussian(0.1), f.xi0[1:-1]))))
    spatial = math.log2(errs[-2] / errs[-1])
    # temporal order
    ref = _rk4_final(0.0125)
    e = [np.max(np.abs(_rk4_final(h) - ref)) for h in (0.4, 0.2, 0.1)]
    temporal = min(math.log2(e[i] / e[i + 1]) for i in range(2))
    ok = quad <= 1e-13 and launch_ok and spatial >= 1.9 and temporal >= 3.5
    verdict(capsys, 7, "stencils and convergence", ok,
            f"quadratic error={quad:.1e} launch-G error on |xi|<=15: "
            + ", ".join(f"{k}={v[0]:.1e} (full span {v[1]:.1e})" for k, v in launch.items())
            + f" spatial order={spatial:.2f} RK4 order={temporal:.2f}")


def test_criterion_8_determinism_and_figures(capsys, tmp_path):
    stable = {}
    for name in ("figure1", "figure2", "figure3", "figure4"):
        outs = []
        for k in range(2):
            d = tmp_path / f"{name}_{k}"
            assert main(["simulate", "--config", str(CONFIGS / f"{name}.ini"), "--out", str(d)]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(d.glob("*.svg"))})
        stable[name] = bool(outs[0]) and outs[0] == outs[1]
    exact = True
    for name, kind, func in (("figure1", "profiles", eval_R), ("figure2", "launchG", eval_G0)):
        fig = launch_figure(load_config(CONFIGS / f"{name}.ini"), kind)
        for series, p in zip(fig.series, (Gaussian(0.1), Algebraic(0.1, 1))):
            exact &= bool(np.array_equal(series.y, func(p, series.x)))
        fx, fy, _, _ = transform(fig)
        for pts, series in zip(parse_polylines(render(fig)), fig.series):
            exact &= bool(np.allclose(pts[:, 1], np.round(fy(series.y), 2), atol=1e-9))
    ok = all(stable.values()) and exact
    verdict(capsys, 8, "determinism and figures", ok,
            "byte-stable SVGs: " + ", ".join(f"{k}={'yes' if v else 'no'}" for k, v in stable.items())
            + f"; launch curves equal eval_R/eval_G0 samples: {'yes' if exact else 'no'}")
