"""
Command-line front end: ``waveray simulate|plot|compare|sweep``.

Exit codes: 0 success, 2 configuration or usage error, 3 front collapse
(partial artifacts are kept), 4 a comparison tolerance failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from waveray import __version__
from waveray.config import RunSpec, load_config, load_spec
from waveray.integrator import run
from waveray.model import RAY_FIELDS, ConfigError, TrajectorySet
from waveray.oracles import (
    DomainTooSmall,
    StationOutOfRange,
    binned_intensity,
    density_histogram,
    fringe_positions,
    gaussian_envelope,
    paraxial_propagate,
    station_crossings,
)
from waveray.profiles import Algebraic, Gaussian, Scaled, Uniform
from waveray.svg import Figure, profile_figure, render

log = logging.getLogger("waveray")

EXIT_OK, EXIT_CONFIG, EXIT_COLLAPSE, EXIT_TOLERANCE = 0, 2, 3, 4

TOLERANCES = {
    "envelope_rel": 0.03,
    "straight_line_abs": 1e-12,
    "fringe_bins": 2.0,
}
CSV_COLUMNS = ("ray_id", "tau", "xi", "zeta", "rho_x", "rho_z", "amp_R", "g_val", "phase", "clamped")


# --------------------------------------------------------------------------
# Serialization helpers
# --------------------------------------------------------------------------


def write_atomic(path: Path, data: str) -> None:
    """Write ``data`` to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        os.chmod(tmp, 0o644)
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(v):
    """Round-trip text for CSV cells."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _clean(obj):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def trajectories_csv(traj: TrajectorySet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    cols = {name: traj.samples[name] for name in RAY_FIELDS}
    for k in range(traj.tau.size):
        tau = traj.tau[k]
        for j in np.flatnonzero(traj.alive[k]):
            row = []
            for c in CSV_COLUMNS:
                if c == "tau":
                    row.append(_num(tau))
                elif c == "ray_id":
                    row.append(str(int(cols["ray_id"][k, j])))
                elif c == "clamped":
                    row.append("1" if cols["clamped"][k, j] else "0")
                else:
                    row.append(_num(cols[c][k, j]))
            w.writerow(row)
    return buf.getvalue()


def read_trajectories_csv(path: Path) -> dict:
    """Per-ray arrays ``{ray_id: {"xi": ..., "zeta": ...}}`` from a trajectories file."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ConfigError(f"{path} is not a trajectories file")
        rays = {}
        for row in reader:
            r = rays.setdefault(int(row["ray_id"]), {"xi": [], "zeta": []})
            r["xi"].append(float(row["xi"]))
            r["zeta"].append(float(row["zeta"]))
    return {k: {n: np.array(v) for n, v in d.items()} for k, d in sorted(rays.items())}


def run_report(traj: TrajectorySet) -> dict:
    d = traj.drift
    g = traj.first_gathering

    def peak(name):
        arr = d.get(name, np.array([]))
        return float(np.nanmax(arr)) if arr.size else 0.0

    return {
        "steps": traj.steps,
        "tau_final": float(traj.tau[-1]),
        "collapsed": traj.collapsed,
        "n_rays": traj.n_rays,
        "n_alive_final": int(traj.alive[-1].sum()),
        "max_h_drift": peak("max_h_drift"),
        "max_norm_drift": peak("max_norm_drift"),
        "max_flux_drift": peak("max_flux_drift"),
        "crossings": len(traj.crossings),
        "crossing_events": [[s, a, b] for s, (a, b) in traj.crossings],
        "gatherings": len(traj.gatherings),
        "first_gathering": None
        if g is None
        else {"step": g.step, "tau": g.tau, "zeta": g.zeta, "xi": g.xi, "pair": list(g.pair),
              "compression": g.compression, "crossed": g.crossed},
        "retirements": len(traj.retired),
        "retired_events": [[s, r] for s, r in traj.retired],
    }


def density_csv(densities) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("zeta", "bin_lo", "bin_hi", "center", "density"))
    for d in densities:
        for lo, hi, c, v in zip(d.edges[:-1], d.edges[1:], d.centers, d.values):
            w.writerow((_num(d.zeta), _num(lo), _num(hi), _num(c), _num(v)))
    return buf.getvalue()


def read_density_csv(path: Path) -> dict:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != ("zeta", "bin_lo", "bin_hi", "center", "density"):
            raise ConfigError(f"{path} is not a density file")
        out = {}
        for row in reader:
            s = out.setdefault(float(row["zeta"]), ([], []))
            s[0].append(float(row["center"]))
            s[1].append(float(row["density"]))
    return {z: (np.array(c), np.array(v)) for z, (c, v) in sorted(out.items())}


def slices_csv(slices) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("zeta", "xi", "psi_re", "psi_im", "intensity"))
    for s in slices:
        inten = s.intensity
        for x, p, i in zip(s.xi_grid, s.psi, inten):
            w.writerow((_num(s.zeta), _num(x), _num(p.real), _num(p.imag), _num(i)))
    return buf.getvalue()


# --------------------------------------------------------------------------
# Figures
# --------------------------------------------------------------------------


def _figure_profiles(spec: RunSpec):
    p = spec.sim.profile
    base = p.base if isinstance(p, Scaled) else p
    eps = base.width_parameter
    if isinstance(base, (Gaussian, Algebraic)):
        n_exp = base.n_exp if isinstance(base, Algebraic) else 1
        profiles = [Gaussian(eps), Algebraic(eps, n_exp)]
        labels = [f"Gaussian, eps={eps:g}", f"algebraic N={n_exp}, eps={eps:g}"]
    else:
        profiles, labels = [p], [p.kind]
    return profiles, labels


def launch_figure(spec: RunSpec, kind: str) -> Figure:
    profiles, labels = _figure_profiles(spec)
    return profile_figure(profiles, labels, spec.sim.resolved_span, kind)


def trajectory_figure(rays: dict, span: float, zeta_max: float, title: str) -> Figure:
    fig = Figure(title, "xi", "zeta", xlim=(-1.5 * span, 1.5 * span), ylim=(0.0, zeta_max))
    for rid, r in rays.items():
        fig.add(r["xi"], r["zeta"], color="#1f4e9c", width=0.6)
    return fig


def _rays_from_traj(traj: TrajectorySet) -> dict:
    out = {}
    for j in range(traj.n_rays):
        ok = traj.alive[:, j]
        out[j] = {"xi": traj.samples["xi"][ok, j], "zeta": traj.samples["zeta"][ok, j]}
    return out


def density_figure(curves: dict, title: str) -> Figure:
    fig = Figure(title, "xi", "density")
    for z, (c, v) in curves.items():
        fig.add(c, v, label=f"zeta={z:g}")
    return fig


# --------------------------------------------------------------------------
# Pipelines
# --------------------------------------------------------------------------


class Outputs:
    def __init__(self, out_dir: Path):
        self.dir = Path(out_dir)
        self.items = []

    def write(self, name: str, text: str, role: str):
        write_atomic(self.dir / name, text)
        self.items.append({"path": name, "role": role})

    def manifest(self, spec_hash: str, command: str, started: float, source=None, extra=None):
        doc = {
            "tool_version": __version__,
            "config_hash": spec_hash,
            "command": command,
            "config_path": str(source) if source else None,
            "outputs": list(self.items),
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "wall_time_s": round(time.perf_counter() - started, 3),
        }
        if extra:
            doc.update(extra)
        write_atomic(self.dir / "manifest.json", dump_json(doc))


def _stations(spec: RunSpec):
    st = spec.outputs.stations or (spec.sim.zeta_max,)
    return tuple(s for s in st if s <= spec.sim.zeta_max)


def _densities(spec: RunSpec, traj: TrajectorySet):
    dens, missing = [], []
    for z in _stations(spec):
        try:
            dens.append(density_histogram(traj, z, spec.outputs.bins, method=spec.outputs.density_method))
        except StationOutOfRange as exc:
            missing.append({"zeta": z, "error": str(exc)})
    return dens, missing


def simulate(spec: RunSpec, out_dir: Path):
    """Run ``spec`` and write its artifacts; returns ``(exit_code, report)``."""
    started = time.perf_counter()
    outs = Outputs(out_dir)
    code = EXIT_OK
    report = {"run": spec.outputs.run}
    for kind in ("profiles", "launchG"):
        if kind in spec.outputs.figures:
            outs.write(f"{kind}.svg", render(launch_figure(spec, kind)), "figure")
    if spec.outputs.run:
        traj = run(spec.sim)
        report.update(run_report(traj))
        outs.write("trajectories.csv", trajectories_csv(traj), "trajectories")
        dens, missing = _densities(spec, traj)
        if dens:
            outs.write("density.csv", density_csv(dens), "density")
        report["density_stations"] = [d.zeta for d in dens]
        report["density_missing"] = missing
        if "trajectories" in spec.outputs.figures:
            fig = trajectory_figure(_rays_from_traj(traj), spec.sim.resolved_span, spec.sim.zeta_max,
                                    f"Trajectories ({spec.sim.profile.kind})")
            outs.write("trajectories.svg", render(fig), "figure")
        if "density" in spec.outputs.figures and dens:
            fig = density_figure({d.zeta: (d.centers, d.values) for d in dens}, "Ray density")
            outs.write("density.svg", render(fig), "figure")
        if spec.outputs.paraxial:
            slices = paraxial_propagate(
                spec.sim.profile,
                (spec.outputs.paraxial_half_width, spec.outputs.paraxial_points),
                spec.sim.zeta_max,
                spec.sim.zeta_max,
                stations=_stations(spec),
            )
            keep = [s for s in slices if s.zeta in set(_stations(spec))]
            outs.write("slices.csv", slices_csv(keep), "slices")
        if traj.collapsed:
            code = EXIT_COLLAPSE
    outs.write("report.json", dump_json(report), "report")
    outs.manifest(spec.config_hash, "simulate", started, spec.source)
    return code, report


def _peaks_match(a, b, width):
    return len(a) == len(b) and all(abs(x - y) <= TOLERANCES["fringe_bins"] * width for x, y in zip(a, b))


def compare_report(spec: RunSpec, traj: TrajectorySet, slices=None) -> dict:
    """Cross-method checks of one run; ``passed`` is the conjunction of every applicable check."""
    checks = {}
    doc = {"tolerances": dict(TOLERANCES), "checks": checks, "stations": []}
    cfg = spec.sim
    base = cfg.profile.base if isinstance(cfg.profile, Scaled) else cfg.profile

    if isinstance(base, Gaussian) and base.epsilon <= 0.3 and cfg.medium.is_vacuum:
        lim = spec.outputs.envelope_limit
        ids, pos = station_crossings(traj, cfg.zeta_max)
        xi0 = traj.samples["xi0"][0, ids]
        sel = (np.abs(xi0) <= lim) & (xi0 != 0.0)
        ref = gaussian_envelope(xi0[sel], cfg.zeta_max, base.epsilon)
        err = np.abs(pos[sel] - ref) / np.abs(ref)
        doc["envelope"] = {
            "zeta": cfg.zeta_max,
            "xi0_limit": lim,
            "rays_checked": int(sel.sum()),
            "rays_missing": int(np.sum(np.abs(traj.samples["xi0"][0]) <= lim) - np.sum(np.abs(xi0) <= lim)),
            "max_rel_error": float(err.max()) if err.size else None,
        }
        checks["envelope"] = bool(err.size) and float(err.max()) <= TOLERANCES["envelope_rel"] and \
            doc["envelope"]["rays_missing"] == 0
        checks["no_crossings"] = len(traj.crossings) == 0

    straight = isinstance(base, Uniform) or cfg.g_source == "off"
    if straight and cfg.medium.is_vacuum:
        dev = np.nanmax(np.abs(traj.samples["xi"] - traj.samples["xi0"]))
        doc["straight_line"] = {"max_abs_deviation": float(dev)}
        checks["straight_line"] = float(dev) <= TOLERANCES["straight_line_abs"]

    if slices is not None:
        by_zeta = {s.zeta: s for s in slices}
        ok_all = True
        for z in _stations(spec):
            entry = {"zeta": z}
            try:
                d = density_histogram(traj, z, spec.outputs.bins, method=spec.outputs.density_method)
            except StationOutOfRange as exc:
                entry["error"] = str(exc)
                ok_all = False
                doc["stations"].append(entry)
                continue
            p_traj = fringe_positions(d.values, d.centers)
            p_wave = fringe_positions(binned_intensity(by_zeta[z], d.edges), d.centers)
            match = _peaks_match(p_traj, p_wave, d.bin_width)
            entry.update(
                bin_width=d.bin_width,
                xi_range=[float(d.edges[0]), float(d.edges[-1])],
                trajectory_peaks=p_traj,
                paraxial_peaks=p_wave,
                match=match,
            )
            ok_all &= match
            doc["stations"].append(entry)
        checks["fringes"] = bool(ok_all)

    g = traj.first_gathering
    doc["first_gathering_zeta"] = None if g is None else g.zeta
    doc["crossings"] = len(traj.crossings)
    doc["passed"] = all(checks.values()) if checks else True
    return doc


def compare(spec: RunSpec, out_dir: Path):
    started = time.perf_counter()
    outs = Outputs(out_dir)
    traj = run(spec.sim)
    outs.write("trajectories.csv", trajectories_csv(traj), "trajectories")
    slices = None
    if spec.outputs.paraxial:
        slices = paraxial_propagate(
            spec.sim.profile,
            (spec.outputs.paraxial_half_width, spec.outputs.paraxial_points),
            spec.sim.zeta_max,
            spec.sim.zeta_max,
            stations=_stations(spec),
        )
        keep = [s for s in slices if s.zeta in set(_stations(spec))]
        outs.write("slices.csv", slices_csv(keep), "slices")
    doc = compare_report(spec, traj, slices)
    outs.write("report.json", dump_json(run_report(traj)), "report")
    outs.write("compare.json", dump_json(doc), "report")
    outs.manifest(spec.config_hash, "compare", started, spec.source)
    if traj.collapsed:
        return EXIT_COLLAPSE, doc
    return (EXIT_OK if doc["passed"] else EXIT_TOLERANCE), doc


def _sweep_point(text: str, base_dir: str, source: str, epsilon: float, out_dir: str):
    spec = load_spec(text, Path(base_dir), Path(source)).with_epsilon(epsilon)
    try:
        code, report = simulate(spec, Path(out_dir))
    except Exception as exc:  # recorded per point, the sweep carries on
        return {"epsilon": epsilon, "status": f"error: {exc}", "exit_code": None}
    g = report.get("first_gathering")
    return {
        "epsilon": epsilon,
        "status": "ok" if code == EXIT_OK else ("collapsed" if code == EXIT_COLLAPSE else f"exit {code}"),
        "exit_code": code,
        "first_gathering_zeta": None if g is None else g["zeta"],
        "first_gathering_xi": None if g is None else g["xi"],
        "crossings": report.get("crossings"),
        "steps": report.get("steps"),
    }


def point_dir(epsilon: float) -> str:
    return f"eps_{epsilon!r}"


def sweep(spec: RunSpec, text: str, out_dir: Path, jobs: int = 1):
    started = time.perf_counter()
    if not spec.sweep_epsilon:
        raise ConfigError("sweep needs a [sweep] section with an epsilon list")
    outs = Outputs(out_dir)
    eps = sorted(spec.sweep_epsilon)
    base_dir = str(spec.source.parent if spec.source else Path("."))
    source = str(spec.source or "")
    args = [(text, base_dir, source, e, str(Path(out_dir) / point_dir(e))) for e in eps]
    if jobs > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, *zip(*args)))
    else:
        rows = [_sweep_point(*a) for a in args]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ("epsilon", "first_gathering_zeta", "first_gathering_xi", "crossings", "steps", "status")
    w.writerow(cols)
    for r in rows:
        w.writerow(["" if r.get(c) is None else (_num(r[c]) if c not in ("status",) else r[c]) for c in cols])
    outs.write("summary.csv", buf.getvalue(), "summary")
    for e in eps:
        outs.items.append({"path": f"{point_dir(e)}/manifest.json", "role": "point"})

    zs = [r.get("first_gathering_zeta") for r in rows]
    known = all(z is not None for z in zs)
    decreasing = known and all(a > b for a, b in zip(zs, zs[1:]))
    doc = {"points": rows, "first_gathering_strictly_decreasing": decreasing}
    outs.write("report.json", dump_json(doc), "report")
    outs.manifest(spec.config_hash, "sweep", started, spec.source)
    ran = all(r["exit_code"] is not None for r in rows)
    return (EXIT_OK if ran else EXIT_CONFIG), doc


def plot(artifact: Path, kind: str, out_dir: Path):
    """Render ``kind`` from a config file, a run directory or a CSV artifact."""
    artifact = Path(artifact)
    target = Path(out_dir) / f"{kind}.svg"
    if artifact.suffix == ".ini":
        spec = load_config(artifact)
        if kind in ("profiles", "launchG"):
            fig = launch_figure(spec, kind)
        else:
            traj = run(spec.sim)
            if kind == "trajectories":
                fig = trajectory_figure(_rays_from_traj(traj), spec.sim.resolved_span, spec.sim.zeta_max,
                                        f"Trajectories ({spec.sim.profile.kind})")
            else:
                dens, _ = _densities(spec, traj)
                if not dens:
                    raise ConfigError("no density station lies inside the run")
                fig = density_figure({d.zeta: (d.centers, d.values) for d in dens}, "Ray density")
        write_atomic(target, render(fig))
        return target
    if artifact.is_dir():
        artifact = artifact / ("density.csv" if kind == "density" else "trajectories.csv")
    if not artifact.exists():
        raise ConfigError(f"artifact {artifact} does not exist")
    if kind == "trajectories" and artifact.name.endswith(".csv"):
        rays = read_trajectories_csv(artifact)
        zmax = max(float(r["zeta"].max()) for r in rays.values())
        span = max(float(abs(r["xi"][0])) for r in rays.values())
        fig = trajectory_figure(rays, span, zmax, "Trajectories")
    elif kind == "density" and artifact.name.endswith(".csv"):
        fig = density_figure(read_density_csv(artifact), "Ray density")
    else:
        raise ConfigError(f"artifact {artifact} cannot be plotted as {kind}")
    write_atomic(target, render(fig))
    return target


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="waveray", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"waveray {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_config=True):
        if need_config:
            p.add_argument("--config", required=True, type=Path, help="INI config file")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        p.add_argument("--seedless", action="store_true", help="reserved; rejected (no randomness exists)")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("simulate", help="run a trajectory simulation"))
    p = sub.add_parser("plot", help="render an SVG figure")
    common(p, need_config=False)
    p.add_argument("artifact", type=Path, nargs="?", help="config (.ini), run directory or CSV artifact")
    p.add_argument("--config", type=Path, help="alternative to the positional artifact")
    p.add_argument("--kind", required=True, choices=("profiles", "launchG", "trajectories", "density"))
    common(sub.add_parser("compare", help="compare trajectories with the reference oracles"))
    common(sub.add_parser("sweep", help="run an epsilon sweep"))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seedless:
        print("error: --seedless is reserved and not accepted (the tool uses no randomness)", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "plot":
            artifact = args.artifact or args.config
            if artifact is None:
                raise ConfigError("plot needs an artifact path or --config")
            path = plot(artifact, args.kind, args.out)
            print(path)
            return EXIT_OK
        spec = load_config(args.config)
        if args.command == "simulate":
            code, report = simulate(spec, args.out)
            if code == EXIT_COLLAPSE:
                print("front collapsed; partial artifacts written", file=sys.stderr)
        elif args.command == "compare":
            code, doc = compare(spec, args.out)
            if code == EXIT_TOLERANCE:
                failed = [k for k, v in doc["checks"].items() if not v]
                print(f"comparison failed: {', '.join(failed)}", file=sys.stderr)
        else:
            code, doc = sweep(spec, Path(args.config).read_text(), args.out, args.jobs)
            print(f"first gathering strictly decreasing in epsilon: {doc['first_gathering_strictly_decreasing']}")
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainTooSmall as exc:
        print(f"paraxial domain too small: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
