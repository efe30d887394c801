"""
Fixed-step RK4 propagation of a beam front under the wave-potential force.

Each step reconstructs ``G`` on the current front, differentiates it along
the front and advances every ray with the resulting transverse force held
constant over the RK4 substeps. The classical force of the medium is
re-evaluated at every substep.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from waveray.model import BeamFront, DomainError, Gathering, Medium, RAY_FIELDS, SimConfig, TrajectorySet
from waveray.profiles import eval_dG0, eval_G0, make_front
from waveray.wavefront import (
    FrontCollapse,
    FrontGeometry,
    GField,
    estimate_G,
    front_geometry,
    launch_spacing,
    smooth_along_front,
    transverse_gradient,
)

log = logging.getLogger(__name__)

WAVE_COUPLING = 1.0 / (8.0 * math.pi**2)
TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


@dataclass
class StepReport:
    tau: float
    max_h_drift: float = 0.0
    max_norm_drift: float = 0.0
    max_flux_drift: float = 0.0
    retired: list = field(default_factory=list)
    crossed: list = field(default_factory=list)


def classical_force(medium: Medium, xi, zeta):
    """Classical force ``-grad u`` of the medium, as ``(f_xi, f_zeta)``."""
    try:
        gx, gz = medium.gradient(xi, zeta)
    except DomainError:
        raise
    except (ValueError, FloatingPointError) as exc:
        raise DomainError(str(exc)) from exc
    fx = -np.asarray(gx, dtype=float)
    fz = -np.asarray(gz, dtype=float)
    if np.ndim(xi) == 0 and np.ndim(zeta) == 0:
        return np.array([float(fx), float(fz)])
    return fx, fz


def _speed_sq(medium: Medium, xi, zeta):
    if medium.is_vacuum:
        return np.ones_like(xi)
    with np.errstate(all="ignore"):
        try:
            return np.asarray(medium.rho_squared(xi, zeta), dtype=float)
        except DomainError:
            return np.full_like(xi, np.nan)


def _forces(medium, xi, zeta):
    if medium.is_vacuum:
        return np.zeros_like(xi), np.zeros_like(xi)
    with np.errstate(all="ignore"):
        try:
            return classical_force(medium, xi, zeta)
        except DomainError:
            nan = np.full_like(xi, np.nan)
            return nan, nan


# --------------------------------------------------------------------------
# Single step
# --------------------------------------------------------------------------


def _wave_force_frozen(cfg, xi):
    if cfg.g_source == "launch":
        return WAVE_COUPLING * np.asarray(eval_dG0(cfg.profile, xi), dtype=float)
    return np.zeros_like(xi)


def _rotation_rk4(cfg: SimConfig, xi, zeta, theta, wave_normal):
    """RK4 on (xi, zeta, theta, phase) with momentum ``|rho| (sin theta, cos theta)``."""
    medium = cfg.medium
    dt = cfg.d_tau

    def rhs(x, z, th):
        s2 = _speed_sq(medium, x, z)
        with np.errstate(all="ignore"):
            s = np.sqrt(s2)
            sin, cos = np.sin(th), np.cos(th)
            fx, fz = _forces(medium, x, z)
            if cfg.g_source == "front":
                fn = wave_normal
            else:
                fn = _wave_force_frozen(cfg, x) * cos
            fn = fn + fx * cos - fz * sin
            return s * sin, s * cos, fn / s, TWO_PI * s2

    k1 = rhs(xi, zeta, theta)
    k2 = rhs(xi + 0.5 * dt * k1[0], zeta + 0.5 * dt * k1[1], theta + 0.5 * dt * k1[2])
    k3 = rhs(xi + 0.5 * dt * k2[0], zeta + 0.5 * dt * k2[1], theta + 0.5 * dt * k2[2])
    k4 = rhs(xi + dt * k3[0], zeta + dt * k3[1], theta + dt * k3[2])
    inc = [dt / 6.0 * (a + 2.0 * b + 2.0 * c + d) for a, b, c, d in zip(k1, k2, k3, k4)]
    return xi + inc[0], zeta + inc[1], theta + inc[2], inc[3]


def _cartesian_rk4(cfg: SimConfig, xi, zeta, rx, rz, wave_vec):
    """Literal RK4 on (xi, zeta, rho_x, rho_z, phase), optionally re-imposing |rho|."""
    medium = cfg.medium
    dt = cfg.d_tau

    def project(x, z, px, pz):
        if not cfg.renormalize:
            return px, pz
        with np.errstate(all="ignore"):
            s2 = _speed_sq(medium, x, z)
            rest = s2 - px * px
            pz = np.where(rest > 0.0, np.sqrt(np.where(rest > 0.0, rest, 0.0)), np.nan)
        return px, pz

    def rhs(x, z, px, pz):
        with np.errstate(all="ignore"):
            fx, fz = _forces(medium, x, z)
            if cfg.g_source == "front":
                gx, gz = wave_vec
            else:
                gx, gz = _wave_force_frozen(cfg, x), 0.0
            return px, pz, fx + gx, fz + gz, TWO_PI * (px * px + pz * pz)

    def stage(c, k):
        x, z = xi + c * dt * k[0], zeta + c * dt * k[1]
        px, pz = project(x, z, rx + c * dt * k[2], rz + c * dt * k[3])
        return x, z, px, pz

    k1 = rhs(xi, zeta, rx, rz)
    k2 = rhs(*stage(0.5, k1))
    k3 = rhs(*stage(0.5, k2))
    k4 = rhs(*stage(1.0, k3))
    inc = [dt / 6.0 * (a + 2.0 * b + 2.0 * c + d) for a, b, c, d in zip(k1, k2, k3, k4)]
    x, z = xi + inc[0], zeta + inc[1]
    px, pz = project(x, z, rx + inc[2], rz + inc[3])
    return x, z, px, pz, inc[4]


def hamiltonian_ratio(cfg: SimConfig, front: BeamFront, g) -> np.ndarray:
    """``H/E`` per ray with ``E`` the kinetic scale: ``|rho|^2 + 2u - G/(4 pi^2)``."""
    rho2 = front.rho_x**2 + front.rho_z**2
    if cfg.medium.is_vacuum:
        u = 0.0
    else:
        with np.errstate(all="ignore"):
            try:
                u = cfg.medium.potential(front.xi, front.zeta)
            except DomainError:
                u = np.nan
    return rho2 + 2.0 * u - 2.0 * WAVE_COUPLING * g


def step(front: BeamFront, gfield: GField, cfg: SimConfig, geom: FrontGeometry = None):
    """
    Advance every alive ray by ``cfg.d_tau``.

    ``gfield.dg_dsigma`` (aligned with ``geom.index``) supplies the
    wave-potential slope when ``cfg.g_source == "front"``. Rays that turn
    back, leave the medium's domain or become non-finite are retired.
    """
    new = front.copy()
    if geom is None:
        geom = front_geometry(front)
    idx = geom.index
    report = StepReport(tau=front.tau + cfg.d_tau)

    xi, zeta = front.xi[idx], front.zeta[idx]
    rx, rz = front.rho_x[idx], front.rho_z[idx]
    dg = gfield.dg_dsigma if gfield.dg_dsigma is not None else np.zeros(idx.size)
    dg = np.where(np.isfinite(dg), dg, 0.0)

    if cfg.force_mode == "transverse_rotation":
        theta = np.arctan2(rx, rz)
        x, z, th, dphase = _rotation_rk4(cfg, xi, zeta, theta, WAVE_COUPLING * dg)
        with np.errstate(all="ignore"):
            s = np.sqrt(_speed_sq(cfg.medium, x, z))
        px, pz = s * np.sin(th), s * np.cos(th)
        if cfg.renormalize:
            with np.errstate(all="ignore"):
                norm = np.hypot(px, pz)
                px, pz = px * (s / norm), pz * (s / norm)
        bad = ~(np.abs(th) < HALF_PI)
    else:
        wave_vec = (WAVE_COUPLING * dg * geom.tangent[:, 0], WAVE_COUPLING * dg * geom.tangent[:, 1])
        x, z, px, pz, dphase = _cartesian_rk4(cfg, xi, zeta, rx, rz, wave_vec)
        bad = ~(pz > 0.0)

    state = np.stack([x, z, px, pz, dphase])
    bad |= ~np.all(np.isfinite(state), axis=0)
    bad |= gfield.retire

    new.xi[idx] = x
    new.zeta[idx] = z
    new.rho_x[idx] = px
    new.rho_z[idx] = pz
    new.phase[idx] = front.phase[idx] + dphase
    new.g_val[idx] = gfield.g
    new.clamped[idx] = gfield.clamped
    new.tau = front.tau + cfg.d_tau
    if np.any(bad):
        dead = idx[bad]
        new.alive[dead] = False
        for name in ("xi", "zeta", "rho_x", "rho_z", "phase"):
            getattr(new, name)[dead] = getattr(front, name)[dead]
        report.retired = [int(front.ray_id[i]) for i in dead]

    ok = new.alive[idx]
    if np.any(ok):
        speed = np.hypot(px[ok], pz[ok])
        with np.errstate(all="ignore"):
            target = np.sqrt(_speed_sq(cfg.medium, x[ok], z[ok]))
        report.max_norm_drift = float(np.max(np.abs(speed - target)))
    return new, report


# --------------------------------------------------------------------------
# Full run
# --------------------------------------------------------------------------


class _Sampler:
    def __init__(self, n_rays):
        self.n = n_rays
        self.tau = []
        self.rows = {name: [] for name in RAY_FIELDS}
        self.alive = []

    def record(self, front: BeamFront):
        self.tau.append(front.tau)
        alive = front.alive.copy()
        self.alive.append(alive)
        for name in RAY_FIELDS:
            col = getattr(front, name).astype(float)
            if name not in ("ray_id", "xi0", "amp_R"):
                col = np.where(alive, col, np.nan)
            self.rows[name].append(col)

    def arrays(self):
        samples = {name: np.array(rows) for name, rows in self.rows.items()}
        return np.array(self.tau), samples, np.array(self.alive)


def wave_field(front: BeamFront, cfg: SimConfig, prev: GField = None, h_min: float = None):
    """Geometry and wave-potential field for the current front, as used by :func:`run`."""
    geom = front_geometry(front, h_min)
    idx = geom.index
    if cfg.g_source == "front":
        gf = estimate_G(front, geom, prev=prev, g_blend=cfg.g_blend, r_floor=cfg.r_floor)
        dg = transverse_gradient(gf, geom)
        gf.dg_dsigma = smooth_along_front(geom.sigma, dg, cfg.resolved_smooth_len)
    elif cfg.g_source == "launch":
        # the frozen potential is the closed form itself, so it is not clamped;
        # the flag still marks rays in the far tail
        _, clamped = eval_G0(cfg.profile, front.xi[idx], r_floor=cfg.r_floor, with_flag=True)
        g = np.atleast_1d(eval_G0(cfg.profile, front.xi[idx]))
        gf = GField(g=g, dg_dsigma=None, clamped=np.atleast_1d(clamped), retire=~np.isfinite(g))
    else:
        z = np.zeros(idx.size)
        gf = GField(g=z, dg_dsigma=None, clamped=np.zeros(idx.size, bool), retire=np.zeros(idx.size, bool))
    return geom, gf


def _pair_flux(front, geom):
    i, j = geom.index[:-1], geom.index[1:]
    rbar = 0.5 * (front.amp_R[i] + front.amp_R[j])
    speed = 0.5 * (np.hypot(front.rho_x[i], front.rho_z[i]) + np.hypot(front.rho_x[j], front.rho_z[j]))
    return rbar**2 * geom.spacing * speed


def run(cfg: SimConfig) -> TrajectorySet:
    """
    Propagate the launch front until every alive ray has reached ``zeta_max``.

    The run stops early when fewer than three rays remain (``collapsed``) or
    after ``cfg.step_limit`` steps. Output is a deterministic function of
    ``cfg``.
    """
    span = cfg.resolved_span
    front = make_front(cfg.profile, cfg.n_rays, span)
    n = len(front)
    h0 = launch_spacing(front)
    sampler = _Sampler(n)

    h_min = 1e-6 * h0
    geom, gf = wave_field(front, cfg, h_min=h_min)
    front.g_val[geom.index] = gf.g
    front.clamped[geom.index] = gf.clamped
    front.sigma = geom.sigma
    h_launch = hamiltonian_ratio(cfg, front, front.g_val)
    # launch flux of pair (i, i+1), indexed by i
    flux0 = np.append(_pair_flux(front, geom), np.nan)
    sampler.record(front)

    drift = {k: [] for k in ("tau", "max_h_drift", "max_norm_drift", "max_flux_drift", "n_alive")}
    crossings, gatherings, retired = [], [], []
    crossed_pairs, gathered_pairs = set(), set()
    collapsed = False
    steps = 0
    recorded_last = True

    while steps < cfg.step_limit:
        if float(np.min(front.zeta[front.alive])) >= cfg.zeta_max:
            break
        front, report = step(front, gf, cfg, geom)
        steps += 1
        for rid in report.retired:
            retired.append((steps, rid))
        try:
            geom, gf = wave_field(front, cfg, prev=gf if cfg.g_blend > 0 else None, h_min=h_min)
        except FrontCollapse as exc:
            log.warning("front collapsed at step %d: %s", steps, exc)
            collapsed = True
            sampler.record(front)
            recorded_last = True
            break
        idx = geom.index
        front.g_val[idx] = gf.g
        front.clamped[idx] = gf.clamped
        front.sigma = geom.sigma

        # invariant drift records for the post-step state
        h = hamiltonian_ratio(cfg, front, front.g_val)
        with np.errstate(all="ignore"):
            hd = np.abs(h[idx] - h_launch[idx]) / np.abs(h_launch[idx])
        fl = _pair_flux(front, geom)
        ids = front.ray_id[idx]
        f0 = np.where(ids[1:] == ids[:-1] + 1, flux0[ids[:-1]], np.nan)
        with np.errstate(all="ignore"):
            fd = np.abs(fl / f0 - 1.0)
        drift["tau"].append(front.tau)
        drift["max_h_drift"].append(float(np.nanmax(hd)) if hd.size else 0.0)
        drift["max_norm_drift"].append(report.max_norm_drift)
        drift["max_flux_drift"].append(float(np.nanmax(fd)) if np.any(np.isfinite(fd)) else 0.0)
        drift["n_alive"].append(int(idx.size))

        # ordering violations and gatherings between alive neighbours
        xi0 = front.xi0[idx]
        compression = (xi0[1:] - xi0[:-1]) / geom.spacing
        events = np.flatnonzero(geom.crossed | (compression >= cfg.gather_ratio))
        for k in events:
            pair = (int(ids[k]), int(ids[k + 1]))
            if geom.crossed[k] and pair not in crossed_pairs:
                crossed_pairs.add(pair)
                crossings.append((steps, pair))
                report.crossed.append(pair)
            if pair not in gathered_pairs:
                gathered_pairs.add(pair)
                a, b = idx[k], idx[k + 1]
                gatherings.append(
                    Gathering(
                        step=steps,
                        tau=front.tau,
                        zeta=float(0.5 * (front.zeta[a] + front.zeta[b])),
                        xi=float(0.5 * (front.xi[a] + front.xi[b])),
                        pair=pair,
                        compression=float(compression[k]),
                        crossed=bool(geom.crossed[k]),
                    )
                )

        if cfg.retire_crossed and np.any(geom.crossed):
            k = np.flatnonzero(geom.crossed)
            dead = np.unique(np.concatenate([idx[k], idx[k + 1]]))
            front.alive[dead] = False
            for i in dead:
                retired.append((steps, int(front.ray_id[i])))
            try:
                geom, gf = wave_field(front, cfg, h_min=h_min)
            except FrontCollapse as exc:
                log.warning("front collapsed at step %d: %s", steps, exc)
                collapsed = True
                sampler.record(front)
                recorded_last = True
                break
            front.g_val[geom.index] = gf.g
            front.clamped[geom.index] = gf.clamped
            front.sigma = geom.sigma

        recorded_last = steps % cfg.output_stride == 0
        if recorded_last:
            sampler.record(front)
        if cfg.stop_on_gathering and gatherings:
            break

    if not recorded_last:
        sampler.record(front)
    tau, samples, alive = sampler.arrays()
    return TrajectorySet(
        config=cfg,
        tau=tau,
        samples=samples,
        alive=alive,
        drift={k: np.array(v) for k, v in drift.items()},
        crossings=crossings,
        gatherings=gatherings,
        retired=retired,
        steps=steps,
        collapsed=collapsed,
        launch_spacing=h0,
    )
