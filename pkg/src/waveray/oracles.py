"""
Independent references for trajectory runs.

* :func:`gaussian_envelope` is the closed-form spreading law of a Gaussian beam.
* :func:`paraxial_propagate` solves the paraxial wave equation
  ``i dpsi/dzeta = -(1/4pi) d2psi/dxi2`` on a periodic grid with an exact
  spectral propagator.
* :func:`density_histogram` and :func:`fringe_positions` turn ray positions
  and wave intensities into comparable peak lists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.signal import find_peaks

from waveray.model import TrajectorySet


class DomainTooSmall(RuntimeError):
    """Intensity reached the edge of the paraxial grid."""


class StationOutOfRange(ValueError):
    """A density station lies beyond the extent of a run."""


@dataclass
class FieldSlice:
    zeta: float
    xi_grid: np.ndarray
    psi: np.ndarray

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    @property
    def norm(self) -> float:
        dx = self.xi_grid[1] - self.xi_grid[0]
        return float(np.sum(self.intensity) * dx)


@dataclass
class Density:
    """Ray density at one station; ``values`` sum to one."""

    zeta: float
    edges: np.ndarray
    values: np.ndarray
    positions: np.ndarray
    weights: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])


def rayleigh_range(epsilon: float) -> float:
    return math.pi / epsilon**2


def gaussian_envelope(xi0, zeta, epsilon: float):
    """Transverse position at ``zeta`` of the Gaussian-beam ray launched at ``xi0``."""
    if not 0.0 < epsilon <= 0.3:
        raise ValueError(f"gaussian_envelope needs 0 < epsilon <= 0.3, got {epsilon}")
    zr = rayleigh_range(epsilon)
    return np.multiply(xi0, np.sqrt(1.0 + (np.asarray(zeta, dtype=float) / zr) ** 2))


def paraxial_propagate(
    profile,
    grid: tuple = (1000.0, 8192),
    zeta_max: float = 700.0,
    d_zeta: float = 10.0,
    stations: Optional[Sequence[float]] = None,
    edge_fraction: float = 0.05,
    edge_threshold: float = 1e-3,
) -> list[FieldSlice]:
    """
    Propagate the collimated launch field ``psi = R(xi, 0)`` to ``zeta_max``.

    Slices are emitted every ``d_zeta`` (and at any extra ``stations``).
    Raises :class:`DomainTooSmall` when the intensity in the outer
    ``edge_fraction`` of the grid exceeds ``edge_threshold`` times the peak.
    """
    half_width, n_points = grid
    n_points = int(n_points)
    xi = -half_width + (2.0 * half_width / n_points) * np.arange(n_points)
    dx = xi[1] - xi[0]
    psi = np.asarray(profile.value(xi), dtype=complex)
    k = 2.0 * math.pi * np.fft.fftfreq(n_points, dx)
    edge = np.abs(xi) >= (1.0 - edge_fraction) * half_width

    marks = set(np.round(np.arange(0.0, zeta_max + 0.5 * d_zeta, d_zeta), 9).tolist())
    if stations is not None:
        marks.update(float(s) for s in stations)
    marks = sorted(m for m in marks if 0.0 <= m <= zeta_max + 1e-9)

    out = []
    spec = np.fft.fft(psi)
    z = 0.0
    for m in marks:
        if m > z:
            spec = spec * np.exp(-1j * k**2 * (m - z) / (4.0 * math.pi))
            z = m
        field = np.fft.ifft(spec)
        inten = np.abs(field) ** 2
        if inten[edge].max() > edge_threshold * inten.max():
            raise DomainTooSmall(
                f"edge intensity {inten[edge].max():.3g} exceeds {edge_threshold:g} of peak at zeta={m:g}"
            )
        out.append(FieldSlice(zeta=float(m), xi_grid=xi, psi=field))
    return out


def intensity_half_width(sl: FieldSlice) -> float:
    """Half-width at which the intensity drops to ``1/e`` of its peak (linear interpolation)."""
    inten = sl.intensity
    x = sl.xi_grid
    i0 = int(np.argmax(inten))
    level = inten[i0] / math.e
    j = i0
    while j + 1 < inten.size and inten[j + 1] > level:
        j += 1
    right = x[j] + (inten[j] - level) / (inten[j] - inten[j + 1]) * (x[j + 1] - x[j])
    j = i0
    while j - 1 >= 0 and inten[j - 1] > level:
        j -= 1
    left = x[j] - (inten[j] - level) / (inten[j] - inten[j - 1]) * (x[j] - x[j - 1])
    return 0.5 * (right - left)


def station_crossings(traj: TrajectorySet, zeta_station: float):
    """
    Transverse positions where each ray crosses ``zeta = zeta_station``.

    Returns ``(ray_ids, xi)`` for rays whose alive samples bracket the
    station; rays retired earlier are skipped.
    """
    z = traj.samples["zeta"]
    x = traj.samples["xi"]
    reach = np.nanmax(np.where(traj.alive, z, -np.inf), axis=0)
    if not np.any(reach >= zeta_station):
        raise StationOutOfRange(f"no ray reaches zeta={zeta_station}")
    ids, pos = [], []
    for j in range(z.shape[1]):
        ok = traj.alive[:, j]
        zj, xj = z[ok, j], x[ok, j]
        if zj.size < 2 or zj[-1] < zeta_station or zj[0] > zeta_station:
            continue
        k = int(np.searchsorted(zj, zeta_station))
        if k == 0:
            pos.append(float(xj[0]))
        else:
            t = (zeta_station - zj[k - 1]) / (zj[k] - zj[k - 1])
            pos.append(float(xj[k - 1] + t * (xj[k] - xj[k - 1])))
        ids.append(j)
    return np.array(ids, dtype=int), np.array(pos)


def density_histogram(
    traj: TrajectorySet, zeta_station: float, bins: int = 64, xi_range=None, method: str = "interval"
) -> Density:
    """
    Flux-weighted ray density at ``zeta_station``, normalised to unit sum.

    Ray ``i`` carries the launch measure ``R(xi0_i)**2 * dxi0``. With
    ``method="interval"`` the measure of each launch interval between
    neighbouring rays is spread uniformly over the interval's image at the
    station, which removes the sampling noise of a few rays per bin. With
    ``method="point"`` each ray's weight is deposited in the bin holding its
    crossing point. The histogram covers ``xi_range`` (default: the occupied
    range of the crossing points).
    """
    if method not in ("interval", "point"):
        raise ValueError(f"method must be 'interval' or 'point', got {method!r}")
    if zeta_station > float(np.nanmax(traj.samples["zeta"])):
        raise StationOutOfRange(f"station zeta={zeta_station} lies beyond the run")
    ids, pos = station_crossings(traj, zeta_station)
    amp = traj.samples["amp_R"][0, ids]
    weights = amp**2 * traj.launch_spacing
    if xi_range is None:
        xi_range = (float(pos.min()), float(pos.max()))
    edges = np.linspace(xi_range[0], xi_range[1], bins + 1)
    if method == "point":
        hist, _ = np.histogram(pos, bins=edges, weights=weights)
    else:
        hist = _interval_deposit(ids, pos, weights, edges)
    total = hist.sum()
    values = hist / total if total > 0 else hist
    return Density(zeta=float(zeta_station), edges=edges, values=values, positions=pos, weights=weights)


def _interval_deposit(ids, pos, weights, edges):
    pair = np.flatnonzero(ids[1:] == ids[:-1] + 1)
    a = np.minimum(pos[pair], pos[pair + 1])
    b = np.maximum(pos[pair], pos[pair + 1])
    mass = 0.5 * (weights[pair] + weights[pair + 1])
    lo = np.clip(edges[None, :-1], a[:, None], b[:, None])
    hi = np.clip(edges[None, 1:], a[:, None], b[:, None])
    width = (b - a)[:, None]
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(width > 0, (hi - lo) / width, 0.0)
    # coincident end points: whole measure into the bin that holds them
    flat = np.flatnonzero(b - a <= 0)
    if flat.size:
        k = np.clip(np.searchsorted(edges, a[flat], side="right") - 1, 0, edges.size - 2)
        frac[flat, k] = 1.0
    return mass @ frac


def binned_intensity(sl: FieldSlice, edges) -> np.ndarray:
    """Intensity integrated over histogram bins, normalised to unit sum."""
    x = sl.xi_grid
    inten = sl.intensity
    dx = x[1] - x[0]
    cum = np.concatenate([[0.0], np.cumsum(inten) * dx])
    # cell boundaries of the grid samples
    bounds = np.concatenate([x - 0.5 * dx, [x[-1] + 0.5 * dx]])
    c = np.interp(edges, bounds, cum)
    vals = np.diff(c)
    return vals / vals.sum()


def fringe_positions(values, positions=None, prominence: float = 0.05) -> list[float]:
    """
    Sorted positions of local maxima whose prominence exceeds
    ``prominence * max(values)``, refined by a parabola through the peak
    sample and its neighbours.
    """
    v = np.asarray(values, dtype=float)
    if v.size < 5:
        raise ValueError("fringe_positions needs at least 5 samples")
    x = np.arange(v.size, dtype=float) if positions is None else np.asarray(positions, dtype=float)
    top = float(np.max(v))
    if not top > 0:
        return []
    peaks, _ = find_peaks(v, prominence=prominence * top)
    out = []
    for i in peaks:
        y0, y1, y2 = v[i - 1], v[i], v[i + 1]
        den = y0 - 2.0 * y1 + y2
        shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
        h = 0.5 * (x[i + 1] - x[i - 1])
        out.append(float(x[i] + shift * h))
    return sorted(out)
