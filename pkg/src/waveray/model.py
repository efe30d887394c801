"""
Shared dimensionless data model.

Every length is measured in units of the reference wavelength
``lambda0 = 2*pi*hbar/p0``, every momentum in units of ``p0 = sqrt(2 m E)``
and the trajectory parameter in units of ``lambda0 / (p0/m)``. Physical units
only appear in :func:`dimensionless_from_physical` and its inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Callable, Optional

import numpy as np

if TYPE_CHECKING:
    from waveray.profiles import LaunchProfile

HBAR = 1.0546e-27  # erg s

FORCE_MODES = ("transverse_rotation", "cartesian")
G_SOURCES = ("front", "launch", "off")


class DomainError(ValueError):
    """Raised when an input lies outside the domain of a physical relation."""


class ConfigError(ValueError):
    """Raised for invalid simulation or CLI configuration."""


def reference_scales(mass: float, energy: float) -> tuple[float, float, float]:
    """Return ``(lambda0, p0, t0)`` in cm, g cm/s and s for a particle beam."""
    if not (mass > 0.0) or not (energy > 0.0):
        raise DomainError(f"mass and energy must be positive, got m={mass!r}, E={energy!r}")
    p0 = math.sqrt(2.0 * mass * energy)
    lambda0 = 2.0 * math.pi * HBAR / p0
    t0 = lambda0 / (p0 / mass)
    return lambda0, p0, t0


def dimensionless_from_physical(mass, energy, x, p, t):
    """
    Convert a physical position, momentum and time to ``(xi, rho, tau)``.

    Parameters
    ----------
    mass : float
        Particle mass [g].
    energy : float
        Beam energy [erg].
    x, p, t : float or array_like
        Position [cm], momentum [g cm/s] and time [s].

    Returns
    -------
    tuple
        ``(x/lambda0, p/p0, t*(p0/m)/lambda0)``.
    """
    lambda0, p0, t0 = reference_scales(mass, energy)
    return np.divide(x, lambda0), np.divide(p, p0), np.divide(t, t0)


def physical_from_dimensionless(mass, energy, xi, rho, tau):
    """Inverse of :func:`dimensionless_from_physical`."""
    lambda0, p0, t0 = reference_scales(mass, energy)
    return np.multiply(xi, lambda0), np.multiply(rho, p0), np.multiply(tau, t0)


@dataclass(frozen=True)
class RayState:
    """One ray of the beam at a given trajectory time."""

    ray_id: int
    xi0: float
    xi: float
    zeta: float
    rho_x: float
    rho_z: float
    amp_R: float
    phase: float = 0.0
    g_val: float = 0.0
    clamped: bool = False

    @property
    def rho_norm(self) -> float:
        return math.hypot(self.rho_x, self.rho_z)


# Per-ray fields stored column-wise on a front, in CSV column order.
RAY_FIELDS = ("ray_id", "xi0", "xi", "zeta", "rho_x", "rho_z", "amp_R", "g_val", "phase", "clamped")


@dataclass
class BeamFront:
    """
    Ordered set of rays sharing the trajectory time ``tau``.

    Ray data is held column-wise (one numpy array per field, in launch order).
    Retired rays stay in the arrays with ``alive`` False so that ray ids keep
    indexing the arrays directly.
    """

    tau: float
    ray_id: np.ndarray
    xi0: np.ndarray
    xi: np.ndarray
    zeta: np.ndarray
    rho_x: np.ndarray
    rho_z: np.ndarray
    amp_R: np.ndarray
    phase: np.ndarray
    g_val: np.ndarray
    clamped: np.ndarray
    alive: np.ndarray
    sigma: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return int(self.ray_id.size)

    @property
    def n_alive(self) -> int:
        return int(np.count_nonzero(self.alive))

    @property
    def rays(self) -> list[RayState]:
        """Alive rays as :class:`RayState` values, in launch order."""
        out = []
        for i in np.flatnonzero(self.alive):
            out.append(
                RayState(
                    ray_id=int(self.ray_id[i]),
                    xi0=float(self.xi0[i]),
                    xi=float(self.xi[i]),
                    zeta=float(self.zeta[i]),
                    rho_x=float(self.rho_x[i]),
                    rho_z=float(self.rho_z[i]),
                    amp_R=float(self.amp_R[i]),
                    phase=float(self.phase[i]),
                    g_val=float(self.g_val[i]),
                    clamped=bool(self.clamped[i]),
                )
            )
        return out

    def copy(self) -> "BeamFront":
        kwargs = {}
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            kwargs[name] = value.copy() if isinstance(value, np.ndarray) else value
        return BeamFront(**kwargs)

    @classmethod
    def from_rays(cls, rays, tau: float = 0.0) -> "BeamFront":
        rays = list(rays)

        def col(name, dtype=float):
            return np.array([getattr(r, name) for r in rays], dtype=dtype)

        return cls(
            tau=float(tau),
            ray_id=col("ray_id", int),
            xi0=col("xi0"),
            xi=col("xi"),
            zeta=col("zeta"),
            rho_x=col("rho_x"),
            rho_z=col("rho_z"),
            amp_R=col("amp_R"),
            phase=col("phase"),
            g_val=col("g_val"),
            clamped=col("clamped", bool),
            alive=np.ones(len(rays), dtype=bool),
        )


# --------------------------------------------------------------------------
# Media
# --------------------------------------------------------------------------

ScalarField = Callable[[np.ndarray, np.ndarray], np.ndarray]
GradField = Callable[[np.ndarray, np.ndarray], tuple]

_FD_STEP = 1e-4


@dataclass(frozen=True)
class Medium:
    """
    Base class for the classical force slot.

    Subclasses expose ``potential(xi, zeta)``, the dimensionless quantity
    ``u`` such that the classical force is ``-grad u`` and the kinetic
    constraint reads ``|rho|**2 = 1 - 2u``.
    """

    name = "medium"

    def potential(self, xi, zeta):
        raise NotImplementedError

    def gradient(self, xi, zeta):
        """Gradient of :meth:`potential`; centered differences unless overridden."""
        h = _FD_STEP
        xi = np.asarray(xi, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        gx = (self.potential(xi + h, zeta) - self.potential(xi - h, zeta)) / (2 * h)
        gz = (self.potential(xi, zeta + h) - self.potential(xi, zeta - h)) / (2 * h)
        return gx, gz

    def rho_squared(self, xi, zeta):
        return 1.0 - 2.0 * self.potential(xi, zeta)

    @property
    def is_vacuum(self) -> bool:
        return False


@dataclass(frozen=True)
class Vacuum(Medium):
    name = "vacuum"

    def potential(self, xi, zeta):
        return np.zeros(np.broadcast(np.asarray(xi), np.asarray(zeta)).shape)

    def gradient(self, xi, zeta):
        z = self.potential(xi, zeta)
        return z, z.copy()

    def rho_squared(self, xi, zeta):
        return np.ones(np.broadcast(np.asarray(xi), np.asarray(zeta)).shape)

    @property
    def is_vacuum(self) -> bool:
        return True


@dataclass(frozen=True)
class Potential(Medium):
    """External potential given as ``V/E`` over the (xi, zeta) plane."""

    v_over_E: ScalarField = None
    grad_v_over_E: Optional[GradField] = None
    label: str = "potential"
    name = "potential"

    def potential(self, xi, zeta):
        return 0.5 * np.asarray(self.v_over_E(xi, zeta), dtype=float)

    def gradient(self, xi, zeta):
        if self.grad_v_over_E is None:
            return super().gradient(xi, zeta)
        gx, gz = self.grad_v_over_E(xi, zeta)
        shape = np.broadcast(np.asarray(xi), np.asarray(zeta)).shape
        return 0.5 * np.broadcast_to(gx, shape), 0.5 * np.broadcast_to(gz, shape)


@dataclass(frozen=True)
class Refractive(Medium):
    """Refractive medium given as ``n**2`` over the (xi, zeta) plane."""

    n_squared: ScalarField = None
    grad_n_squared: Optional[GradField] = None
    label: str = "refractive"
    name = "refractive"

    def potential(self, xi, zeta):
        n2 = np.asarray(self.n_squared(xi, zeta), dtype=float)
        if np.any(n2 <= 0.0):
            raise DomainError("n_squared must be positive on the simulated domain")
        return 0.5 * (1.0 - n2)

    def gradient(self, xi, zeta):
        if self.grad_n_squared is None:
            return super().gradient(xi, zeta)
        gx, gz = self.grad_n_squared(xi, zeta)
        shape = np.broadcast(np.asarray(xi), np.asarray(zeta)).shape
        return -0.5 * np.broadcast_to(gx, shape), -0.5 * np.broadcast_to(gz, shape)


def harmonic_potential(omega: float) -> Potential:
    """``V/2E = omega**2 xi**2 / 2``: a transverse oscillator of angular rate omega."""
    w2 = float(omega) ** 2
    return Potential(
        v_over_E=lambda xi, zeta: w2 * np.asarray(xi, dtype=float) ** 2 + 0.0 * np.asarray(zeta),
        grad_v_over_E=lambda xi, zeta: (2.0 * w2 * np.asarray(xi, dtype=float), 0.0),
        label=f"harmonic(omega={omega!r})",
    )


def linear_index(alpha: float) -> Refractive:
    """``n**2 = 1 - alpha*zeta``."""
    a = float(alpha)
    return Refractive(
        n_squared=lambda xi, zeta: 1.0 - a * np.asarray(zeta, dtype=float) + 0.0 * np.asarray(xi),
        grad_n_squared=lambda xi, zeta: (0.0, -a),
        label=f"linear_index(alpha={alpha!r})",
    )


# --------------------------------------------------------------------------
# Run configuration and output
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    """
    Resolved configuration of one trajectory run.

    ``span`` and ``smooth_len`` default to ``3/epsilon`` and ``0.4/epsilon``
    of the launch profile. ``smooth_len = 0`` disables force smoothing.
    ``g_source`` selects the wave-potential term: ``"front"`` rebuilds it
    from the advancing front each step, ``"launch"`` freezes the closed-form
    launch G as a function of xi, ``"off"`` drops it (classical limit).
    ``stop_on_gathering`` ends the run at the first recorded gathering.
    ``retire_crossed`` removes both rays of a pair whose transverse order
    reversed, after the crossing is recorded.
    """

    profile: "LaunchProfile"
    medium: Medium = field(default_factory=Vacuum)
    n_rays: int = 101
    span: Optional[float] = None
    d_tau: float = 0.1
    zeta_max: float = 700.0
    force_mode: str = "transverse_rotation"
    g_blend: float = 0.0
    r_floor: float = 1e-6
    output_stride: int = 10
    g_source: str = "front"
    smooth_len: Optional[float] = None
    renormalize: bool = True
    gather_ratio: float = 2.0
    max_steps: Optional[int] = None
    stop_on_gathering: bool = False
    retire_crossed: bool = True

    def __post_init__(self):
        if self.n_rays < 5:
            raise ConfigError(f"n_rays must be >= 5, got {self.n_rays}")
        if self.span is not None and not self.span > 0:
            raise ConfigError(f"span must be positive, got {self.span}")
        if not self.d_tau > 0:
            raise ConfigError(f"d_tau must be positive, got {self.d_tau}")
        if not self.zeta_max > 0:
            raise ConfigError(f"zeta_max must be positive, got {self.zeta_max}")
        if self.force_mode not in FORCE_MODES:
            raise ConfigError(f"force_mode must be one of {FORCE_MODES}, got {self.force_mode!r}")
        if not 0.0 <= self.g_blend < 1.0:
            raise ConfigError(f"g_blend must lie in [0, 1), got {self.g_blend}")
        if not 0.0 < self.r_floor < 1.0:
            raise ConfigError(f"r_floor must lie in (0, 1), got {self.r_floor}")
        if self.output_stride < 1:
            raise ConfigError(f"output_stride must be >= 1, got {self.output_stride}")
        if self.g_source not in G_SOURCES:
            raise ConfigError(f"g_source must be one of {G_SOURCES}, got {self.g_source!r}")
        if self.smooth_len is not None and self.smooth_len < 0:
            raise ConfigError(f"smooth_len must be >= 0, got {self.smooth_len}")
        if not self.gather_ratio > 1.0:
            raise ConfigError(f"gather_ratio must exceed 1, got {self.gather_ratio}")

    @property
    def resolved_span(self) -> float:
        if self.span is not None:
            return float(self.span)
        return 3.0 / self.profile.width_parameter

    @property
    def resolved_smooth_len(self) -> float:
        if self.smooth_len is not None:
            return float(self.smooth_len)
        return 0.4 / self.profile.width_parameter

    @property
    def step_limit(self) -> int:
        if self.max_steps is not None:
            return int(self.max_steps)
        return int(math.ceil(4.0 * self.zeta_max / self.d_tau)) + 1

    def replace(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass
class Gathering:
    """A pair of neighbouring rays that crossed or compressed beyond ``gather_ratio``."""

    step: int
    tau: float
    zeta: float
    xi: float
    pair: tuple
    compression: float
    crossed: bool


@dataclass
class TrajectorySet:
    """
    Output of a run.

    ``samples`` maps each per-ray field to an array of shape
    ``(n_samples, n_rays)``; entries of retired rays are NaN after retirement.
    ``drift`` maps ``tau``, ``max_h_drift``, ``max_norm_drift``,
    ``max_flux_drift`` and ``n_alive`` to per-step arrays.
    """

    config: SimConfig
    tau: np.ndarray
    samples: dict
    alive: np.ndarray
    drift: dict
    crossings: list
    gatherings: list
    retired: list
    steps: int
    collapsed: bool = False
    launch_spacing: float = 0.0

    @property
    def n_rays(self) -> int:
        return int(self.samples["xi"].shape[1])

    @property
    def first_gathering(self) -> Optional[Gathering]:
        return self.gatherings[0] if self.gatherings else None

    def ray_samples(self, ray_id: int) -> list[RayState]:
        out = []
        for k in range(self.tau.size):
            if not self.alive[k, ray_id]:
                continue
            vals = {name: self.samples[name][k, ray_id] for name in RAY_FIELDS}
            out.append(
                RayState(
                    ray_id=int(ray_id),
                    xi0=float(vals["xi0"]),
                    xi=float(vals["xi"]),
                    zeta=float(vals["zeta"]),
                    rho_x=float(vals["rho_x"]),
                    rho_z=float(vals["rho_z"]),
                    amp_R=float(vals["amp_R"]),
                    phase=float(vals["phase"]),
                    g_val=float(vals["g_val"]),
                    clamped=bool(vals["clamped"]),
                )
            )
        return out

    def final(self, name: str) -> np.ndarray:
        """Last sampled value of ``name`` for every ray (retired rays: last alive value)."""
        arr = self.samples[name]
        out = np.full(arr.shape[1], np.nan)
        for j in range(arr.shape[1]):
            idx = np.flatnonzero(self.alive[:, j])
            if idx.size:
                out[j] = arr[idx[-1], j]
        return out
