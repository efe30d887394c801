"""
Launch amplitude profiles ``R(xi, zeta=0)`` and the launch wave potential.

Analytic profiles carry their first three derivatives so that the launch
``G = R''/R`` and its slope are available in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from waveray.model import BeamFront, ConfigError
from waveray.wavefront import centred_arc_length


class ExtrapolationError(ValueError):
    """A tabulated profile was queried outside its knot range."""


class LaunchProfile:
    """Common interface of launch profiles."""

    kind = "profile"
    analytic = True

    @property
    def width_parameter(self) -> float:
        """``epsilon = lambda0 / w0``."""
        raise NotImplementedError

    @property
    def peak(self) -> float:
        raise NotImplementedError

    def value(self, xi):
        raise NotImplementedError

    def derivatives(self, xi):
        """Return ``(R, R', R'', R''')`` at ``xi``."""
        raise NotImplementedError

    def g0(self, xi):
        R, _, d2, _ = self.derivatives(xi)
        return d2 / R

    def dg0(self, xi):
        R, d1, d2, d3 = self.derivatives(xi)
        return d3 / R - d2 * d1 / (R * R)


def _check_epsilon(epsilon):
    if not 0.0 < epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in (0, 1], got {epsilon}")


@dataclass(frozen=True)
class Gaussian(LaunchProfile):
    """``R = exp(-(eps*xi)**2)``."""

    epsilon: float
    kind = "gaussian"

    def __post_init__(self):
        _check_epsilon(self.epsilon)

    @property
    def width_parameter(self) -> float:
        return self.epsilon

    @property
    def peak(self) -> float:
        return 1.0

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-(self.epsilon * xi) ** 2)

    def derivatives(self, xi):
        xi = np.asarray(xi, dtype=float)
        a = self.epsilon**2
        R = np.exp(-a * xi**2)
        return (
            R,
            -2.0 * a * xi * R,
            (4.0 * a * a * xi**2 - 2.0 * a) * R,
            (12.0 * a * a * xi - 8.0 * a**3 * xi**3) * R,
        )

    def g0(self, xi):
        xi = np.asarray(xi, dtype=float)
        a = self.epsilon**2
        return 4.0 * a * a * xi**2 - 2.0 * a

    def dg0(self, xi):
        xi = np.asarray(xi, dtype=float)
        return 8.0 * self.epsilon**4 * xi


@dataclass(frozen=True)
class Algebraic(LaunchProfile):
    """``R = 1 / (1 + (eps*xi)**(2N))``; flatter core for larger N."""

    epsilon: float
    n_exp: int = 1
    kind = "algebraic"

    def __post_init__(self):
        _check_epsilon(self.epsilon)
        if int(self.n_exp) != self.n_exp or self.n_exp < 1:
            raise ConfigError(f"n_exp must be an integer >= 1, got {self.n_exp}")

    @property
    def width_parameter(self) -> float:
        return self.epsilon

    @property
    def peak(self) -> float:
        return 1.0

    def value(self, xi):
        u = self.epsilon * np.asarray(xi, dtype=float)
        return 1.0 / (1.0 + u ** (2 * self.n_exp))

    def _v(self, xi):
        # v = u**(2N) and its xi-derivatives; zero-coefficient terms are exact zeros
        e = self.epsilon
        m = 2 * int(self.n_exp)
        u = e * np.asarray(xi, dtype=float)
        v = u**m
        v1 = m * e * u ** (m - 1)
        v2 = m * (m - 1) * e * e * u ** (m - 2)
        v3 = m * (m - 1) * (m - 2) * e**3 * u ** (m - 3) if m > 2 else np.zeros_like(u)
        return v, v1, v2, v3

    def derivatives(self, xi):
        v, v1, v2, v3 = self._v(xi)
        q = 1.0 / (1.0 + v)
        return (
            q,
            -v1 * q * q,
            -v2 * q * q + 2.0 * v1 * v1 * q**3,
            -v3 * q * q + 6.0 * v1 * v2 * q**3 - 6.0 * v1**3 * q**4,
        )

    def g0(self, xi):
        v, v1, v2, _ = self._v(xi)
        q = 1.0 / (1.0 + v)
        return -v2 * q + 2.0 * (v1 * q) ** 2

    def dg0(self, xi):
        v, v1, v2, v3 = self._v(xi)
        q = 1.0 / (1.0 + v)
        return -v3 * q + 5.0 * v1 * v2 * q * q - 4.0 * v1**3 * q**3


@dataclass(frozen=True)
class DualBeam(LaunchProfile):
    """Coherent sum ``base(xi - offset) + base(xi + offset)`` of two parallel beams."""

    offset: float
    base: LaunchProfile
    kind = "dual"

    def __post_init__(self):
        if not self.offset >= 0.0:
            raise ConfigError(f"offset must be >= 0, got {self.offset}")
        if isinstance(self.base, (DualBeam, Tabulated)):
            raise ConfigError("dual-beam base must be a single analytic profile")

    @property
    def width_parameter(self) -> float:
        return self.base.width_parameter

    @property
    def peak(self) -> float:
        return float(max(self.value(0.0), self.value(self.offset)))

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.base.value(xi - self.offset) + self.base.value(xi + self.offset)

    def derivatives(self, xi):
        xi = np.asarray(xi, dtype=float)
        a = self.base.derivatives(xi - self.offset)
        b = self.base.derivatives(xi + self.offset)
        return tuple(p + q for p, q in zip(a, b))


@dataclass(frozen=True)
class Uniform(LaunchProfile):
    """Flat amplitude ``R = 1``; ``epsilon`` only sets the default launch span."""

    epsilon: float = 0.1
    kind = "uniform"

    def __post_init__(self):
        _check_epsilon(self.epsilon)

    @property
    def width_parameter(self) -> float:
        return self.epsilon

    @property
    def peak(self) -> float:
        return 1.0

    def value(self, xi):
        return np.ones_like(np.asarray(xi, dtype=float))

    def derivatives(self, xi):
        one = np.ones_like(np.asarray(xi, dtype=float))
        zero = np.zeros_like(one)
        return one, zero, zero, zero

    def g0(self, xi):
        return np.zeros_like(np.asarray(xi, dtype=float))

    def dg0(self, xi):
        return np.zeros_like(np.asarray(xi, dtype=float))


@dataclass(frozen=True)
class Scaled(LaunchProfile):
    """``factor * base(xi)``; G is unchanged by the overall normalisation."""

    base: LaunchProfile
    factor: float = 1.0
    kind = "scaled"

    def __post_init__(self):
        if not self.factor > 0:
            raise ConfigError(f"amplitude scale must be positive, got {self.factor}")

    @property
    def analytic(self) -> bool:
        return self.base.analytic

    @property
    def width_parameter(self) -> float:
        return self.base.width_parameter

    @property
    def peak(self) -> float:
        return self.factor * self.base.peak

    def value(self, xi):
        return self.factor * self.base.value(xi)

    def derivatives(self, xi):
        return tuple(self.factor * d for d in self.base.derivatives(xi))

    def g0(self, xi):
        return self.base.g0(xi)

    def dg0(self, xi):
        return self.base.dg0(xi)


@dataclass(frozen=True, eq=False)
class Tabulated(LaunchProfile):
    """Monotone cubic (PCHIP) interpolant through ``(xi, R)`` knots."""

    knots: tuple
    kind = "tabulated"
    analytic = False

    def __post_init__(self):
        arr = np.asarray(self.knots, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
            raise ConfigError("tabulated profile needs at least 3 (xi, R) knots")
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise ConfigError("tabulated knots must be strictly increasing in xi")
        if np.any(arr[:, 1] <= 0):
            raise ConfigError("tabulated amplitudes must be positive")
        object.__setattr__(self, "knots", tuple(map(tuple, arr)))
        object.__setattr__(self, "_interp", PchipInterpolator(arr[:, 0], arr[:, 1], extrapolate=False))

    @classmethod
    def from_file(cls, path) -> "Tabulated":
        data = np.loadtxt(path, dtype=float, ndmin=2)
        return cls(knots=tuple(map(tuple, data[:, :2])))

    @property
    def _arr(self):
        return np.asarray(self.knots)

    @property
    def xi_range(self) -> tuple[float, float]:
        a = self._arr
        return float(a[0, 0]), float(a[-1, 0])

    @property
    def peak(self) -> float:
        return float(self._arr[:, 1].max())

    @property
    def width_parameter(self) -> float:
        # 1/e half-width of the tabulated amplitude about its peak
        a = self._arr
        above = a[a[:, 1] >= self.peak / math.e, 0]
        half = 0.5 * (above.max() - above.min()) if above.size > 1 else 0.0
        if half <= 0.0:
            half = (a[-1, 0] - a[0, 0]) / 6.0
        return min(1.0, 1.0 / half)

    def value(self, xi):
        xi = np.asarray(xi, dtype=float)
        lo, hi = self.xi_range
        if np.any(xi < lo) or np.any(xi > hi):
            raise ExtrapolationError(f"xi outside tabulated range [{lo}, {hi}]")
        return self._interp(xi)

    @property
    def _stencil_step(self) -> float:
        # knot-scale stencil: the interpolant is only C1, so sub-knot steps see its kinks
        return float(np.diff(self._arr[:, 0]).min())

    def g0(self, xi):
        from waveray.wavefront import lagrange_second_derivative

        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        lo, hi = self.xi_range
        h = self._stencil_step
        # one-sided triples at the table ends keep the stencil inside the knots
        centre = np.clip(xi, lo + h, hi - h)
        fm, f0, fp = self.value(centre - h), self.value(centre), self.value(centre + h)
        d2 = lagrange_second_derivative(
            np.stack([centre - h, centre, centre + h]), np.stack([fm, f0, fp]), xi
        )
        return d2 / self.value(xi)

    def dg0(self, xi):
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        lo, hi = self.xi_range
        h = self._stencil_step
        centre = np.clip(xi, lo + 2 * h, hi - 2 * h)
        return (self.g0(centre + h) - self.g0(centre - h)) / (2 * h)

    def derivatives(self, xi):
        raise NotImplementedError("tabulated profiles have no closed-form derivatives")


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def eval_R(profile: LaunchProfile, xi):
    """Launch amplitude ``R(xi, zeta=0)``."""
    out = profile.value(xi)
    return float(out) if np.ndim(out) == 0 else out


def eval_G0(profile: LaunchProfile, xi, r_floor: Optional[float] = None, with_flag: bool = False):
    """
    Launch wave potential ``G = R''/R`` in closed form.

    With ``r_floor`` set, points where ``R < r_floor * peak`` are clamped to
    ``R''/(r_floor * peak)`` and flagged.
    """
    xi_arr = np.asarray(xi, dtype=float)
    g = np.asarray(profile.g0(xi_arr), dtype=float)
    clamped = np.zeros(g.shape, dtype=bool)
    if r_floor is not None and profile.analytic:
        R, _, d2, _ = profile.derivatives(xi_arr)
        floor = r_floor * profile.peak
        clamped = np.asarray(R < floor)
        if np.any(clamped):
            g = np.where(clamped, d2 / floor, g)
    if np.ndim(xi) == 0:
        g = float(np.reshape(g, ()))
        clamped = bool(np.reshape(clamped, ()))
    return (g, clamped) if with_flag else g


def eval_dG0(profile: LaunchProfile, xi):
    """Slope ``dG/dxi`` of the launch wave potential."""
    out = np.asarray(profile.dg0(np.asarray(xi, dtype=float)), dtype=float)
    return float(np.reshape(out, ())) if np.ndim(xi) == 0 else out


def launch_grid(n_rays: int, span: float) -> np.ndarray:
    """Uniform launch abscissae on ``[-span, span]``, exactly antisymmetric."""
    k = np.arange(n_rays, dtype=float) - 0.5 * (n_rays - 1)
    return k * (2.0 * span / (n_rays - 1))


def make_front(profile: LaunchProfile, n_rays: int, span: float) -> BeamFront:
    """Collimated launch front at ``zeta = 0`` with rho = (0, 1)."""
    if n_rays < 3:
        raise ConfigError(f"a front needs at least 3 rays, got {n_rays}")
    if not span > 0:
        raise ConfigError(f"span must be positive, got {span}")
    xi0 = launch_grid(n_rays, span)
    amp = np.asarray(profile.value(xi0), dtype=float)
    n = xi0.size
    sigma = centred_arc_length(np.diff(xi0))
    return BeamFront(
        tau=0.0,
        ray_id=np.arange(n),
        xi0=xi0,
        xi=xi0.copy(),
        zeta=np.zeros(n),
        rho_x=np.zeros(n),
        rho_z=np.ones(n),
        amp_R=amp,
        phase=np.zeros(n),
        g_val=np.zeros(n),
        clamped=np.zeros(n, dtype=bool),
        alive=np.ones(n, dtype=bool),
        sigma=sigma,
    )
