"""
Reconstruction of the wave potential ``G = R''/R`` on the advancing front.

The amplitude carried by each ray is constant along the ray, so on the
front it is a function of the arc length ``sigma`` through the ray
positions. ``G`` and its transverse slope are obtained from 3-point Lagrange
polynomials in ``sigma``. Only alive rays take part; arrays in
:class:`FrontGeometry` and :class:`GField` are indexed like
``FrontGeometry.index`` (the alive rays in launch order).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from waveray.model import BeamFront

ENDPOINT_RULES = ("extrapolate", "one_sided")


class FrontCollapse(RuntimeError):
    """Fewer than three rays remain on the front."""


# --------------------------------------------------------------------------
# 3-point Lagrange stencils
# --------------------------------------------------------------------------


def lagrange_weights(nodes, x, order: int):
    """
    Weights of the 3-point Lagrange polynomial (or its derivatives) at ``x``.

    ``nodes`` has shape ``(3, ...)``; the returned weights broadcast against
    the node values so that ``sum(w * f, axis=0)`` is the interpolant's
    ``order``-th derivative at ``x``.
    """
    x0, x1, x2 = nodes
    d01, d02, d12 = x0 - x1, x0 - x2, x1 - x2
    den = (d01 * d02, -d01 * d12, d02 * d12)
    if order == 0:
        num = ((x - x1) * (x - x2), (x - x0) * (x - x2), (x - x0) * (x - x1))
    elif order == 1:
        num = ((x - x1) + (x - x2), (x - x0) + (x - x2), (x - x0) + (x - x1))
    elif order == 2:
        num = (2.0, 2.0, 2.0)
    else:
        raise ValueError("order must be 0, 1 or 2")
    return tuple(n / d for n, d in zip(num, den))


def _combine(w, values):
    # outer terms first so a mirrored stencil rounds identically
    return (w[0] * values[0] + w[2] * values[2]) + w[1] * values[1]


def lagrange_second_derivative(nodes, values, x=None):
    return _combine(lagrange_weights(nodes, x, 2), values)


def lagrange_first_derivative(nodes, values, x):
    return _combine(lagrange_weights(nodes, x, 1), values)


@lru_cache(maxsize=64)
def _triples(n: int):
    # nearest stencil triple for every point; endpoints reuse the interior one
    j = np.clip(np.arange(n), 1, n - 2)
    out = (j - 1, j, j + 1)
    for a in out:
        a.flags.writeable = False
    return out


def stencil_second_derivative(sigma, f):
    """Second derivative of ``f(sigma)`` at every node from 3-point Lagrange stencils."""
    sigma = np.asarray(sigma, dtype=float)
    f = np.asarray(f, dtype=float)
    a, b, c = _triples(sigma.size)
    # node offsets relative to the centre keep the stencil mirror-symmetric
    s0, s2 = sigma[a] - sigma[b], sigma[c] - sigma[b]
    return lagrange_second_derivative((s0, 0.0, s2), (f[a], f[b], f[c]))


def stencil_first_derivative(sigma, f):
    """First derivative of ``f(sigma)``; endpoints differentiate the nearest interior triple."""
    sigma = np.asarray(sigma, dtype=float)
    f = np.asarray(f, dtype=float)
    a, b, c = _triples(sigma.size)
    s0, s2 = sigma[a] - sigma[b], sigma[c] - sigma[b]
    x = sigma - sigma[b]
    return lagrange_first_derivative((s0, 0.0, s2), (f[a], f[b], f[c]), x)


def _extrapolate_ends(sigma, g):
    """Replace end values by the Lagrange extrapolation of the nearest interior values."""
    n = g.size
    out = g.copy()
    if n == 3:
        out[0] = out[2] = g[1]
    elif n == 4:
        out[0] = g[1] + (g[2] - g[1]) * (sigma[0] - sigma[1]) / (sigma[2] - sigma[1])
        out[3] = g[2] + (g[2] - g[1]) * (sigma[3] - sigma[2]) / (sigma[2] - sigma[1])
    else:
        w = lagrange_weights((sigma[1], sigma[2], sigma[3]), sigma[0], 0)
        out[0] = w[0] * g[1] + w[1] * g[2] + w[2] * g[3]
        w = lagrange_weights((sigma[-2], sigma[-3], sigma[-4]), sigma[-1], 0)
        out[-1] = w[0] * g[-2] + w[1] * g[-3] + w[2] * g[-4]
    return out


# --------------------------------------------------------------------------
# Front geometry and G field
# --------------------------------------------------------------------------


@dataclass
class FrontGeometry:
    """
    Arc-length geometry of the alive part of a front.

    ``index`` are the array positions of the alive rays; ``spacing`` and
    ``crossed`` describe the ``len(index) - 1`` neighbour pairs. ``sigma``
    increases along the front with its origin at the middle alive ray.
    """

    index: np.ndarray
    sigma: np.ndarray
    spacing: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    crossed: np.ndarray
    h_min: float


@dataclass
class GField:
    g: np.ndarray
    dg_dsigma: Optional[np.ndarray]
    clamped: np.ndarray
    retire: np.ndarray
    blended: bool = False


def launch_spacing(front: BeamFront) -> float:
    d = np.abs(np.diff(front.xi0))
    return float(np.median(d)) if d.size else 1.0


def centred_arc_length(spacing) -> np.ndarray:
    """
    Node arc lengths from neighbour spacings, measured outward from the
    middle of the front so that a mirrored front gives exactly ``-sigma``.
    """
    spacing = np.asarray(spacing, dtype=float)
    n = spacing.size + 1
    sigma = np.empty(n)
    m = n // 2
    if n % 2:
        sigma[m] = 0.0
        right = np.cumsum(spacing[m:])
        left = np.cumsum(spacing[:m][::-1])
        sigma[m + 1 :] = right
        sigma[:m] = -left[::-1]
    else:
        half = 0.5 * spacing[m - 1]
        sigma[m] = half
        sigma[m - 1] = -half
        sigma[m + 1 :] = half + np.cumsum(spacing[m:])
        sigma[: m - 1] = -(half + np.cumsum(spacing[: m - 1][::-1]))[::-1]
    return sigma


def front_geometry(front: BeamFront, h_min: Optional[float] = None) -> FrontGeometry:
    """
    Arc length, tangents and normals along the alive rays of ``front``.

    Neighbour spacings are chordal distances floored at ``h_min``
    (default ``1e-6`` of the launch spacing). A pair whose transverse order
    has reversed (``xi[i+1] <= xi[i]``) is flagged in ``crossed``.
    """
    idx = np.flatnonzero(front.alive)
    if idx.size < 3:
        raise FrontCollapse(f"only {idx.size} alive rays left on the front")
    if h_min is None:
        h_min = 1e-6 * launch_spacing(front)
    x = front.xi[idx]
    z = front.zeta[idx]
    dx, dz = np.diff(x), np.diff(z)
    spacing = np.maximum(np.hypot(dx, dz), h_min)
    crossed = dx <= 0.0
    sigma = centred_arc_length(spacing)

    tx = stencil_first_derivative(sigma, x)
    tz = stencil_first_derivative(sigma, z)
    tn = np.hypot(tx, tz)
    tn = np.where(tn > 0, tn, 1.0)
    tangent = np.stack([tx / tn, tz / tn], axis=1)

    px, pz = front.rho_x[idx], front.rho_z[idx]
    pn = np.hypot(px, pz)
    pn = np.where(pn > 0, pn, 1.0)
    normal = np.stack([-pz / pn, px / pn], axis=1)
    flip = np.sum(normal * tangent, axis=1) < 0
    normal[flip] *= -1.0
    return FrontGeometry(
        index=idx, sigma=sigma, spacing=spacing, tangent=tangent, normal=normal, crossed=crossed, h_min=float(h_min)
    )


def estimate_G(
    front: BeamFront,
    geom: FrontGeometry,
    prev: Optional[GField] = None,
    g_blend: float = 0.0,
    r_floor: float = 1e-6,
    endpoint: str = "extrapolate",
) -> GField:
    """
    Wave potential on the front from the transported amplitudes.

    Interior rays use the second derivative of the Lagrange quadratic through
    their two neighbours divided by ``max(R_i, r_floor * R_max)``. End rays
    either extrapolate the interior G with the nearest 3-point stencil
    (``endpoint="extrapolate"``) or use the end triple's second derivative of
    R (``"one_sided"``).
    """
    if endpoint not in ENDPOINT_RULES:
        raise ValueError(f"endpoint must be one of {ENDPOINT_RULES}")
    R = front.amp_R[geom.index]
    floor = r_floor * float(np.max(R))
    clamped = R < floor
    d2 = stencil_second_derivative(geom.sigma, R)
    with np.errstate(all="ignore"):
        g = d2 / np.maximum(R, floor)
        if endpoint == "extrapolate":
            g = _extrapolate_ends(geom.sigma, g)
    blended = False
    if prev is not None and g_blend > 0.0 and prev.g.shape == g.shape:
        g = (1.0 - g_blend) * g + g_blend * prev.g
        blended = True
    retire = ~np.isfinite(g)
    return GField(g=g, dg_dsigma=None, clamped=clamped, retire=retire, blended=blended)


def transverse_gradient(gf: GField, geom: FrontGeometry) -> np.ndarray:
    """``dG/dsigma`` from 3-point Lagrange first derivatives; ends are one-sided."""
    g = np.where(np.isfinite(gf.g), gf.g, 0.0)
    dg = stencil_first_derivative(geom.sigma, g)
    gf.dg_dsigma = dg
    return dg


@lru_cache(maxsize=64)
def _band(n: int, kmax: int):
    # index tables of the neighbours k = 1..kmax to the right and left of every node
    k = np.arange(1, kmax + 1)[:, None]
    i = np.arange(n)[None, :]
    j = i + k
    has_r = j < n
    m = i - k
    has_l = m >= 0
    out = (np.broadcast_to(k - 1, (kmax, n)), np.where(has_r, j, n - 1), has_r, np.where(has_l, m, 0), has_l)
    for a in out:
        if a.flags.owndata:
            a.flags.writeable = False
    return out


def smooth_along_front(sigma, values, length: float, cutoff: float = 4.0) -> np.ndarray:
    """
    Local-linear Gaussian-kernel regression of ``values`` over ``sigma``.

    Linear data pass through unchanged, including near the ends of the front.
    ``length <= 0`` returns a copy.
    """
    values = np.asarray(values, dtype=float)
    if length <= 0.0 or values.size < 3:
        return values.copy()
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.size
    reach = np.searchsorted(sigma, sigma + cutoff * length, side="right") - np.arange(n)
    kmax = min(int(max(1, reach.max())), n - 1)
    rows, j, has_r, m, has_l = _band(n, kmax)
    dr = np.where(has_r, sigma[j] - sigma[None, :], 0.0)
    wr = np.where(has_r & (dr <= cutoff * length), np.exp(-0.5 * (dr / length) ** 2), 0.0)
    # neighbour k to the left is the right-neighbour entry of node i - k
    dl = np.where(has_l, dr[rows, m], 0.0)
    wl = np.where(has_l, wr[rows, m], 0.0)
    vr, vl = values[j], values[m]
    # left and right terms are paired before the sum over k, which runs in
    # the same order for every node, so mirrored nodes round identically
    s0 = 1.0 + (wr + wl).sum(axis=0)
    s1 = (wr * dr - wl * dl).sum(axis=0)
    s2 = (wr * dr * dr + wl * dl * dl).sum(axis=0)
    t0 = values + (wr * vr + wl * vl).sum(axis=0)
    t1 = (wr * dr * vr - wl * dl * vl).sum(axis=0)
    return _local_linear(values, s0, s1, s2, t0, t1)


def _local_linear(values, s0, s1, s2, t0, t1):
    det = s0 * s2 - s1 * s1
    ok = det > 1e-12 * np.maximum(s0 * s2, 1e-300)
    out = values.copy()
    out[ok] = (s2[ok] * t0[ok] - s1[ok] * t1[ok]) / det[ok]
    return out
