"""
INI configuration files for the command-line tool.

A config has up to five sections; every key is optional unless noted and
unknown sections or keys are rejected::

    [profile]
    kind = gaussian | algebraic | dual | tabulated | uniform   (required)
    epsilon = 0.1            ; gaussian, algebraic, dual, uniform
    n_exp = 1                ; algebraic, or dual with base = algebraic
    offset = 20              ; dual
    base = gaussian          ; dual: gaussian | algebraic
    knots = table.txt        ; tabulated: two-column (xi, R) text, relative to the config
    amplitude_scale = 1.0    ; overall factor on R (G does not depend on it)

    [medium]
    kind = vacuum | harmonic | linear_index
    omega = 0.1              ; harmonic, V/E = omega**2 * xi**2
    alpha = 0.001            ; linear_index, n**2 = 1 - alpha * zeta

    [numerics]
    n_rays, span, d_tau, zeta_max, force_mode, g_blend, r_floor, g_source,
    smooth_len, renormalize, gather_ratio, max_steps, stop_on_gathering,
    retire_crossed

    [outputs]
    run = true               ; false: emit launch figures only
    output_stride = 10
    figures = trajectories, density     ; any of profiles, launchG, trajectories, density
    stations = 200, 400, 700            ; density / comparison stations
    bins = 64
    density_method = interval           ; interval | point
    paraxial = false                    ; also propagate the paraxial oracle
    paraxial_half_width = 1000
    paraxial_points = 8192
    envelope_limit = 20                 ; |xi0| bound of the Gaussian envelope check

    [sweep]
    epsilon = 0.05, 0.1, 0.2
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from waveray.model import (
    FORCE_MODES,
    G_SOURCES,
    ConfigError,
    SimConfig,
    Vacuum,
    harmonic_potential,
    linear_index,
)
from waveray.profiles import Algebraic, DualBeam, Gaussian, LaunchProfile, Scaled, Tabulated, Uniform

PROFILE_KINDS = ("gaussian", "algebraic", "dual", "tabulated", "uniform")
MEDIUM_KINDS = ("vacuum", "harmonic", "linear_index")
FIGURE_KINDS = ("profiles", "launchG", "trajectories", "density")
DENSITY_METHODS = ("interval", "point")

SCHEMA = {
    "profile": {
        "kind": str,
        "epsilon": float,
        "n_exp": int,
        "offset": float,
        "base": str,
        "knots": str,
        "amplitude_scale": float,
    },
    "medium": {"kind": str, "omega": float, "alpha": float},
    "numerics": {
        "n_rays": int,
        "span": float,
        "d_tau": float,
        "zeta_max": float,
        "force_mode": str,
        "g_blend": float,
        "r_floor": float,
        "g_source": str,
        "smooth_len": float,
        "renormalize": bool,
        "gather_ratio": float,
        "max_steps": int,
        "stop_on_gathering": bool,
        "retire_crossed": bool,
    },
    "outputs": {
        "run": bool,
        "output_stride": int,
        "figures": list,
        "stations": list,
        "bins": int,
        "density_method": str,
        "paraxial": bool,
        "paraxial_half_width": float,
        "paraxial_points": int,
        "envelope_limit": float,
    },
    "sweep": {"epsilon": list},
}


@dataclass
class OutputSpec:
    run: bool = True
    figures: tuple = ()
    stations: tuple = ()
    bins: int = 64
    density_method: str = "interval"
    paraxial: bool = False
    paraxial_half_width: float = 1000.0
    paraxial_points: int = 8192
    envelope_limit: float = 20.0


@dataclass
class RunSpec:
    """A parsed config: the simulation, its outputs and an optional sweep."""

    sim: SimConfig
    outputs: OutputSpec
    sweep_epsilon: tuple = ()
    raw: dict = field(default_factory=dict)
    source: Optional[Path] = None

    def resolved(self) -> dict:
        """Canonical, fully-defaulted description used for hashing."""
        return {"sim": describe_sim(self.sim), "outputs": _jsonable(self.outputs.__dict__),
                "sweep": {"epsilon": list(self.sweep_epsilon)}}

    @property
    def config_hash(self) -> str:
        return config_hash(self.resolved())

    def with_epsilon(self, epsilon: float) -> "RunSpec":
        sim = self.sim.replace(profile=with_epsilon(self.sim.profile, epsilon))
        return RunSpec(sim=sim, outputs=self.outputs, sweep_epsilon=(), raw=self.raw, source=self.source)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def config_hash(resolved: dict) -> str:
    text = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def describe_profile(p: LaunchProfile) -> dict:
    if isinstance(p, Scaled):
        d = describe_profile(p.base)
        d["amplitude_scale"] = p.factor
        return d
    if isinstance(p, DualBeam):
        return {"kind": "dual", "offset": p.offset, "base": describe_profile(p.base)}
    if isinstance(p, Tabulated):
        return {"kind": "tabulated", "knots": [list(k) for k in p.knots]}
    if isinstance(p, Algebraic):
        return {"kind": "algebraic", "epsilon": p.epsilon, "n_exp": int(p.n_exp)}
    return {"kind": p.kind, "epsilon": p.width_parameter}


def describe_medium(m) -> dict:
    return {"kind": getattr(m, "label", "vacuum") or "vacuum"}


def describe_sim(cfg: SimConfig) -> dict:
    return {
        "profile": describe_profile(cfg.profile),
        "medium": describe_medium(cfg.medium),
        "n_rays": cfg.n_rays,
        "span": cfg.resolved_span,
        "d_tau": cfg.d_tau,
        "zeta_max": cfg.zeta_max,
        "force_mode": cfg.force_mode,
        "g_blend": cfg.g_blend,
        "r_floor": cfg.r_floor,
        "output_stride": cfg.output_stride,
        "g_source": cfg.g_source,
        "smooth_len": cfg.resolved_smooth_len,
        "renormalize": cfg.renormalize,
        "gather_ratio": cfg.gather_ratio,
        "max_steps": cfg.step_limit,
        "stop_on_gathering": cfg.stop_on_gathering,
        "retire_crossed": cfg.retire_crossed,
    }


def with_epsilon(p: LaunchProfile, epsilon: float) -> LaunchProfile:
    if isinstance(p, Scaled):
        return Scaled(with_epsilon(p.base, epsilon), p.factor)
    if isinstance(p, DualBeam):
        return DualBeam(p.offset, with_epsilon(p.base, epsilon))
    if isinstance(p, Algebraic):
        return Algebraic(epsilon, p.n_exp)
    if isinstance(p, (Gaussian, Uniform)):
        return type(p)(epsilon)
    raise ConfigError(f"an epsilon sweep needs an analytic profile, not {p.kind}")


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------


def _convert(section, key, text, kind):
    text = text.strip()
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is list:
            return [t.strip() for t in text.split(",") if t.strip()]
        if kind is int:
            return int(text)
        if kind is float:
            value = float(text)
            if not math.isfinite(value):
                raise ValueError(text)
            return value
        return text
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot read {text!r} as {kind.__name__}") from None


def read_sections(text: str) -> dict:
    """Parse INI text into typed ``{section: {key: value}}``; unknown names are errors."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    out = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]; allowed: {', '.join(SCHEMA)}")
        keys = SCHEMA[section]
        out[section] = {}
        for key, value in parser.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key [{section}] {key}; allowed: {', '.join(keys)}")
            out[section][key] = _convert(section, key, value, keys[key])
    return out


def _profile(sec: dict, base_dir: Path) -> LaunchProfile:
    kind = sec.get("kind")
    if kind is None:
        raise ConfigError("[profile] kind is required")
    if kind not in PROFILE_KINDS:
        raise ConfigError(f"[profile] kind must be one of {PROFILE_KINDS}, got {kind!r}")
    eps = sec.get("epsilon", 0.1)
    n_exp = sec.get("n_exp", 1)
    if kind == "gaussian":
        p = Gaussian(eps)
    elif kind == "algebraic":
        p = Algebraic(eps, n_exp)
    elif kind == "uniform":
        p = Uniform(eps)
    elif kind == "dual":
        base = sec.get("base", "gaussian")
        if base == "gaussian":
            b = Gaussian(eps)
        elif base == "algebraic":
            b = Algebraic(eps, n_exp)
        else:
            raise ConfigError(f"[profile] base must be gaussian or algebraic, got {base!r}")
        p = DualBeam(sec.get("offset", 0.0), b)
    else:
        if "knots" not in sec:
            raise ConfigError("[profile] kind = tabulated needs knots = <file>")
        path = Path(sec["knots"])
        if not path.is_absolute():
            path = base_dir / path
        try:
            p = Tabulated.from_file(path)
        except OSError as exc:
            raise ConfigError(f"cannot read knot table {path}: {exc}") from None
    scale = sec.get("amplitude_scale", 1.0)
    return p if scale == 1.0 else Scaled(p, scale)


def _medium(sec: dict):
    kind = sec.get("kind", "vacuum")
    if kind not in MEDIUM_KINDS:
        raise ConfigError(f"[medium] kind must be one of {MEDIUM_KINDS}, got {kind!r}")
    if kind == "harmonic":
        return harmonic_potential(sec.get("omega", 0.1))
    if kind == "linear_index":
        return linear_index(sec.get("alpha", 1e-3))
    return Vacuum()


def load_spec(text: str, base_dir: Path = Path("."), source: Optional[Path] = None) -> RunSpec:
    sections = read_sections(text)
    if "profile" not in sections:
        raise ConfigError("missing [profile] section")
    profile = _profile(sections["profile"], base_dir)
    medium = _medium(sections.get("medium", {}))
    num = dict(sections.get("numerics", {}))
    outs = dict(sections.get("outputs", {}))
    if "force_mode" in num and num["force_mode"] not in FORCE_MODES:
        raise ConfigError(f"[numerics] force_mode must be one of {FORCE_MODES}")
    if "g_source" in num and num["g_source"] not in G_SOURCES:
        raise ConfigError(f"[numerics] g_source must be one of {G_SOURCES}")
    stride = outs.pop("output_stride", 10)
    sim = SimConfig(profile=profile, medium=medium, output_stride=stride, **num)

    figures = tuple(outs.get("figures", ()))
    for f in figures:
        if f not in FIGURE_KINDS:
            raise ConfigError(f"[outputs] figures: unknown kind {f!r}; allowed: {FIGURE_KINDS}")
    try:
        stations = tuple(sorted(float(s) for s in outs.get("stations", ())))
    except ValueError:
        raise ConfigError("[outputs] stations must be numbers") from None
    if any(s < 0 for s in stations):
        raise ConfigError("[outputs] stations must be >= 0")
    method = outs.get("density_method", "interval")
    if method not in DENSITY_METHODS:
        raise ConfigError(f"[outputs] density_method must be one of {DENSITY_METHODS}")
    bins = outs.get("bins", 64)
    if bins < 5:
        raise ConfigError("[outputs] bins must be >= 5")
    output = OutputSpec(
        run=outs.get("run", True),
        figures=figures,
        stations=stations,
        bins=bins,
        density_method=method,
        paraxial=outs.get("paraxial", False),
        paraxial_half_width=outs.get("paraxial_half_width", 1000.0),
        paraxial_points=outs.get("paraxial_points", 8192),
        envelope_limit=outs.get("envelope_limit", 20.0),
    )
    if output.paraxial_half_width <= 0 or output.paraxial_points < 16:
        raise ConfigError("[outputs] paraxial grid must have a positive half width and >= 16 points")

    sweep = ()
    if "sweep" in sections:
        try:
            sweep = tuple(float(e) for e in sections["sweep"].get("epsilon", ()))
        except ValueError:
            raise ConfigError("[sweep] epsilon must be a list of numbers") from None
        if not sweep:
            raise ConfigError("[sweep] epsilon list is empty")
        if len(set(sweep)) != len(sweep):
            raise ConfigError("[sweep] epsilon values must be distinct")
        for e in sweep:
            if not 0.0 < e <= 1.0:
                raise ConfigError(f"[sweep] epsilon must lie in (0, 1], got {e}")
    return RunSpec(sim=sim, outputs=output, sweep_epsilon=sweep, raw=sections, source=source)


def load_config(path) -> RunSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return load_spec(text, base_dir=path.parent, source=path)
