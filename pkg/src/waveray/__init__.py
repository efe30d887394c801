"""Hamiltonian wave-ray beam propagation with a reconstructed wave potential."""

from waveray.model import (
    BeamFront,
    ConfigError,
    DomainError,
    Medium,
    Potential,
    RayState,
    Refractive,
    SimConfig,
    TrajectorySet,
    Vacuum,
    dimensionless_from_physical,
    harmonic_potential,
    linear_index,
    physical_from_dimensionless,
)
from waveray.profiles import Algebraic, DualBeam, Gaussian, Scaled, Tabulated, Uniform, eval_G0, eval_R, make_front
from waveray.integrator import run, step
from waveray.oracles import density_histogram, fringe_positions, gaussian_envelope, paraxial_propagate

__version__ = "0.1.0"

__all__ = [
    "Algebraic",
    "BeamFront",
    "ConfigError",
    "DomainError",
    "DualBeam",
    "Gaussian",
    "Medium",
    "Potential",
    "RayState",
    "Refractive",
    "Scaled",
    "SimConfig",
    "Tabulated",
    "TrajectorySet",
    "Uniform",
    "Vacuum",
    "density_histogram",
    "dimensionless_from_physical",
    "eval_G0",
    "eval_R",
    "fringe_positions",
    "gaussian_envelope",
    "harmonic_potential",
    "linear_index",
    "make_front",
    "paraxial_propagate",
    "physical_from_dimensionless",
    "run",
    "step",
]
