"""Spectral Galerkin simulation and verification of damped stochastic
Navier-Stokes flows (Brinkman-Forchheimer absorption, Wiener + jump noise)."""

__version__ = "0.1.0"

from .basis import (PhysicalField, SpectralField, build_basis, leray_project,
                    norms, to_physical, to_spectral)
from .config import ConfigError, RegimeError, RunConfig, parse_config
from .integrator import (SdeState, StepScheme, Trajectory, simulate_pair_crn,
                         simulate_path, step)
from .noise import (GammaFamily, JumpSpec, NoiseRecord, QSpectrum, SigmaFamily,
                    certify_hypotheses, compensator_drift, diffusion_increment,
                    jump_increment, sample_jumps, sample_wiener_increment)
from .operators import (OperatorConfig, TimeSeries, apply_absorption,
                        apply_convection, apply_stokes, galerkin_truncate,
                        mollify_time, smooth_project)

__all__ = [
    "PhysicalField", "SpectralField", "build_basis", "leray_project", "norms",
    "to_physical", "to_spectral", "ConfigError", "RegimeError", "RunConfig",
    "parse_config", "SdeState", "StepScheme", "Trajectory", "simulate_pair_crn",
    "simulate_path", "step", "GammaFamily", "JumpSpec", "NoiseRecord",
    "QSpectrum", "SigmaFamily", "certify_hypotheses", "compensator_drift",
    "diffusion_increment", "jump_increment", "sample_jumps",
    "sample_wiener_increment", "OperatorConfig", "TimeSeries",
    "apply_absorption", "apply_convection", "apply_stokes",
    "galerkin_truncate", "mollify_time", "smooth_project",
]
