"""Galerkin/Fourier solver for the mean-correction Burgers equation of a
mean-reversion SDE, with Hopf-Cole / finite-difference oracles and a
Monte Carlo path-independence checker."""

from .spectral_core import (
    BlowUpError,
    CoeffTrajectory,
    ConfigError,
    Direction,
    FourierState,
    GridFunction,
    IntegrityError,
    SpectralConfig,
    evolve,
    galerkin_step,
    grid_nodes,
    init_coeffs,
    spectral_rhs,
    synthesize,
    truncated_convolution,
)

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "CoeffTrajectory",
    "ConfigError",
    "Direction",
    "FourierState",
    "GridFunction",
    "IntegrityError",
    "SpectralConfig",
    "evolve",
    "galerkin_step",
    "grid_nodes",
    "init_coeffs",
    "spectral_rhs",
    "synthesize",
    "truncated_convolution",
]
