"""Discrete-atom noise budgets for atomic-ensemble optical sensors.

The sensing medium is a finite, stochastic collection of atoms rather than a
continuous dielectric, so the measured susceptibility is a sample mean whose
fluctuations compete with photon shot noise.  This package computes both
noise sources, the unified scaling between them, slope-detection sensitivity
maps for a four-level ladder readout, and validates every analytic variance
by direct Monte Carlo simulation.
"""

from .ensemble import (
    AlphaMoments,
    GasParams,
    VelocityDistribution,
    alpha_moments,
    fluctuation_parameter,
    intrinsic_variance,
    velocity_distribution,
)
from .geometry import (
    BeamGeometry,
    ResourceAccounting,
    atom_flux,
    beam_volume,
    mean_atom_number,
    optical_depth_prefactor,
    photon_flux,
    probe_rabi_from_power,
    resource_accounting,
    resource_ratio,
)
from .montecarlo import (
    TrialConfig,
    VarianceEstimate,
    estimate_variance,
    sample_atom_number,
    sample_chi_bar,
    sample_photon_count,
    simulate_signal,
    trial_rng,
    validate_scaling,
)
from .noise import (
    GeneralizedScalingRatio,
    NoiseBudget,
    PhotonStatistics,
    ReadoutModel,
    critical_threshold,
    generalized_scaling_ratio,
    j_of_r,
    noise_budget,
    quantum_advantage_boundary,
    scaling_ratio,
    sensitivity,
    sensitivity_map,
    signal_slope,
    signal_variance,
)
from .scenario import Scenario, bundled_scenario_path, load_scenario
from .spectroscopy import (
    DensityMatrix4,
    FourLevelParams,
    Polarizability,
    alpha_from_coherence,
    doppler_shift,
    steady_state,
    weak_probe_alpha,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaMoments",
    "BeamGeometry",
    "DensityMatrix4",
    "FourLevelParams",
    "GasParams",
    "GeneralizedScalingRatio",
    "NoiseBudget",
    "PhotonStatistics",
    "Polarizability",
    "ReadoutModel",
    "ResourceAccounting",
    "Scenario",
    "TrialConfig",
    "VarianceEstimate",
    "VelocityDistribution",
    "alpha_from_coherence",
    "alpha_moments",
    "atom_flux",
    "beam_volume",
    "bundled_scenario_path",
    "critical_threshold",
    "doppler_shift",
    "estimate_variance",
    "fluctuation_parameter",
    "generalized_scaling_ratio",
    "intrinsic_variance",
    "j_of_r",
    "load_scenario",
    "mean_atom_number",
    "noise_budget",
    "optical_depth_prefactor",
    "photon_flux",
    "probe_rabi_from_power",
    "quantum_advantage_boundary",
    "resource_accounting",
    "resource_ratio",
    "sample_atom_number",
    "sample_chi_bar",
    "sample_photon_count",
    "scaling_ratio",
    "sensitivity",
    "sensitivity_map",
    "signal_slope",
    "signal_variance",
    "simulate_signal",
    "steady_state",
    "trial_rng",
    "validate_scaling",
    "velocity_distribution",
    "weak_probe_alpha",
]
