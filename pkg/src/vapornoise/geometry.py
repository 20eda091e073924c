"""Beam and cell geometry bookkeeping: volumes, fluxes, and resource ratios.

Models the probe as a cylinder of length L and radius w0.  Photons arrive at
the incident-power rate; atoms refresh through the cylinder sidewall at the
kinetic-theory effusion rate.  Their ratio decides which noise source
dominates the readout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import c, epsilon_0, h, hbar

from .ensemble import GasParams, velocity_distribution

__all__ = [
    "BeamGeometry",
    "ResourceAccounting",
    "beam_volume",
    "mean_atom_number",
    "atom_flux",
    "photon_flux",
    "resource_ratio",
    "optical_depth_prefactor",
    "probe_rabi_from_power",
    "saturation_fraction",
    "resource_accounting",
]


@dataclass(frozen=True)
class BeamGeometry:
    """Probe-beam waist, cell length, wavelength and powers, all SI.

    ``saturation_power`` marks the weak-probe boundary used to annotate
    sweeps; it is configuration, not a derived quantity.
    """

    waist_w0: float
    cell_length_L: float
    lambda_p: float
    power_in: float
    saturation_power: float = 480e-6

    def __post_init__(self):
        for name in ("waist_w0", "cell_length_L", "lambda_p", "saturation_power"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if not (self.power_in >= 0 and math.isfinite(self.power_in)):
            raise ValueError(f"power_in must be >= 0 and finite, got {self.power_in!r}")


@dataclass(frozen=True)
class ResourceAccounting:
    """Snapshot of every resource number entering the noise budget."""

    v_bm: float
    n_at_mean: float
    phi_at: float
    phi_ph: float
    resource_ratio: float
    a_prefactor: float
    mode: str


def beam_volume(geom: BeamGeometry) -> float:
    """Cylindrical probe volume pi * w0^2 * L in m^3."""
    return math.pi * geom.waist_w0**2 * geom.cell_length_L


def mean_atom_number(gas: GasParams, geom: BeamGeometry) -> float:
    """Mean number of atoms inside the probe volume, n * V_bm."""
    return gas.density_n * beam_volume(geom)


def atom_flux(gas: GasParams, geom: BeamGeometry) -> float:
    """Kinetic-theory refresh rate through the beam sidewall, n*v_bar*A/4 (1/s)."""
    area = 2.0 * math.pi * geom.waist_w0 * geom.cell_length_L
    return gas.density_n * velocity_distribution(gas).v_bar * area / 4.0


def photon_flux(geom: BeamGeometry) -> float:
    """Incident photon rate P_in/(hbar*omega_p) = P_in*lambda_p/(h*c) (1/s)."""
    return geom.power_in * geom.lambda_p / (h * c)


def resource_ratio(
    gas: GasParams,
    geom: BeamGeometry,
    mode: str = "flux",
    dt: float | None = None,
) -> float:
    """Photon-to-atom resource ratio.

    ``"flux"`` compares the two rates directly and is interval-independent;
    ``"snapshot"`` compares the photon count over ``dt`` to the mean number
    of atoms instantaneously inside the volume.
    """
    if mode == "flux":
        return photon_flux(geom) / atom_flux(gas, geom)
    if mode == "snapshot":
        if dt is None or not dt > 0:
            raise ValueError("snapshot mode requires dt > 0")
        return photon_flux(geom) * dt / mean_atom_number(gas, geom)
    raise ValueError(f"unknown resource-ratio mode {mode!r}")


def optical_depth_prefactor(geom: BeamGeometry) -> float:
    """Optical-depth prefactor 2*pi*L/lambda_p (dimensionless)."""
    return 2.0 * math.pi * geom.cell_length_L / geom.lambda_p


def probe_rabi_from_power(
    geom: BeamGeometry, mu12: float, convention: str = "peak"
) -> float:
    """Probe Rabi frequency (rad/s) for the configured input power.

    Converts power to intensity for a Gaussian beam -- ``"peak"`` uses the
    on-axis value 2P/(pi*w0^2), ``"mean"`` the average P/(pi*w0^2) -- then
    Omega_p = (mu12/hbar) * sqrt(2*I/(epsilon_0*c)).
    """
    if convention == "peak":
        intensity = 2.0 * geom.power_in / (math.pi * geom.waist_w0**2)
    elif convention == "mean":
        intensity = geom.power_in / (math.pi * geom.waist_w0**2)
    else:
        raise ValueError(f"unknown intensity convention {convention!r}")
    field = math.sqrt(2.0 * intensity / (epsilon_0 * c))
    return mu12 * field / hbar


def saturation_fraction(geom: BeamGeometry) -> float:
    """P_in relative to the configured saturation power; < 1 marks weak probe."""
    return geom.power_in / geom.saturation_power


def resource_accounting(
    gas: GasParams,
    geom: BeamGeometry,
    mode: str = "flux",
    dt: float | None = None,
) -> ResourceAccounting:
    """Collect all geometry-derived resource numbers in one record."""
    return ResourceAccounting(
        v_bm=beam_volume(geom),
        n_at_mean=mean_atom_number(gas, geom),
        phi_at=atom_flux(gas, geom),
        phi_ph=photon_flux(geom),
        resource_ratio=resource_ratio(gas, geom, mode=mode, dt=dt),
        a_prefactor=optical_depth_prefactor(geom),
        mode=mode,
    )
