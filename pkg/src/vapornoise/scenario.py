"""Scenario files: strict, unit-aware configuration of a full operating point.

A scenario is a YAML document in which every physical quantity carries an
explicit unit suffix ("power_in: 120 uW") and is normalised to SI on load.
Parsing is strict: unknown keys, duplicate keys, missing units and wrong
dimensions are all errors that name the offending key.  Frequencies given in
Hz-family units are cyclic and are multiplied by 2*pi; rad/s-family units
are taken as angular directly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np
import yaml
from scipy.constants import physical_constants

from .ensemble import GasParams
from .errors import ScenarioError, UnitError
from .geometry import BeamGeometry, optical_depth_prefactor, probe_rabi_from_power
from .montecarlo import TrialConfig
from .noise import PhotonStatistics, ReadoutModel
from .spectroscopy import COHERENCES, FourLevelParams

__all__ = [
    "AxisSpec",
    "McValidationSpec",
    "Scenario",
    "load_scenario",
    "parse_quantity",
    "bundled_scenario_path",
]

_AMU = physical_constants["atomic mass constant"][0]
_EA0 = (
    physical_constants["elementary charge"][0]
    * physical_constants["Bohr radius"][0]
)
_TAU = 2.0 * math.pi

_UNIT_TABLES: dict[str, dict[str, float]] = {
    "length": {"m": 1.0, "cm": 1e-2, "mm": 1e-3, "um": 1e-6, "nm": 1e-9},
    "power": {"W": 1.0, "mW": 1e-3, "uW": 1e-6, "nW": 1e-9},
    "temperature": {"K": 1.0},
    "mass": {"kg": 1.0, "amu": _AMU},
    "density": {"m^-3": 1.0, "cm^-3": 1e6},
    "time": {"s": 1.0, "ms": 1e-3, "us": 1e-6, "ns": 1e-9},
    "dipole": {"C*m": 1.0, "ea0": _EA0},
    "angular_frequency": {
        "Hz": _TAU,
        "kHz": _TAU * 1e3,
        "MHz": _TAU * 1e6,
        "GHz": _TAU * 1e9,
        "rad/s": 1.0,
        "krad/s": 1e3,
        "Mrad/s": 1e6,
        "Grad/s": 1e9,
    },
}


def parse_quantity(raw, kind: str, key: str = "<value>") -> float:
    """Parse "<number> <unit>" into SI for the given dimension kind."""
    table = _UNIT_TABLES.get(kind)
    if table is None:
        raise ValueError(f"unknown quantity kind {kind!r}")
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        raise UnitError(
            f"{key}: expected a quantity with a unit (e.g. '120 uW'), got bare "
            f"number {raw!r}"
        )
    if not isinstance(raw, str):
        raise UnitError(f"{key}: expected a '<number> <unit>' string, got {raw!r}")
    parts = raw.split()
    if len(parts) != 2:
        raise UnitError(
            f"{key}: expected '<number> <unit>', got {raw!r}"
        )
    number_text, unit = parts
    try:
        value = float(number_text)
    except ValueError:
        raise UnitError(f"{key}: cannot parse number {number_text!r}") from None
    try:
        factor = table[unit]
    except KeyError:
        raise UnitError(
            f"{key}: unit {unit!r} is not a {kind} unit; expected one of "
            f"{sorted(table)}"
        ) from None
    return value * factor


def _parse_number(raw, key: str) -> float:
    """Dimensionless number; numeric strings tolerated for YAML-1.1 floats."""
    if isinstance(raw, bool):
        raise ScenarioError(f"{key}: expected a number, got boolean {raw!r}")
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, str):
        try:
            return float(raw)
        except ValueError:
            pass
    raise ScenarioError(f"{key}: expected a dimensionless number, got {raw!r}")


class _StrictLoader(yaml.SafeLoader):
    """SafeLoader that refuses duplicate mapping keys."""


def _construct_mapping(loader, node, deep=False):
    mapping = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in mapping:
            raise ScenarioError(
                f"duplicate key {key!r} at line {key_node.start_mark.line + 1}"
            )
        mapping[key] = loader.construct_object(value_node, deep=deep)
    return mapping


_StrictLoader.add_constructor(
    yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping
)

_MISSING = object()


class _Section:
    """Strict view over one mapping: every key must be consumed exactly once."""

    def __init__(self, mapping, path: str):
        if mapping is None:
            mapping = {}
        if not isinstance(mapping, dict):
            raise ScenarioError(f"{path}: expected a mapping, got {type(mapping).__name__}")
        self.mapping = mapping
        self.path = path
        self.consumed: set = set()

    def _label(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def take(self, key: str, default=_MISSING):
        self.consumed.add(key)
        if key in self.mapping:
            return self.mapping[key]
        if default is _MISSING:
            raise ScenarioError(f"missing required key {self._label(key)!r}")
        return default

    def quantity(self, key: str, kind: str, default=_MISSING) -> float:
        raw = self.take(key, default=default)
        if raw is default and default is not _MISSING:
            return default
        return parse_quantity(raw, kind, key=self._label(key))

    def number(self, key: str, default=_MISSING) -> float:
        raw = self.take(key, default=default)
        if raw is default and default is not _MISSING:
            return default
        return _parse_number(raw, key=self._label(key))

    def integer(self, key: str, default=_MISSING) -> int:
        value = self.number(key, default=default)
        if value is default and default is not _MISSING:
            return default
        if value != int(value):
            raise ScenarioError(f"{self._label(key)}: expected an integer, got {value!r}")
        return int(value)

    def string(self, key: str, default=_MISSING, choices=None) -> str:
        raw = self.take(key, default=default)
        if raw is default and default is not _MISSING:
            return default
        if not isinstance(raw, str):
            raise ScenarioError(f"{self._label(key)}: expected a string, got {raw!r}")
        if choices is not None and raw not in choices:
            raise ScenarioError(
                f"{self._label(key)}: {raw!r} not one of {sorted(choices)}"
            )
        return raw

    def boolean(self, key: str, default=_MISSING) -> bool:
        raw = self.take(key, default=default)
        if raw is default and default is not _MISSING:
            return default
        if not isinstance(raw, bool):
            raise ScenarioError(f"{self._label(key)}: expected true/false, got {raw!r}")
        return raw

    def section(self, key: str, required: bool = True) -> "_Section | None":
        raw = self.take(key, default=None if not required else _MISSING)
        if raw is None and not required:
            return None
        return _Section(raw, self._label(key))

    def finish(self):
        unknown = set(self.mapping) - self.consumed
        if unknown:
            names = ", ".join(repr(self._label(k)) for k in sorted(map(str, unknown)))
            raise ScenarioError(f"unknown key(s): {names}")


@dataclass(frozen=True)
class AxisSpec:
    """One sweep axis: endpoint pair, spacing scale, and point count."""

    minimum: float
    maximum: float
    scale: str = "log"
    points: int = 25

    def __post_init__(self):
        if self.scale not in ("linear", "log"):
            raise ValueError(f"scale must be 'linear' or 'log', got {self.scale!r}")
        if self.points < 1:
            raise ValueError(f"points must be >= 1, got {self.points!r}")
        if self.points > 1 and not self.maximum > self.minimum:
            raise ValueError("maximum must exceed minimum for multi-point axes")
        if self.scale == "log" and not self.minimum > 0:
            raise ValueError("log-scaled axes require positive endpoints")

    def values(self) -> np.ndarray:
        if self.points == 1:
            return np.array([self.minimum])
        if self.scale == "log":
            return np.logspace(
                math.log10(self.minimum), math.log10(self.maximum), self.points
            )
        return np.linspace(self.minimum, self.maximum, self.points)


@dataclass(frozen=True)
class McValidationSpec:
    """Trial configuration plus the resource-ratio grid it sweeps."""

    config: TrialConfig
    r_grid: AxisSpec
    relative_to_critical: bool = True

    def r_values(self, critical_ratio: float) -> np.ndarray:
        values = self.r_grid.values()
        if self.relative_to_critical:
            return values * critical_ratio
        return values


@dataclass(frozen=True)
class Scenario:
    """A fully resolved operating point plus sweep and validation settings."""

    name: str
    gas: GasParams
    geometry: BeamGeometry
    levels: FourLevelParams
    readout: ReadoutModel
    stats: PhotonStatistics
    alpha_mode: str = "weak-probe"
    intensity_convention: str = "peak"
    sweeps: Mapping[str, AxisSpec] = field(default_factory=dict)
    omega_s_values: tuple[float, ...] = ()
    mandel_q_values: tuple[float, ...] = ()
    mc: McValidationSpec | None = None
    omega_p_explicit: bool = False

    def four_level_params(
        self, power_in: float | None = None, omega_s: float | None = None
    ) -> FourLevelParams:
        """Ladder parameters with the probe Rabi frequency re-derived.

        Unless the scenario pinned ``omega_p_rabi`` explicitly, the probe
        Rabi frequency follows the input power through the beam geometry;
        ``power_in`` evaluates a different power without mutating the
        scenario.  ``omega_s`` overrides the microwave Rabi frequency.
        """
        params = self.levels
        if not self.omega_p_explicit:
            geom = self.geometry
            if power_in is not None:
                geom = replace(geom, power_in=power_in)
            params = replace(
                params,
                omega_p_rabi=probe_rabi_from_power(
                    geom, params.mu12, self.intensity_convention
                ),
            )
        if omega_s is not None:
            params = replace(params, omega_s_rabi=omega_s)
        return params

    def with_geometry(self, **kwargs) -> "Scenario":
        geom = replace(self.geometry, **kwargs)
        updated = replace(self, geometry=geom)
        return replace(updated, levels=updated.four_level_params())

    def with_omega_s(self, omega_s: float) -> "Scenario":
        return replace(self, levels=replace(self.levels, omega_s_rabi=omega_s))

    def with_seed(self, seed: int) -> "Scenario":
        if self.mc is None:
            return self
        config = replace(self.mc.config, seed=seed)
        return replace(self, mc=replace(self.mc, config=config))

    def canonical_digest_payload(self) -> dict:
        """SI-normalised dict of everything that defines this scenario."""
        payload = {
            "name": self.name,
            "gas": vars(self.gas).copy(),
            "geometry": vars(self.geometry).copy(),
            "levels": {
                k: (dict(v) if isinstance(v, Mapping) else v)
                for k, v in vars(self.levels).items()
            },
            "readout": vars(self.readout).copy(),
            "stats": vars(self.stats).copy(),
            "alpha_mode": self.alpha_mode,
            "intensity_convention": self.intensity_convention,
            "sweeps": {k: vars(v).copy() for k, v in sorted(self.sweeps.items())},
            "omega_s_values": list(self.omega_s_values),
            "mandel_q_values": list(self.mandel_q_values),
            "omega_p_explicit": self.omega_p_explicit,
        }
        if self.mc is not None:
            mc = vars(self.mc.config).copy()
            mc["stats"] = vars(self.mc.config.stats).copy()
            payload["mc"] = {
                "config": mc,
                "r_grid": vars(self.mc.r_grid).copy(),
                "relative_to_critical": self.mc.relative_to_critical,
            }
        levels = payload["levels"]
        levels["dephasing"] = {
            f"{u}{l}": rate for (u, l), rate in sorted(levels["dephasing"].items())
        }
        return payload

    def canonical_digest(self) -> str:
        import hashlib

        text = json.dumps(
            self.canonical_digest_payload(), sort_keys=True, default=repr
        )
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


_SWEEP_AXES = {
    "resource_ratio": None,  # dimensionless
    "power_in": "power",
    "waist": "length",
}


def _parse_axis(section: _Section, kind: str | None) -> AxisSpec:
    if kind is None:
        minimum = section.number("min")
        maximum = section.number("max")
    else:
        minimum = section.quantity("min", kind)
        maximum = section.quantity("max", kind)
    scale = section.string("scale", default="log", choices=("linear", "log"))
    points = section.integer("points", default=25)
    section.finish()
    try:
        return AxisSpec(minimum=minimum, maximum=maximum, scale=scale, points=points)
    except ValueError as exc:
        raise ScenarioError(f"{section.path}: {exc}") from None


def _parse_dephasing(raw, path: str) -> dict[tuple[int, int], float]:
    if raw is None:
        return {}
    section = _Section(raw, path)
    out: dict[tuple[int, int], float] = {}
    for key in list(section.mapping):
        text = str(key)
        if len(text) != 2 or not text.isdigit():
            raise ScenarioError(
                f"{path}: coherence label {key!r} should be two digits like '32'"
            )
        pair = (int(text[0]), int(text[1]))
        if pair not in COHERENCES:
            raise ScenarioError(f"{path}: {key!r} is not a ladder coherence")
        out[pair] = section.quantity(key, "angular_frequency")
    section.finish()
    return out


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario file, normalising all quantities to SI."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from None
    try:
        raw = yaml.load(text, Loader=_StrictLoader)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: invalid YAML: {exc}") from None
    if raw is None:
        raise ScenarioError(f"{path}: scenario file is empty")
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")

    root = _Section(raw, "")
    name = root.string("name", default=path.stem)

    gas_sec = root.section("gas")
    gas = _build(
        GasParams,
        density_n=gas_sec.quantity("density", "density"),
        temperature_T=gas_sec.quantity("temperature", "temperature"),
        mass_m=gas_sec.quantity("mass", "mass"),
        path=gas_sec.path,
    )
    gas_sec.finish()

    geom_sec = root.section("geometry")
    geometry = _build(
        BeamGeometry,
        waist_w0=geom_sec.quantity("waist", "length"),
        cell_length_L=geom_sec.quantity("cell_length", "length"),
        lambda_p=geom_sec.quantity("probe_wavelength", "length"),
        power_in=geom_sec.quantity("power_in", "power"),
        saturation_power=geom_sec.quantity("saturation_power", "power", default=480e-6),
        path=geom_sec.path,
    )
    geom_sec.finish()

    lev = root.section("levels")
    coupling_wavelength = lev.quantity("coupling_wavelength", "length")
    counter = lev.boolean("counter_propagating", default=True)
    k_p = _TAU / geometry.lambda_p
    k_c = (-1.0 if counter else 1.0) * _TAU / coupling_wavelength
    omega_p_raw = lev.take("omega_p_rabi", default=None)
    dephasing = _parse_dephasing(
        lev.take("dephasing", default=None), lev._label("dephasing")
    )
    mu12 = lev.quantity("mu12", "dipole")
    intensity_convention = root.string(
        "intensity_convention", default="peak", choices=("peak", "mean")
    )
    if omega_p_raw is None:
        omega_p = probe_rabi_from_power(geometry, mu12, intensity_convention)
        omega_p_explicit = False
    else:
        omega_p = parse_quantity(
            omega_p_raw, "angular_frequency", key=lev._label("omega_p_rabi")
        )
        omega_p_explicit = True
    levels = _build(
        FourLevelParams,
        omega_p_rabi=omega_p,
        omega_c_rabi=lev.quantity("omega_c_rabi", "angular_frequency"),
        omega_s_rabi=lev.quantity("omega_s_rabi", "angular_frequency"),
        delta_p=lev.quantity("delta_p", "angular_frequency", default=0.0),
        delta_c=lev.quantity("delta_c", "angular_frequency", default=0.0),
        delta_s=lev.quantity("delta_s", "angular_frequency", default=0.0),
        gamma2=lev.quantity("gamma2", "angular_frequency"),
        gamma3=lev.quantity("gamma3", "angular_frequency"),
        gamma4=lev.quantity("gamma4", "angular_frequency"),
        k_p=k_p,
        k_c=k_c,
        mu12=mu12,
        mu_s=lev.quantity("mu_s", "dipole"),
        dephasing=dephasing,
        path=lev.path,
    )
    lev.finish()

    readout_sec = root.section("readout", required=False)
    if readout_sec is None:
        readout = ReadoutModel.optical_depth(optical_depth_prefactor(geometry))
    else:
        model = readout_sec.string("model", default="optical-depth",
                                   choices=("optical-depth",))
        readout_sec.finish()
        assert model == "optical-depth"
        readout = ReadoutModel.optical_depth(optical_depth_prefactor(geometry))

    stats_sec = root.section("photon_statistics", required=False)
    if stats_sec is None:
        stats = PhotonStatistics.from_mandel_q(0.0)
    else:
        q = stats_sec.number("mandel_q", default=0.0)
        stats_sec.finish()
        try:
            stats = PhotonStatistics.from_mandel_q(q)
        except ValueError as exc:
            raise ScenarioError(f"photon_statistics.mandel_q: {exc}") from None

    alpha_mode = root.string(
        "alpha_mode", default="weak-probe", choices=("weak-probe", "full")
    )

    sweeps: dict[str, AxisSpec] = {}
    sweep_sec = root.section("sweep", required=False)
    if sweep_sec is not None:
        for axis in list(sweep_sec.mapping):
            if axis not in _SWEEP_AXES:
                raise ScenarioError(
                    f"sweep.{axis}: unknown axis; expected one of {sorted(_SWEEP_AXES)}"
                )
            sweeps[axis] = _parse_axis(
                sweep_sec.section(axis), _SWEEP_AXES[axis]
            )
        sweep_sec.finish()

    omega_s_values = tuple(
        parse_quantity(v, "angular_frequency", key=f"omega_s_values[{i}]")
        for i, v in enumerate(root.take("omega_s_values", default=()) or ())
    )
    mandel_q_values = tuple(
        _parse_number(v, key=f"mandel_q_values[{i}]")
        for i, v in enumerate(root.take("mandel_q_values", default=()) or ())
    )

    mc_spec = None
    mc_sec = root.section("mc", required=False)
    if mc_sec is not None:
        n_at_mean = mc_sec.number("n_at_mean")
        config = _build(
            TrialConfig,
            seed=mc_sec.integer("seed"),
            trials=mc_sec.integer("trials"),
            n_at_mean=n_at_mean,
            n_ph_mean=mc_sec.number("n_ph_mean", default=n_at_mean),
            stats=stats,
            mode=mc_sec.string("mode", default="weak-probe",
                               choices=("weak-probe", "full")),
            photon_reference=mc_sec.string(
                "photon_reference", default="incident",
                choices=("incident", "transmitted"),
            ),
            path=mc_sec.path,
        )
        grid_sec = mc_sec.section("r_grid")
        relative = grid_sec.take("relative_to_critical", default=True)
        if not isinstance(relative, bool):
            raise ScenarioError("mc.r_grid.relative_to_critical: expected true/false")
        r_grid = _parse_axis(grid_sec, None)
        mc_sec.finish()
        mc_spec = McValidationSpec(
            config=config, r_grid=r_grid, relative_to_critical=relative
        )

    root.finish()
    return Scenario(
        name=name,
        gas=gas,
        geometry=geometry,
        levels=levels,
        readout=readout,
        stats=stats,
        alpha_mode=alpha_mode,
        intensity_convention=intensity_convention,
        sweeps=sweeps,
        omega_s_values=omega_s_values,
        mandel_q_values=mandel_q_values,
        mc=mc_spec,
        omega_p_explicit=omega_p_explicit,
    )


def _build(cls, path: str, **kwargs):
    """Construct a domain type, rewording validation errors as config errors."""
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ScenarioError(f"{path or cls.__name__}: {exc}") from None


def bundled_scenario_path(name: str) -> Path:
    """Filesystem path of a scenario shipped with the package."""
    candidate = resources.files("vapornoise") / "scenarios" / f"{name}.yaml"
    with resources.as_file(candidate) as concrete:
        if not concrete.exists():
            raise ScenarioError(f"no bundled scenario named {name!r}")
        return Path(concrete)
