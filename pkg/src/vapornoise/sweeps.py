"""Figure-oriented sweep orchestration producing CSV-ready rows.

Each runner returns (fieldnames, rows) so the CLI can serialise them as CSV
or JSONL.  Grid evaluations are pure; when threaded, results are assembled
by grid index so output bytes never depend on the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING

from scipy.constants import c, h

from .ensemble import alpha_moments, fluctuation_parameter, intrinsic_variance
from .errors import BracketingError, ScenarioError
from .geometry import (
    atom_flux,
    mean_atom_number,
    optical_depth_prefactor,
    photon_flux,
    resource_accounting,
    saturation_fraction,
)
from .montecarlo import ScalingReport, validate_scaling
from .noise import (
    PhotonStatistics,
    critical_threshold,
    generalized_scaling_ratio,
    j_of_r,
    quantum_advantage_boundary,
    scaling_ratio,
    sensitivity_map,
)

if TYPE_CHECKING:  # pragma: no cover
    from .scenario import Scenario

__all__ = [
    "SweepResult",
    "run_fluxes",
    "run_scaling_sweep",
    "run_sensitivity_map",
    "run_quantum_sweep",
    "run_mc_validation",
]


@dataclass
class SweepResult:
    fieldnames: list[str]
    rows: list[dict]


def _require_axis(scenario: "Scenario", axis: str):
    try:
        return scenario.sweeps[axis]
    except KeyError:
        raise ScenarioError(
            f"scenario {scenario.name!r} has no sweep axis {axis!r}"
        ) from None


def run_fluxes(scenario: "Scenario") -> SweepResult:
    """Resource bookkeeping of the operating point as a single row."""
    acct = resource_accounting(scenario.gas, scenario.geometry)
    row = {
        "v_bm": acct.v_bm,
        "n_at_mean": acct.n_at_mean,
        "phi_at": acct.phi_at,
        "phi_ph": acct.phi_ph,
        "R": acct.resource_ratio,
        "a_prefactor": acct.a_prefactor,
        "p_over_saturation": saturation_fraction(scenario.geometry),
        "weak_probe_flag": saturation_fraction(scenario.geometry) < 1.0,
    }
    return SweepResult(list(row.keys()), [row])


def _fluct_of_r(scenario: "Scenario"):
    """J as a function of R: constant in weak-probe mode, re-solved in full."""
    if scenario.alpha_mode == "weak-probe":
        moments = alpha_moments(scenario.levels, scenario.gas, "weak-probe")
        value = fluctuation_parameter(
            optical_depth_prefactor(scenario.geometry),
            intrinsic_variance(scenario.gas, moments.var_alpha_i),
        )
        return lambda r: value
    return j_of_r(scenario)


def run_scaling_sweep(scenario: "Scenario", threads: int = 1) -> SweepResult:
    """Relative noise vs resource ratio, one curve block per microwave Rabi.

    Counts follow flux mode over a one-second interval; the ratio itself is
    interval-free.  ``P_in_equivalent`` is the input power that would
    realise each R at the scenario's atom flux, and ``weak_probe_flag``
    marks points below the configured saturation power.
    """
    axis = _require_axis(scenario, "resource_ratio")
    r_values = axis.values()
    omega_values = scenario.omega_s_values or (scenario.levels.omega_s_rabi,)
    n_at = atom_flux(scenario.gas, scenario.geometry) * 1.0
    photon_energy = h * c / scenario.geometry.lambda_p
    phi_at = atom_flux(scenario.gas, scenario.geometry)

    fieldnames = [
        "omega_s",
        "R",
        "sigma_ratio",
        "sigma_agn",
        "sigma_psn",
        "J_at_point",
        "P_in_equivalent",
        "weak_probe_flag",
    ]
    rows: list[dict] = []
    for omega_s in omega_values:
        sub = scenario.with_omega_s(omega_s)
        fluct_fn = _fluct_of_r(sub)

        def point(r: float) -> dict:
            fluct = fluct_fn(r)
            power_eq = r * phi_at * photon_energy
            return {
                "omega_s": omega_s,
                "R": r,
                "sigma_ratio": scaling_ratio(r, fluct),
                "sigma_agn": math.sqrt(fluct / n_at),
                "sigma_psn": 1.0 / math.sqrt(r * n_at) if r > 0 else float("nan"),
                "J_at_point": fluct,
                "P_in_equivalent": power_eq,
                "weak_probe_flag": power_eq < scenario.geometry.saturation_power,
            }

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows.extend(pool.map(point, r_values))
        else:
            rows.extend(point(r) for r in r_values)
    return SweepResult(fieldnames, rows)


_MAP_FIELDS = ["P_in", "w0", "E_s", "log10_E_s", "E_s_shot_limit", "R", "J"]


def _map_rows(scenario: "Scenario", points) -> list[dict]:
    rows = []
    for pt in points:
        sub = scenario.with_geometry(power_in=pt.power_in, waist_w0=pt.waist)
        ratio = photon_flux(sub.geometry) / atom_flux(sub.gas, sub.geometry)
        if pt.result is None:
            rows.append(
                {
                    "P_in": pt.power_in,
                    "w0": pt.waist,
                    "E_s": None,
                    "log10_E_s": None,
                    "E_s_shot_limit": None,
                    "R": ratio,
                    "J": None,
                }
            )
        else:
            rows.append(
                {
                    "P_in": pt.power_in,
                    "w0": pt.waist,
                    "E_s": pt.result.e_s,
                    "log10_E_s": math.log10(pt.result.e_s),
                    "E_s_shot_limit": pt.result.e_s_shot_limit,
                    "R": pt.result.resource_ratio,
                    "J": pt.result.fluctuation_parameter,
                }
            )
    return rows


def run_sensitivity_map(
    scenario: "Scenario", threads: int = 1
) -> tuple[SweepResult, SweepResult]:
    """Sensitivity over the power x waist grid plus a fixed-waist extract.

    The extract re-evaluates the power axis at the scenario's own beam
    waist, mirroring the one-dimensional cut conventionally shown as an
    inset next to such maps.
    """
    p_axis = _require_axis(scenario, "power_in")
    w_axis = _require_axis(scenario, "waist")
    grid_points = sensitivity_map(
        scenario, p_axis.values(), w_axis.values(), threads=threads
    )
    inset_points = sensitivity_map(
        scenario, p_axis.values(), [scenario.geometry.waist_w0], threads=threads
    )
    return (
        SweepResult(_MAP_FIELDS, _map_rows(scenario, grid_points)),
        SweepResult(_MAP_FIELDS, _map_rows(scenario, inset_points)),
    )


def run_quantum_sweep(scenario: "Scenario", threads: int = 1) -> SweepResult:
    """Relative-noise curves for each photon statistic, with the boundary.

    Every row carries the quantum-advantage boundary R_crit (root of
    R*J(R) = 1); the Q = -1 curve crosses unity against the shot limit
    there.  The ratio against the vanishing Q = -1 quantum limit is not
    defined and is left empty.
    """
    axis = _require_axis(scenario, "resource_ratio")
    r_values = axis.values()
    q_values = scenario.mandel_q_values or (0.0, -0.5, -0.9, -1.0)
    fluct_fn = _fluct_of_r(scenario)

    bracket = (float(r_values[0]), float(r_values[-1]))
    try:
        r_crit = quantum_advantage_boundary(fluct_fn, bracket)
    except BracketingError:
        widened = (bracket[0] / 1e3, bracket[1] * 1e3)
        r_crit = quantum_advantage_boundary(fluct_fn, widened)

    fieldnames = [
        "mandel_q",
        "R",
        "sigma_ratio_vs_shot",
        "sigma_ratio_vs_quantum",
        "J_at_point",
        "R_crit",
    ]

    def point(q: float, r: float) -> dict:
        stats = PhotonStatistics.from_mandel_q(q)
        fluct = fluct_fn(r)
        ratio = generalized_scaling_ratio(r, fluct, stats)
        return {
            "mandel_q": q,
            "R": r,
            "sigma_ratio_vs_shot": ratio.vs_shot_limit,
            "sigma_ratio_vs_quantum": ratio.vs_quantum_limit,
            "J_at_point": fluct,
            "R_crit": r_crit,
        }

    rows: list[dict] = []
    for q in q_values:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows.extend(pool.map(lambda r: point(q, r), r_values))
        else:
            rows.extend(point(q, r) for r in r_values)
    return SweepResult(fieldnames, rows)


def run_mc_validation(
    scenario: "Scenario",
    threads: int = 1,
    fluctuation_scale: float = 1.0,
) -> tuple[ScalingReport, SweepResult]:
    """Monte Carlo sweep of the scaling law as configured by the scenario.

    ``fluctuation_scale`` corrupts the analytic fluctuation parameter inside
    the comparison (not the grid placement) and exists so failure handling
    can be exercised end to end.
    """
    if scenario.mc is None:
        raise ScenarioError(
            f"scenario {scenario.name!r} has no mc section; nothing to validate"
        )
    depth_prefactor = optical_depth_prefactor(scenario.geometry)
    moments = alpha_moments(
        scenario.levels, scenario.gas, scenario.mc.config.mode
    )
    fluct = fluctuation_parameter(
        depth_prefactor, intrinsic_variance(scenario.gas, moments.var_alpha_i)
    )
    r_values = scenario.mc.r_values(critical_threshold(fluct))
    report = validate_scaling(
        scenario.levels,
        scenario.gas,
        depth_prefactor,
        scenario.mc.config,
        r_values,
        threads=threads,
        fluctuation_scale=fluctuation_scale,
    )
    fieldnames = [
        "R_target",
        "R_achieved",
        "n_ph_mean",
        "n_at_mean",
        "trials",
        "ratio_empirical",
        "ratio_analytic",
        "rel_deviation",
        "ci_low",
        "ci_high",
        "ci_contains_analytic",
        "passed",
    ]
    rows = [
        {
            "R_target": pt.r_target,
            "R_achieved": pt.r_achieved,
            "n_ph_mean": pt.n_ph_mean,
            "n_at_mean": pt.n_at_mean,
            "trials": pt.trials,
            "ratio_empirical": pt.ratio_empirical,
            "ratio_analytic": pt.ratio_analytic,
            "rel_deviation": pt.rel_deviation,
            "ci_low": pt.ci_low,
            "ci_high": pt.ci_high,
            "ci_contains_analytic": pt.ci_contains_analytic,
            "passed": pt.passed,
        }
        for pt in report.points
    ]
    return report, SweepResult(fieldnames, rows)
