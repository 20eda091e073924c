"""Noise budget, unified scaling law, and slope-detection sensitivity.

Combines the granularity noise of finitely many atoms with the optical
measurement noise of the photon counter.  Both enter the readout variance as
independent terms,

    Var(S) = G^2 V_q / N_at + nu^2 (1+Q) / N_ph,

so the relative noise depends only on the photon-to-atom resource ratio and
the dimensionless fluctuation parameter J = G^2 V_q / nu^2:

    sigma_S / sigma_shot = sqrt((1+Q) + R*J).

For coherent light (Q = 0) this is sqrt(1 + R*J) with the crossover at
R_c = 1/J.  For ideal sub-Poissonian light (Q = -1) the photon term vanishes
and the quantum-advantage boundary sits where R*J(R) = 1.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable, Sequence

from scipy.constants import c, h, hbar

from .ensemble import (
    alpha_moments,
    fluctuation_parameter,
    intrinsic_variance,
    mean_alpha_i,
)
from .errors import BracketingError, FlatSlopeError
from .geometry import atom_flux, optical_depth_prefactor, photon_flux
from scipy.constants import epsilon_0

if TYPE_CHECKING:  # pragma: no cover - annotation only
    from .scenario import Scenario

__all__ = [
    "PhotonStatistics",
    "ReadoutModel",
    "NoiseBudget",
    "noise_budget",
    "signal_variance",
    "scaling_ratio",
    "GeneralizedScalingRatio",
    "generalized_scaling_ratio",
    "critical_threshold",
    "quantum_advantage_boundary",
    "SlopeEstimate",
    "signal_slope",
    "mean_signal",
    "SensitivityResult",
    "sensitivity",
    "MapPoint",
    "sensitivity_map",
    "j_of_r",
]

SAMPLERS = ("poisson", "binomial", "negative-binomial", "deterministic")


@dataclass(frozen=True)
class PhotonStatistics:
    """Mandel parameter of the probe light and the matching count sampler.

    Var(xi) = N_ph * (1 + Q): Q = 0 is coherent (Poisson) light, -1 < Q < 0
    sub-Poissonian (binomial sampler), Q = -1 an ideal number state
    (deterministic counts), Q > 0 super-Poissonian (negative binomial).
    """

    mandel_q: float
    sampler: str

    def __post_init__(self):
        if not self.mandel_q >= -1.0:
            raise ValueError(f"mandel_q must be >= -1, got {self.mandel_q!r}")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"unknown sampler {self.sampler!r}")
        expected = self._sampler_for(self.mandel_q)
        if self.sampler != expected:
            raise ValueError(
                f"sampler {self.sampler!r} inconsistent with mandel_q="
                f"{self.mandel_q!r}; expected {expected!r}"
            )

    @staticmethod
    def _sampler_for(q: float) -> str:
        if q == 0.0:
            return "poisson"
        if q == -1.0:
            return "deterministic"
        if q < 0.0:
            return "binomial"
        return "negative-binomial"

    @classmethod
    def from_mandel_q(cls, q: float) -> "PhotonStatistics":
        return cls(mandel_q=q, sampler=cls._sampler_for(q))


COHERENT = PhotonStatistics.from_mandel_q(0.0)


@dataclass(frozen=True)
class ReadoutModel:
    """Linearized transduction coefficients of the readout function.

    ``susceptibility_transduction`` is df/d(chi_q) at the operating point and
    ``photon_transduction`` df/d(xi/N_ph); for optical-depth readout these
    are the depth prefactor and -1 respectively.
    """

    susceptibility_transduction: float
    photon_transduction: float
    quadrature: str = "I"

    def __post_init__(self):
        if self.photon_transduction == 0.0:
            raise ValueError("photon_transduction must be nonzero")
        if self.quadrature not in ("R", "I"):
            raise ValueError(f"quadrature must be 'R' or 'I', got {self.quadrature!r}")

    @classmethod
    def optical_depth(cls, depth_prefactor: float) -> "ReadoutModel":
        return cls(
            susceptibility_transduction=depth_prefactor,
            photon_transduction=-1.0,
            quadrature="I",
        )


@dataclass(frozen=True)
class NoiseBudget:
    """Decomposed readout noise at one operating point (all dimensionless)."""

    sigma_agn: float
    sigma_omn: float
    sigma_total: float
    ratio_to_shot_limit: float
    resource_ratio: float
    fluctuation_parameter: float
    fluctuation_parameter_q: float


def signal_variance(
    transduction: float,
    var_q: float,
    n_at: float,
    photon_transduction: float,
    n_ph: float,
) -> float:
    """Total readout variance G^2 V_q / N_at + nu^2 / N_ph for coherent light."""
    if not n_at > 0:
        raise ValueError(f"n_at must be > 0, got {n_at!r}")
    if not n_ph > 0:
        raise ValueError(f"n_ph must be > 0, got {n_ph!r}")
    return transduction**2 * var_q / n_at + photon_transduction**2 / n_ph


def noise_budget(
    readout: ReadoutModel,
    var_q: float,
    n_at: float,
    n_ph: float,
    stats: PhotonStatistics = COHERENT,
) -> NoiseBudget:
    """Assemble the full noise decomposition for the given resources."""
    if not n_at > 0 or not n_ph > 0:
        raise ValueError("n_at and n_ph must be > 0")
    g = readout.susceptibility_transduction
    nu = readout.photon_transduction
    q = stats.mandel_q
    var_agn = g**2 * var_q / n_at
    var_omn = nu**2 * (1.0 + q) / n_ph
    sigma_total = math.sqrt(var_agn + var_omn)
    shot = math.sqrt(nu**2 / n_ph)
    j = g**2 * var_q / nu**2
    return NoiseBudget(
        sigma_agn=math.sqrt(var_agn),
        sigma_omn=math.sqrt(var_omn),
        sigma_total=sigma_total,
        ratio_to_shot_limit=sigma_total / shot,
        resource_ratio=n_ph / n_at,
        fluctuation_parameter=j,
        fluctuation_parameter_q=j / (1.0 + q) if q > -1.0 else math.inf,
    )


def scaling_ratio(resource_ratio: float, fluct_param: float) -> float:
    """Relative noise sqrt(1 + R*J) over the shot-noise limit (coherent light)."""
    if resource_ratio < 0 or fluct_param < 0:
        raise ValueError("resource_ratio and fluct_param must be >= 0")
    return math.sqrt(1.0 + resource_ratio * fluct_param)


@dataclass(frozen=True)
class GeneralizedScalingRatio:
    """Relative noise against both normalisations for non-classical light.

    ``vs_quantum_limit`` compares against the Q-reduced optical noise and is
    undefined (None) for Q = -1 where that limit vanishes;
    ``vs_shot_limit`` compares against the coherent shot-noise limit.
    """

    vs_quantum_limit: float | None
    vs_shot_limit: float


def generalized_scaling_ratio(
    resource_ratio: float, fluct_param: float, stats: PhotonStatistics
) -> GeneralizedScalingRatio:
    """Noise scaling for probe light with Mandel parameter Q.

    vs the quantum limit: sqrt(1 + R*J/(1+Q)) for Q > -1;
    vs the shot limit:    sqrt((1+Q) + R*J) for all Q >= -1.
    """
    if resource_ratio < 0 or fluct_param < 0:
        raise ValueError("resource_ratio and fluct_param must be >= 0")
    q = stats.mandel_q
    vs_shot = math.sqrt((1.0 + q) + resource_ratio * fluct_param)
    if q > -1.0:
        vs_quantum = math.sqrt(1.0 + resource_ratio * fluct_param / (1.0 + q))
    else:
        vs_quantum = None
    return GeneralizedScalingRatio(vs_quantum_limit=vs_quantum, vs_shot_limit=vs_shot)


def critical_threshold(fluct_param: float) -> float:
    """Crossover resource ratio R_c = 1/J; infinite when granularity is absent."""
    if fluct_param < 0:
        raise ValueError(f"fluct_param must be >= 0, got {fluct_param!r}")
    if fluct_param == 0.0:
        return math.inf
    return 1.0 / fluct_param


def quantum_advantage_boundary(
    j_of_r_fn: Callable[[float], float],
    bracket: tuple[float, float],
    rtol: float = 1e-10,
    max_iter: int = 400,
) -> float:
    """Root of R*J(R) = 1 by bisection; above it even Fock light loses.

    ``j_of_r_fn`` must be continuous and positive on the bracket; raises
    :class:`BracketingError` when the residual does not change sign across it.
    """
    lo, hi = bracket
    if not (0 < lo < hi):
        raise ValueError(f"bracket must satisfy 0 < lo < hi, got {bracket!r}")

    def residual(r: float) -> float:
        return r * j_of_r_fn(r) - 1.0

    f_lo = residual(lo)
    f_hi = residual(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if math.copysign(1.0, f_lo) == math.copysign(1.0, f_hi):
        raise BracketingError(lo, hi, f_lo, f_hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if (hi - lo) <= rtol * mid:
            return mid
        f_mid = residual(mid)
        if f_mid == 0.0:
            return mid
        if math.copysign(1.0, f_mid) == math.copysign(1.0, f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Scenario-level operating-point evaluation
# ---------------------------------------------------------------------------


def mean_signal(
    scenario: "Scenario",
    omega_s: float | None = None,
    power_in: float | None = None,
    rtol: float = 1e-6,
) -> float:
    """Mean optical depth a * <chi_I> at the (possibly adjusted) operating point."""
    params = scenario.four_level_params(power_in=power_in, omega_s=omega_s)
    prefactor = optical_depth_prefactor(scenario.geometry)
    chi_i = scenario.gas.density_n / epsilon_0 * mean_alpha_i(
        params, scenario.gas, scenario.alpha_mode, rtol=rtol
    )
    return prefactor * chi_i


@dataclass(frozen=True)
class SlopeEstimate:
    """Richardson-extrapolated derivative of the mean signal along omega_s."""

    value: float
    error_estimate: float
    step: float
    noise_floor: float


def signal_slope(
    scenario: "Scenario",
    d_omega_s: float | None = None,
    rtol: float = 1e-6,
) -> SlopeEstimate:
    """d(mean signal)/d(omega_s) by central differences at two step sizes.

    Combines steps h and h/2 by Richardson extrapolation and reports the
    extrapolation error.  Raises :class:`FlatSlopeError` when the slope is
    smaller than the quadrature-noise floor rtol*|S0|/h, i.e. the operating
    point cannot be used for slope detection.

    The response depends on the drive magnitude only, so evaluation points
    below zero fold back to |omega_s - h|.
    """
    omega0 = scenario.levels.omega_s_rabi
    h = d_omega_s if d_omega_s is not None else max(1e-4 * omega0, 2.0 * math.pi * 1e3)
    if not h > 0:
        raise ValueError(f"step must be > 0, got {h!r}")

    def s0(omega: float) -> float:
        return mean_signal(scenario, omega_s=abs(omega), rtol=rtol)

    values = {}
    for offset in (h, -h, 0.5 * h, -0.5 * h):
        values[offset] = s0(omega0 + offset)
    d_h = (values[h] - values[-h]) / (2.0 * h)
    d_half = (values[0.5 * h] - values[-0.5 * h]) / h
    slope = (4.0 * d_half - d_h) / 3.0
    err = abs(d_half - d_h) / 3.0
    scale = max(abs(v) for v in values.values())
    floor = rtol * scale / h
    if abs(slope) <= floor:
        raise FlatSlopeError(
            f"slope {slope:.3e} below quadrature noise floor {floor:.3e} "
            f"at omega_s={omega0:.6g} rad/s"
        )
    return SlopeEstimate(value=slope, error_estimate=err, step=h, noise_floor=floor)


@dataclass(frozen=True)
class SensitivityResult:
    """Field sensitivity of slope detection at one operating point.

    ``e_s`` and ``e_s_shot_limit`` are in V/(m*sqrt(Hz)); their ratio equals
    sqrt(1 + R*J), which the constructor path verifies against the directly
    propagated noise to 1e-10 relative.
    """

    e_s: float
    e_s_shot_limit: float
    slope: SlopeEstimate
    resource_ratio: float
    fluctuation_parameter: float
    intrinsic_var: float
    sigma_ratio: float
    n_ph: float
    n_at: float


def sensitivity(
    scenario: "Scenario",
    dt: float = 1.0,
    rtol: float = 1e-6,
) -> SensitivityResult:
    """Microwave-field sensitivity via slope detection, per unit bandwidth.

    Counts are taken in flux mode, N = flux * dt, and the result carries a
    sqrt(dt) factor from averaging independent intervals, so it does not
    depend on dt; the readout noise assumes coherent probe light.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    gas = scenario.gas
    geom = scenario.geometry
    params = scenario.four_level_params()
    moments = alpha_moments(params, gas, scenario.alpha_mode, rtol=rtol)
    var_i = intrinsic_variance(gas, moments.var_alpha_i)
    prefactor = optical_depth_prefactor(geom)
    fluct = fluctuation_parameter(prefactor, var_i)

    phi_ph = photon_flux(geom)
    phi_at = atom_flux(gas, geom)
    if phi_ph <= 0:
        raise ValueError("photon flux is zero; sensitivity undefined without light")
    n_ph = phi_ph * dt
    n_at = phi_at * dt
    sigma_s = math.sqrt(signal_variance(prefactor, var_i, n_at, -1.0, n_ph))

    slope = signal_slope(scenario, rtol=rtol)
    mu_s = params.mu_s
    e_s = (hbar / mu_s) * (sigma_s / abs(slope.value)) * math.sqrt(dt)
    shot_sigma = 1.0 / math.sqrt(n_ph)
    e_s_shot = (hbar / mu_s) * (shot_sigma / abs(slope.value)) * math.sqrt(dt)

    resource = phi_ph / phi_at
    cross_check = e_s_shot * math.sqrt(1.0 + resource * fluct)
    if abs(e_s - cross_check) > 1e-10 * e_s:
        raise RuntimeError(
            f"sensitivity identity violated: direct={e_s!r}, scaled={cross_check!r}"
        )
    return SensitivityResult(
        e_s=e_s,
        e_s_shot_limit=e_s_shot,
        slope=slope,
        resource_ratio=resource,
        fluctuation_parameter=fluct,
        intrinsic_var=var_i,
        sigma_ratio=sigma_s / shot_sigma,
        n_ph=n_ph,
        n_at=n_at,
    )


@dataclass(frozen=True)
class MapPoint:
    """One grid point of a sensitivity map; failed points carry the reason."""

    power_in: float
    waist: float
    result: SensitivityResult | None
    error: str | None = None


def sensitivity_map(
    scenario: "Scenario",
    power_values: Sequence[float],
    waist_values: Sequence[float],
    threads: int = 1,
    rtol: float = 1e-6,
) -> list[MapPoint]:
    """Sensitivity over a power x waist grid, row-major in power.

    Flat-slope failures are recorded as missing points rather than filled
    in; any other failure propagates.  Grid points are independent, so they
    may evaluate concurrently; assembly order is by grid index either way.
    """
    grid = [(p, w) for p in power_values for w in waist_values]
    if not grid:
        raise ValueError("empty sensitivity grid")

    def evaluate(point: tuple[float, float]) -> MapPoint:
        p_in, w0 = point
        sub = scenario.with_geometry(power_in=p_in, waist_w0=w0)
        try:
            return MapPoint(p_in, w0, sensitivity(sub, rtol=rtol))
        except FlatSlopeError as exc:
            return MapPoint(p_in, w0, None, error=str(exc))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(evaluate, grid))
    else:
        points = [evaluate(g) for g in grid]
    if all(pt.result is None for pt in points):
        raise FlatSlopeError("every grid point failed slope detection")
    return points


def j_of_r(scenario: "Scenario", rtol: float = 1e-6) -> Callable[[float], float]:
    """Fluctuation parameter as a function of the resource ratio.

    Fixes gas and geometry, maps R to the input power that produces it at
    the configured atom flux, rebuilds the probe Rabi frequency, and
    re-evaluates the velocity moments.  In weak-probe mode the result is
    R-independent by construction.  The returned callable is a pure,
    memoised function of R.
    """
    gas = scenario.gas
    geom = scenario.geometry
    phi_at = atom_flux(gas, geom)
    prefactor = optical_depth_prefactor(geom)
    photon_energy = h * c / geom.lambda_p
    mode = scenario.alpha_mode
    cache: dict[float, float] = {}

    def fluct_at(r: float) -> float:
        if r < 0:
            raise ValueError(f"resource ratio must be >= 0, got {r!r}")
        try:
            return cache[r]
        except KeyError:
            pass
        power = r * phi_at * photon_energy
        params = scenario.four_level_params(power_in=power)
        moments = alpha_moments(params, gas, mode, rtol=rtol)
        value = fluctuation_parameter(
            prefactor, intrinsic_variance(gas, moments.var_alpha_i)
        )
        cache[r] = value
        return value

    return fluct_at
