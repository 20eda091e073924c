"""Velocity-ensemble moments of the single-atom polarizability.

The thermal gas enters through the 1D Maxwell-Boltzmann distribution of the
axial velocity (only that component Doppler-shifts the optical detunings).
The first two moments of alpha over that distribution give the mean
susceptibility and the intrinsic variance that drives atomic granularity
noise.

Integration strategy: Gauss-Hermite quadrature with the change of variable
v = sqrt(2)*sigma_v*x, doubling the order until two successive orders agree.
Room-temperature alkali cells put absorption features a few m/s wide inside
a >100 m/s thermal distribution; no affordable Gauss-Hermite order resolves
that, so when the doubling loop fails to stabilise the average falls back to
adaptive Gauss-Kronrod panels seeded with the known feature velocities.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import epsilon_0, k as k_B
from scipy.integrate import quad
from scipy.special import roots_hermite

from .errors import QuadratureConvergenceError
from .spectroscopy import (
    FourLevelParams,
    Polarizability,
    alpha_evaluator,
    feature_velocities,
)

__all__ = [
    "GasParams",
    "VelocityDistribution",
    "AlphaMoments",
    "velocity_distribution",
    "alpha_moments",
    "intrinsic_variance",
    "fluctuation_parameter",
]

log = logging.getLogger(__name__)

_SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class GasParams:
    """Atomic number density (m^-3), temperature (K) and atomic mass (kg)."""

    density_n: float
    temperature_T: float
    mass_m: float

    def __post_init__(self):
        for name in ("density_n", "temperature_T", "mass_m"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class VelocityDistribution:
    """1D velocity spread sigma_v and 3D mean speed v_bar, both in m/s."""

    sigma_v: float
    v_bar: float

    def __post_init__(self):
        expected = self.sigma_v * math.sqrt(8.0 / math.pi)
        if abs(self.v_bar - expected) > 1e-12 * expected:
            raise ValueError(
                f"inconsistent speeds: v_bar={self.v_bar!r} but "
                f"sigma_v*sqrt(8/pi)={expected!r}"
            )


@dataclass(frozen=True)
class AlphaMoments:
    """Mean polarizability and quadrature variances over the velocity spread.

    ``quadrature_order`` is the Gauss-Hermite order at which the doubling
    loop stabilised; it is 0 when the adaptive fallback produced the result
    (``method`` then reads ``"adaptive"``).  ``neval`` counts integrand
    evaluations either way.
    """

    mean_alpha: Polarizability
    var_alpha_r: float
    var_alpha_i: float
    quadrature_order: int
    method: str = "gauss-hermite"
    neval: int = 0

    def __post_init__(self):
        if self.var_alpha_r < 0 or self.var_alpha_i < 0:
            raise ValueError("variances must be non-negative")


def velocity_distribution(gas: GasParams) -> VelocityDistribution:
    """Thermal velocity scales of the gas: sigma_v = sqrt(kT/m), v_bar = sqrt(8kT/pi m)."""
    sigma_v = math.sqrt(k_B * gas.temperature_T / gas.mass_m)
    v_bar = math.sqrt(8.0 * k_B * gas.temperature_T / (math.pi * gas.mass_m))
    return VelocityDistribution(sigma_v=sigma_v, v_bar=v_bar)


@dataclass(frozen=True)
class _RawMoments:
    mean: complex
    m2_r: float
    m2_i: float


def _gh_moments(alpha_fn, sigma_v: float, order: int) -> _RawMoments:
    x, w = roots_hermite(order)
    v = math.sqrt(2.0) * sigma_v * x
    f = alpha_fn(v)
    w = w / _SQRT_PI
    mean = complex(np.dot(w, f))
    m2_r = float(np.dot(w, f.real**2))
    m2_i = float(np.dot(w, f.imag**2))
    return _RawMoments(mean, m2_r, m2_i)


def _close(a: float, b: float, rtol: float, floor: float) -> bool:
    return abs(a - b) <= rtol * max(abs(b), floor)


def _converged(prev: _RawMoments, cur: _RawMoments, rtol: float) -> bool:
    scale = max(abs(cur.mean), math.sqrt(cur.m2_r + cur.m2_i), 1e-300)
    if abs(prev.mean - cur.mean) > rtol * scale:
        return False
    var_floor_r = rtol * cur.m2_r
    var_floor_i = rtol * cur.m2_i
    prev_var_r = prev.m2_r - abs(prev.mean.real) ** 2
    cur_var_r = cur.m2_r - abs(cur.mean.real) ** 2
    prev_var_i = prev.m2_i - abs(prev.mean.imag) ** 2
    cur_var_i = cur.m2_i - abs(cur.mean.imag) ** 2
    return _close(prev_var_r, cur_var_r, rtol, var_floor_r) and _close(
        prev_var_i, cur_var_i, rtol, var_floor_i
    )


def _adaptive_moments(
    alpha_fn,
    sigma_v: float,
    hints: list[float],
    rtol: float,
) -> tuple[_RawMoments, int]:
    """Gauss-Kronrod moments of alpha against the Gaussian velocity pdf."""
    cut = 9.0 * sigma_v
    points = sorted({h for h in hints if -cut < h < cut})
    norm = 1.0 / (math.sqrt(2.0 * math.pi) * sigma_v)
    nevals = 0

    cache: dict[float, complex] = {}

    def alpha_at(v: float) -> complex:
        try:
            return cache[v]
        except KeyError:
            val = complex(alpha_fn(np.array([v]))[0])
            cache[v] = val
            return val

    def pdf(v: float) -> float:
        return norm * math.exp(-0.5 * (v / sigma_v) ** 2)

    def integrate(f, epsabs: float) -> tuple[float, float]:
        nonlocal nevals
        result, abserr, info = quad(
            f,
            -cut,
            cut,
            points=points or None,
            limit=4000,
            epsabs=epsabs,
            epsrel=0.1 * rtol,
            full_output=True,
        )
        nevals += int(info["neval"])
        return result, abserr

    # Coarse magnitude integrals set the absolute floor for the means, which
    # may vanish by symmetry while |alpha| does not.
    scale_r, _ = integrate(lambda v: abs(alpha_at(v).real) * pdf(v), 0.0)
    scale_i, _ = integrate(lambda v: abs(alpha_at(v).imag) * pdf(v), 0.0)
    scale = max(scale_r, scale_i, 1e-300)

    mean_r, err_mr = integrate(lambda v: alpha_at(v).real * pdf(v), 0.1 * rtol * scale)
    mean_i, err_mi = integrate(lambda v: alpha_at(v).imag * pdf(v), 0.1 * rtol * scale)
    m2_r, err_2r = integrate(lambda v: alpha_at(v).real ** 2 * pdf(v), 0.0)
    m2_i, err_2i = integrate(lambda v: alpha_at(v).imag ** 2 * pdf(v), 0.0)

    checks = (
        (err_mr, rtol * scale),
        (err_mi, rtol * scale),
        (err_2r, rtol * max(m2_r, scale**2)),
        (err_2i, rtol * max(m2_i, scale**2)),
    )
    if any(err > bound for err, bound in checks):
        raise QuadratureConvergenceError(
            "adaptive velocity average did not reach the requested tolerance: "
            + ", ".join(f"err={err:.3e} bound={bound:.3e}" for err, bound in checks)
        )
    return _RawMoments(complex(mean_r, mean_i), m2_r, m2_i), nevals


def _finalize_variance(m2: float, mean_sq: float, rtol: float, label: str) -> float:
    var = m2 - mean_sq
    if var < 0.0:
        if var < -rtol * max(m2, 1e-300):
            raise QuadratureConvergenceError(
                f"negative {label} variance beyond tolerance: var={var:.3e}, m2={m2:.3e}"
            )
        log.info("clamping tiny negative %s variance %.3e to zero", label, var)
        var = 0.0
    return var


def alpha_moments(
    params: FourLevelParams,
    gas: GasParams,
    mode: str = "weak-probe",
    *,
    rtol: float = 1e-6,
    min_order: int = 16,
    max_order: int = 512,
    method: str = "auto",
) -> AlphaMoments:
    """First and second moments of alpha over the thermal velocity spread.

    ``method`` is ``"auto"`` (Gauss-Hermite doubling, adaptive fallback),
    ``"gauss-hermite"`` (doubling only; raises on non-convergence) or
    ``"adaptive"``.  Raises :class:`QuadratureConvergenceError` when the
    selected strategy cannot stabilise both moments to ``rtol``.
    """
    if min_order < 8:
        raise ValueError(f"quadrature order must be >= 8, got {min_order}")
    if method not in ("auto", "gauss-hermite", "adaptive"):
        raise ValueError(f"unknown integration method {method!r}")
    dist = velocity_distribution(gas)
    alpha_fn = alpha_evaluator(params, mode)

    raw = None
    order_used = 0
    neval = 0
    used_method = "gauss-hermite"
    if method in ("auto", "gauss-hermite"):
        prev = None
        order = min_order
        while order <= max_order:
            cur = _gh_moments(alpha_fn, dist.sigma_v, order)
            neval += order
            if prev is not None and _converged(prev, cur, rtol):
                raw = cur
                order_used = order
                break
            prev = cur
            order *= 2
        if raw is None and method == "gauss-hermite":
            last = _gh_moments(alpha_fn, dist.sigma_v, max_order)
            raise QuadratureConvergenceError(
                f"Gauss-Hermite moments not stable at max order {max_order}",
                last=last,
                previous=prev,
            )

    if raw is None:
        used_method = "adaptive"
        hints = feature_velocities(params)
        raw, adaptive_evals = _adaptive_moments(alpha_fn, dist.sigma_v, hints, rtol)
        neval += adaptive_evals

    var_r = _finalize_variance(raw.m2_r, raw.mean.real**2, rtol, "real-quadrature")
    var_i = _finalize_variance(raw.m2_i, raw.mean.imag**2, rtol, "imag-quadrature")
    return AlphaMoments(
        mean_alpha=Polarizability(raw.mean.real, raw.mean.imag),
        var_alpha_r=var_r,
        var_alpha_i=var_i,
        quadrature_order=order_used,
        method=used_method,
        neval=neval,
    )


def mean_alpha_i(
    params: FourLevelParams,
    gas: GasParams,
    mode: str = "weak-probe",
    *,
    rtol: float = 1e-6,
    min_order: int = 16,
    max_order: int = 512,
) -> float:
    """Velocity-averaged Im(alpha) only, on the same convergence contract.

    Cheaper than :func:`alpha_moments` when the caller needs the mean signal
    but not the variances (e.g. finite-difference slopes).
    """
    dist = velocity_distribution(gas)
    alpha_fn = alpha_evaluator(params, mode)

    prev = None
    order = min_order
    while order <= max_order:
        x, w = roots_hermite(order)
        v = math.sqrt(2.0) * dist.sigma_v * x
        cur = float(np.dot(w / _SQRT_PI, alpha_fn(v).imag))
        if prev is not None and abs(prev - cur) <= rtol * max(abs(cur), 1e-300):
            return cur
        prev = cur
        order *= 2

    cut = 9.0 * dist.sigma_v
    points = sorted({h for h in feature_velocities(params) if -cut < h < cut})
    norm = 1.0 / (math.sqrt(2.0 * math.pi) * dist.sigma_v)

    def integrand(v: float) -> float:
        val = float(alpha_fn(np.array([v])).imag[0])
        return val * norm * math.exp(-0.5 * (v / dist.sigma_v) ** 2)

    result, abserr = quad(
        integrand,
        -cut,
        cut,
        points=points or None,
        limit=4000,
        epsabs=0.0,
        epsrel=0.1 * rtol,
    )
    if abserr > rtol * max(abs(result), 1e-300):
        raise QuadratureConvergenceError(
            f"adaptive mean(alpha_I) stuck at abserr={abserr:.3e} for result={result:.3e}"
        )
    return result


def intrinsic_variance(gas: GasParams, var_alpha_q: float) -> float:
    """Intrinsic quadrature variance (n/epsilon_0)^2 * Var[alpha_q]."""
    if var_alpha_q < 0:
        raise ValueError(f"var_alpha_q must be >= 0, got {var_alpha_q!r}")
    return (gas.density_n / epsilon_0) ** 2 * var_alpha_q


def fluctuation_parameter(depth_prefactor: float, intrinsic_var: float) -> float:
    """Dimensionless granularity-noise strength a^2 * V_q.

    This is the specialisation of G^2 V_q / nu^2 to optical-depth readout,
    where the susceptibility transduction equals the depth prefactor and the
    photon transduction is unity in magnitude.
    """
    if depth_prefactor < 0 or intrinsic_var < 0:
        raise ValueError("inputs must be >= 0")
    return depth_prefactor**2 * intrinsic_var
