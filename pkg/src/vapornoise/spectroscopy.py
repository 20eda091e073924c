"""Single-atom response of a four-level ladder probed on its lowest transition.

Level scheme (1-based labels): |1> ground, |2> intermediate state driven by
the optical probe, |3> first Rydberg state driven by the optical coupling
beam, |4> second Rydberg state dressed by a microwave field.  Population
decays in a cascade 2->1, 3->2, 4->3; coherences relax at the Lindblad rates
(Gamma_i + Gamma_j)/2 plus an optional additive pure-dephasing term per
coherence.

Two evaluation routes are provided and cross-validate each other:

* :func:`weak_probe_alpha` -- the linear-response polarizability in the
  nested-denominator (continued fraction) form, valid for probe Rabi
  frequencies well below the intermediate-state linewidth;
* :func:`steady_state` + :func:`alpha_from_coherence` -- the full Lindblad
  steady state, valid at arbitrary probe intensity.

Phase convention
----------------
The rotating-frame Hamiltonian couples each level pair through a purely
imaginary matrix element, ``H[upper, lower] = +1j * Omega / 2``, and carries
the negative cumulative detuning on the diagonal.  With this choice the
steady-state probe coherence ``rho[2, 1]`` is real and positive for a
resonant weak probe, and

    alpha = (2 * mu12**2 / (hbar * Omega_p)) * 1j * rho21

reproduces the weak-probe formula exactly, with Im(alpha) > 0 meaning
absorption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from scipy.constants import hbar

from .errors import SingularSteadyStateError

__all__ = [
    "FourLevelParams",
    "Polarizability",
    "DensityMatrix4",
    "doppler_shift",
    "weak_probe_alpha",
    "steady_state",
    "alpha_from_coherence",
    "coherence_rate",
    "feature_velocities",
]

# Coherence labels (upper, lower) in 1-based level numbering.
COHERENCES = ((2, 1), (3, 1), (4, 1), (3, 2), (4, 2), (4, 3))

#: Condition-number ceiling above which the steady-state solve is refused.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class FourLevelParams:
    """Fields, detunings, decay rates and dipoles of the ladder system.

    All frequencies and rates are angular (rad/s); wavenumbers are signed
    (rad/m) and encode propagation direction, so counter-propagating probe
    and coupling beams carry opposite signs.  ``dephasing`` maps a coherence
    label such as ``(3, 2)`` to an extra decay rate added on top of the
    Lindblad value.
    """

    omega_p_rabi: float
    omega_c_rabi: float
    omega_s_rabi: float
    delta_p: float
    delta_c: float
    delta_s: float
    gamma2: float
    gamma3: float
    gamma4: float
    k_p: float
    k_c: float
    mu12: float
    mu_s: float
    dephasing: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.gamma2 > 0:
            raise ValueError(f"gamma2 must be > 0, got {self.gamma2!r}")
        for name in ("gamma3", "gamma4"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        for name in ("omega_p_rabi", "omega_c_rabi", "omega_s_rabi"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if self.mu12 <= 0:
            raise ValueError(f"mu12 must be > 0, got {self.mu12!r}")
        if self.mu_s <= 0:
            raise ValueError(f"mu_s must be > 0, got {self.mu_s!r}")
        for key, rate in self.dephasing.items():
            if tuple(key) not in COHERENCES:
                raise ValueError(f"unknown coherence label {key!r} in dephasing")
            if rate < 0:
                raise ValueError(f"dephasing rate for {key!r} must be >= 0")

    @property
    def decay_rates(self) -> tuple[float, float, float, float]:
        """Population decay rates of levels 1..4 (ground does not decay)."""
        return (0.0, self.gamma2, self.gamma3, self.gamma4)


@dataclass(frozen=True)
class Polarizability:
    """Complex single-atom polarizability split into quadratures (C m^2/V)."""

    alpha_r: float
    alpha_i: float

    @property
    def as_complex(self) -> complex:
        return complex(self.alpha_r, self.alpha_i)


@dataclass(frozen=True)
class DensityMatrix4:
    """A 4x4 density matrix with convenience checks for its invariants."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=complex)
        if arr.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {arr.shape}")
        object.__setattr__(self, "entries", arr)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def trace_defect(self) -> float:
        return float(abs(np.trace(self.entries) - 1.0))

    def min_eigenvalue(self) -> float:
        sym = 0.5 * (self.entries + self.entries.conj().T)
        return float(np.linalg.eigvalsh(sym)[0])


def coherence_rate(params: FourLevelParams, upper: int, lower: int) -> float:
    """Total decay rate of the (upper, lower) coherence.

    Lindblad cascade value (Gamma_upper + Gamma_lower)/2 plus any configured
    pure dephasing for that coherence.
    """
    rates = params.decay_rates
    base = 0.5 * (rates[upper - 1] + rates[lower - 1])
    return base + params.dephasing.get((upper, lower), 0.0)


def doppler_shift(params: FourLevelParams, v: float) -> FourLevelParams:
    """Shift the optical detunings for an atom moving at axial velocity v.

    The probe detuning becomes delta_p - k_p*v and the coupling detuning
    delta_c - k_c*v.  The microwave wavenumber is ~5 orders of magnitude
    below the optical ones, so delta_s is left untouched.
    """
    if not math.isfinite(v):
        raise ValueError(f"velocity must be finite, got {v!r}")
    if v == 0.0:
        return params
    return replace(
        params,
        delta_p=params.delta_p - params.k_p * v,
        delta_c=params.delta_c - params.k_c * v,
    )


def _weak_alpha_array(params: FourLevelParams, v) -> np.ndarray:
    """Weak-probe polarizability evaluated on an array of velocities.

    Uses the rational-function form of the continued fraction so that
    vanishing inner denominators (perfect transparency limits) are handled
    without special cases.
    """
    v = np.asarray(v, dtype=float)
    d2 = params.delta_p - params.k_p * v
    d3 = d2 + (params.delta_c - params.k_c * v)
    d4 = d3 + params.delta_s
    g21 = coherence_rate(params, 2, 1)
    g31 = coherence_rate(params, 3, 1)
    g41 = coherence_rate(params, 4, 1)
    scale = params.mu12**2 / hbar

    f2 = g21 - 1j * d2
    if params.omega_c_rabi == 0.0:
        return 1j * scale / f2

    f3 = g31 - 1j * d3
    wc2 = 0.25 * params.omega_c_rabi**2
    if params.omega_s_rabi == 0.0:
        # alpha = i*scale / (f2 + wc2/f3), written as one fraction.
        return 1j * scale * f3 / (f2 * f3 + wc2)

    f4 = g41 - 1j * d4
    ws2 = 0.25 * params.omega_s_rabi**2
    inner = f3 * f4 + ws2
    return 1j * scale * inner / (f2 * inner + wc2 * f4)


def weak_probe_alpha(params: FourLevelParams, v: float = 0.0) -> Polarizability:
    """Linear-response polarizability alpha(v) of the ladder system.

    Valid for omega_p_rabi well below gamma2 (the probe field itself does not
    enter).  Raises on a degenerate (exactly singular) denominator, which can
    only occur for vanishing decay rates on resonance.
    """
    alpha = complex(_weak_alpha_array(params, v))
    if not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
        raise ZeroDivisionError(
            "weak-probe denominator is singular for these parameters "
            "(all decay rates and detunings cancel)"
        )
    return Polarizability(alpha.real, alpha.imag)


# ---------------------------------------------------------------------------
# Full Lindblad steady state
# ---------------------------------------------------------------------------

# Real parametrization of a Hermitian 4x4 matrix: four populations followed by
# (Re, Im) of each coherence in COHERENCES order (0-based indices inside).
_PAIRS0 = tuple((u - 1, l - 1) for (u, l) in COHERENCES)


def _basis_matrices() -> list[np.ndarray]:
    basis = []
    for k in range(4):
        e = np.zeros((4, 4), dtype=complex)
        e[k, k] = 1.0
        basis.append(e)
    for (i, j) in _PAIRS0:
        re = np.zeros((4, 4), dtype=complex)
        re[i, j] = 1.0
        re[j, i] = 1.0
        basis.append(re)
        im = np.zeros((4, 4), dtype=complex)
        im[i, j] = 1.0j
        im[j, i] = -1.0j
        basis.append(im)
    return basis


_BASIS = _basis_matrices()


def _coords(mat: np.ndarray) -> np.ndarray:
    """Project a Hermitian matrix onto the 16 real coordinates."""
    out = np.empty(16)
    for k in range(4):
        out[k] = mat[k, k].real
    for n, (i, j) in enumerate(_PAIRS0):
        out[4 + 2 * n] = mat[i, j].real
        out[5 + 2 * n] = mat[i, j].imag
    return out


def _matrix_from_coords(x: np.ndarray) -> np.ndarray:
    rho = np.zeros((4, 4), dtype=complex)
    for k in range(4):
        rho[k, k] = x[k]
    for n, (i, j) in enumerate(_PAIRS0):
        val = x[4 + 2 * n] + 1j * x[5 + 2 * n]
        rho[i, j] = val
        rho[j, i] = val.conjugate()
    return rho


def _hamiltonian(params: FourLevelParams) -> np.ndarray:
    """Rotating-frame Hamiltonian over hbar (rad/s) at the stored detunings."""
    d2 = params.delta_p
    d3 = d2 + params.delta_c
    d4 = d3 + params.delta_s
    h = np.zeros((4, 4), dtype=complex)
    h[1, 1] = -d2
    h[2, 2] = -d3
    h[3, 3] = -d4
    for (up, lo), omega in (
        ((1, 0), params.omega_p_rabi),
        ((2, 1), params.omega_c_rabi),
        ((3, 2), params.omega_s_rabi),
    ):
        h[up, lo] = 0.5j * omega
        h[lo, up] = -0.5j * omega
    return h


def _rhs(params: FourLevelParams, ham: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Lindblad right-hand side -i[H, rho] + dissipator for the cascade."""
    out = -1j * (ham @ rho - rho @ ham)
    g = params.decay_rates
    out[0, 0] += g[1] * rho[1, 1]
    out[1, 1] += g[2] * rho[2, 2] - g[1] * rho[1, 1]
    out[2, 2] += g[3] * rho[3, 3] - g[2] * rho[2, 2]
    out[3, 3] += -g[3] * rho[3, 3]
    for (up, lo) in COHERENCES:
        rate = coherence_rate(params, up, lo)
        i, j = up - 1, lo - 1
        out[i, j] -= rate * rho[i, j]
        out[j, i] -= rate * rho[j, i]
    return out


def _generator_matrix(params: FourLevelParams) -> np.ndarray:
    """16x16 real matrix of the Lindblad flow in the Hermitian coordinates."""
    ham = _hamiltonian(params)
    m = np.empty((16, 16))
    for col, b in enumerate(_BASIS):
        m[:, col] = _coords(_rhs(params, ham, b))
    return m


def _doppler_generator(params: FourLevelParams) -> np.ndarray:
    """Velocity derivative of the generator: flow matrix is M0 + v * M1."""
    shifted = doppler_shift(params, 1.0)
    return _generator_matrix(shifted) - _generator_matrix(params)


def _solve_coords(
    systems: np.ndarray, condition_limit: float
) -> tuple[np.ndarray, np.ndarray]:
    """Solve (batched) steady-state systems with the trace row substituted."""
    a = np.array(systems, copy=True)
    a[..., 0, :] = 0.0
    a[..., 0, :4] = 1.0
    b = np.zeros(a.shape[:-1])
    b[..., 0] = 1.0
    cond = np.linalg.cond(a)
    worst = float(np.max(cond))
    if not np.isfinite(worst) or worst > condition_limit:
        raise SingularSteadyStateError(worst)
    x = np.linalg.solve(a, b[..., None])[..., 0]
    return x, cond


def steady_state(
    params: FourLevelParams,
    v: float = 0.0,
    condition_limit: float = CONDITION_LIMIT,
) -> DensityMatrix4:
    """Steady state of the driven, damped ladder for one velocity class.

    Solves the 16 real equations of the Lindblad flow over the
    Hermitian-matrix coordinates, with the population-1 row replaced by the
    unit-trace constraint, so the result is Hermitian by construction.
    Raises :class:`SingularSteadyStateError` when the system's condition
    number exceeds ``condition_limit``.
    """
    shifted = doppler_shift(params, v)
    m = _generator_matrix(shifted)
    x, _ = _solve_coords(m, condition_limit)
    return DensityMatrix4(_matrix_from_coords(x))


def steady_state_batch(
    params: FourLevelParams,
    velocities,
    condition_limit: float = CONDITION_LIMIT,
) -> np.ndarray:
    """Steady-state matrices for many velocities at once, shape (n, 4, 4).

    Exploits the linearity of the Doppler shift: the flow matrix for
    velocity v is M0 + v*M1, so only two generator constructions are needed
    regardless of the number of velocity classes.
    """
    velocities = np.asarray(velocities, dtype=float)
    m0 = _generator_matrix(params)
    m1 = _doppler_generator(params)
    systems = m0[None, :, :] + velocities[:, None, None] * m1[None, :, :]
    x, _ = _solve_coords(systems, condition_limit)
    rhos = np.zeros(x.shape[:-1] + (4, 4), dtype=complex)
    for k in range(4):
        rhos[..., k, k] = x[..., k]
    for n, (i, j) in enumerate(_PAIRS0):
        val = x[..., 4 + 2 * n] + 1j * x[..., 5 + 2 * n]
        rhos[..., i, j] = val
        rhos[..., j, i] = val.conjugate()
    return rhos


def alpha_from_coherence(
    rho: DensityMatrix4, params: FourLevelParams
) -> Polarizability:
    """Polarizability extracted from the probe coherence of a steady state.

    Uses alpha = (2*mu12^2/(hbar*Omega_p)) * i * rho21 in the phase
    convention of this module (see the module docstring); in the weak-probe
    limit this reproduces :func:`weak_probe_alpha` exactly.
    """
    if params.omega_p_rabi == 0.0:
        raise ZeroDivisionError(
            "omega_p_rabi is zero; the coherence carries no probe response. "
            "Use weak_probe_alpha for the linear-response limit."
        )
    alpha = (
        2.0
        * params.mu12**2
        / (hbar * params.omega_p_rabi)
        * 1j
        * rho.entries[1, 0]
    )
    return Polarizability(float(alpha.real), float(alpha.imag))


def _full_alpha_array(
    params: FourLevelParams,
    velocities,
    condition_limit: float = CONDITION_LIMIT,
) -> np.ndarray:
    """Intensity-dependent polarizability on an array of velocities."""
    if params.omega_p_rabi == 0.0:
        raise ZeroDivisionError(
            "omega_p_rabi is zero; use the weak-probe route instead"
        )
    rhos = steady_state_batch(params, velocities, condition_limit)
    scale = 2.0 * params.mu12**2 / (hbar * params.omega_p_rabi)
    return scale * 1j * rhos[..., 1, 0]


def alpha_array(params: FourLevelParams, velocities, mode: str) -> np.ndarray:
    """Vectorized polarizability alpha(v) in the requested evaluation mode."""
    if mode == "weak-probe":
        return _weak_alpha_array(params, velocities)
    if mode == "full":
        return _full_alpha_array(params, velocities)
    raise ValueError(f"unknown polarizability mode {mode!r}")


def alpha_evaluator(params: FourLevelParams, mode: str):
    """Reusable alpha(v-array) callable with per-parameter work hoisted out.

    In full mode the two generator matrices are built once and only the
    velocity-dependent part varies per call, which matters when an adaptive
    integrator evaluates one velocity at a time.
    """
    if mode == "weak-probe":
        return lambda v: _weak_alpha_array(params, v)
    if mode != "full":
        raise ValueError(f"unknown polarizability mode {mode!r}")
    if params.omega_p_rabi == 0.0:
        raise ZeroDivisionError(
            "omega_p_rabi is zero; use the weak-probe route instead"
        )
    m0 = _generator_matrix(params)
    m1 = _doppler_generator(params)
    scale = 2.0 * params.mu12**2 / (hbar * params.omega_p_rabi)

    def evaluate(velocities) -> np.ndarray:
        velocities = np.asarray(velocities, dtype=float)
        systems = m0[None, :, :] + velocities[:, None, None] * m1[None, :, :]
        x, _ = _solve_coords(systems, CONDITION_LIMIT)
        rho21 = x[..., 4] + 1j * x[..., 5]
        return scale * 1j * rho21

    return evaluate


def feature_velocities(params: FourLevelParams) -> list[float]:
    """Velocities where the response has narrow structure.

    Returns the velocity classes that tune each cumulative detuning to zero,
    plus Autler-Townes sidebands of the probe resonance.  Used as subdivision
    hints by the adaptive velocity average.
    """
    hints: list[float] = []
    k2 = params.k_p
    k3 = params.k_p + params.k_c
    d2 = params.delta_p
    d3 = params.delta_p + params.delta_c
    d4 = d3 + params.delta_s
    if k2 != 0.0:
        for off in (0.0, 0.5 * params.omega_s_rabi, -0.5 * params.omega_s_rabi,
                    0.5 * params.omega_c_rabi, -0.5 * params.omega_c_rabi):
            hints.append((d2 + off) / k2)
    if k3 != 0.0:
        hints.append(d3 / k3)
        hints.append(d4 / k3)
        for off in (0.5 * params.omega_s_rabi, -0.5 * params.omega_s_rabi):
            hints.append((d3 + off) / k3)
    return sorted(set(hints))
