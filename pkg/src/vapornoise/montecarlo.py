"""Direct simulation of the discrete-atom optical-depth readout.

Each trial draws the number of atoms in the probe volume, their velocities,
and a photon count, then forms the stochastic signal

    S = a * chi_I - ln(xi / N_ph),

whose variance is compared against the analytic budget.  Trials use
counter-based Philox streams keyed by (seed, trial index), so results are
bitwise identical whether trials run serially or on any worker pool.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import epsilon_0
from scipy.stats import t as student_t

from .ensemble import (
    GasParams,
    alpha_moments,
    fluctuation_parameter,
    intrinsic_variance,
    velocity_distribution,
)
from .errors import DimOperatingPointError, EmptyVolumeError
from .noise import PhotonStatistics, generalized_scaling_ratio
from .spectroscopy import FourLevelParams, alpha_evaluator

__all__ = [
    "TrialConfig",
    "VarianceEstimate",
    "TrialData",
    "trial_rng",
    "sample_atom_number",
    "sample_chi_bar",
    "PhotonSampler",
    "sample_photon_count",
    "simulate_signal",
    "run_trials",
    "estimate_variance",
    "ScalingPoint",
    "ScalingReport",
    "validate_scaling",
]

log = logging.getLogger(__name__)

#: Above this mean, Poisson draws switch to a rounded Gaussian.
GAUSSIAN_ATOM_THRESHOLD = 1e6

#: Zero-photon draws are rejected and redrawn at most this many times.
ZERO_PHOTON_RESAMPLE_CAP = 1000


@dataclass(frozen=True)
class TrialConfig:
    """Reproducible description of one Monte Carlo run.

    ``photon_reference`` selects what the logarithm normalises against:
    ``"incident"`` uses the incident mean, matching the optical-depth
    definition; ``"transmitted"`` makes the count mean follow the attenuated
    beam and exists for exploration only.
    """

    seed: int
    trials: int
    n_at_mean: float
    n_ph_mean: float
    stats: PhotonStatistics
    mode: str = "weak-probe"
    photon_reference: str = "incident"

    def __post_init__(self):
        if self.trials < 2:
            raise ValueError(f"trials must be >= 2, got {self.trials!r}")
        if not self.n_at_mean > 0 or not self.n_ph_mean > 0:
            raise ValueError("mean atom and photon numbers must be > 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.mode not in ("weak-probe", "full"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.photon_reference not in ("incident", "transmitted"):
            raise ValueError(
                f"unknown photon_reference {self.photon_reference!r}"
            )


@dataclass(frozen=True)
class VarianceEstimate:
    """Sample variance with a 95% confidence interval.

    ``degenerate`` flags constant samples, whose interval collapses to a
    point and carries no statistical meaning.
    """

    mean: float
    variance: float
    ci_low: float
    ci_high: float
    n_effective: int
    degenerate: bool = False

    def __post_init__(self):
        if not (self.ci_low <= self.variance <= self.ci_high):
            raise ValueError("confidence interval must contain the variance")


@dataclass
class TrialData:
    """Per-trial samples of the signal and its two additive pieces."""

    atomic_term: np.ndarray
    photon_term: np.ndarray
    total: np.ndarray
    photon_mean_achieved: float
    mandel_q_achieved: float
    zero_photon_resamples: int = 0
    zero_atom_resamples: int = 0


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Independent counter-based stream for one trial.

    Philox is keyed by (seed, trial index), so any assignment of trials to
    workers reproduces the same per-trial draws.
    """
    key = np.array([seed, trial_index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_atom_number(rng: np.random.Generator, n_at_mean: float) -> int:
    """Poisson atom number; Gaussian with rounding above the large-mean cutoff."""
    if not n_at_mean > 0:
        raise ValueError(f"n_at_mean must be > 0, got {n_at_mean!r}")
    if n_at_mean > GAUSSIAN_ATOM_THRESHOLD:
        log.debug(
            "using Gaussian approximation for Poisson mean %.3e", n_at_mean
        )
        draw = rng.normal(n_at_mean, math.sqrt(n_at_mean))
        return max(int(round(draw)), 0)
    return int(rng.poisson(n_at_mean))


def sample_chi_bar(
    rng: np.random.Generator,
    n_atoms: int,
    params: FourLevelParams,
    gas: GasParams,
    mode: str = "weak-probe",
) -> complex:
    """Sample-mean susceptibility of ``n_atoms`` thermal atoms.

    Draws axial velocities from the 1D Maxwell-Boltzmann distribution and
    averages the per-atom polarizability.
    """
    if n_atoms < 1:
        raise EmptyVolumeError("cannot sample susceptibility for zero atoms")
    sigma_v = velocity_distribution(gas).sigma_v
    velocities = rng.normal(0.0, sigma_v, n_atoms)
    alpha = alpha_evaluator(params, mode)(velocities)
    return complex(gas.density_n / epsilon_0 * alpha.mean())


class PhotonSampler:
    """Count sampler realising Var(xi) = N_ph (1 + Q) for a target Q.

    Q < 0 uses a binomial with p = -Q, whose trial count must be an integer;
    the achieved mean (and thus the exact operating point) shifts slightly
    and is recorded for use in analytic comparisons.
    """

    def __init__(self, n_ph_mean: float, stats: PhotonStatistics):
        if not n_ph_mean > 0:
            raise ValueError(f"n_ph_mean must be > 0, got {n_ph_mean!r}")
        self.stats = stats
        q = stats.mandel_q
        if stats.sampler == "poisson":
            self.achieved_mean = n_ph_mean
            self.achieved_q = 0.0
        elif stats.sampler == "deterministic":
            self._count = max(int(round(n_ph_mean)), 1)
            self.achieved_mean = float(self._count)
            self.achieved_q = -1.0
        elif stats.sampler == "binomial":
            p = -q
            self._n_bin = max(int(round(n_ph_mean / p)), 1)
            self._p_bin = p
            self.achieved_mean = self._n_bin * p
            self.achieved_q = -p
        else:  # negative-binomial
            self._r_nb = n_ph_mean / q
            self._p_nb = 1.0 / (1.0 + q)
            self.achieved_mean = n_ph_mean
            self.achieved_q = q

    def sample(self, rng: np.random.Generator, mean_override: float | None = None) -> int:
        """One photon count; ``mean_override`` rescales the mean, keeping Q."""
        sampler = self.stats.sampler
        mean = self.achieved_mean if mean_override is None else mean_override
        if sampler == "poisson":
            return int(rng.poisson(mean))
        if sampler == "deterministic":
            return max(int(round(mean)), 0)
        if sampler == "binomial":
            if mean_override is None:
                return int(rng.binomial(self._n_bin, self._p_bin))
            n = max(int(round(mean / self._p_bin)), 1)
            return int(rng.binomial(n, self._p_bin))
        r = mean / self.stats.mandel_q
        return int(rng.negative_binomial(r, self._p_nb))


def sample_photon_count(
    rng: np.random.Generator, n_ph_mean: float, stats: PhotonStatistics
) -> int:
    """Single photon-count draw for the given statistics."""
    return PhotonSampler(n_ph_mean, stats).sample(rng)


def _one_trial(
    rng: np.random.Generator,
    config: TrialConfig,
    params: FourLevelParams,
    gas: GasParams,
    depth_prefactor: float,
    sampler: PhotonSampler,
) -> tuple[float, float, int, int]:
    """Returns (atomic term, photon term, zero-atom redraws, zero-photon redraws)."""
    atom_redraws = 0
    n_atoms = sample_atom_number(rng, config.n_at_mean)
    while n_atoms == 0:
        atom_redraws += 1
        n_atoms = sample_atom_number(rng, config.n_at_mean)
    chi = sample_chi_bar(rng, n_atoms, params, gas, config.mode)
    atomic = depth_prefactor * chi.imag

    if config.photon_reference == "transmitted":
        mean = sampler.achieved_mean * math.exp(-atomic)
    else:
        mean = None
    photon_redraws = 0
    count = sampler.sample(rng, mean_override=mean)
    while count == 0:
        photon_redraws += 1
        if photon_redraws > ZERO_PHOTON_RESAMPLE_CAP:
            raise DimOperatingPointError(
                f"photon count stayed zero after {ZERO_PHOTON_RESAMPLE_CAP} "
                f"redraws (mean {sampler.achieved_mean:.3g}); operating point too dim"
            )
        count = sampler.sample(rng, mean_override=mean)
    photon = math.log(count / sampler.achieved_mean)
    return atomic, photon, atom_redraws, photon_redraws


def simulate_signal(
    rng: np.random.Generator,
    config: TrialConfig,
    params: FourLevelParams,
    gas: GasParams,
    depth_prefactor: float,
) -> float:
    """One stochastic optical-depth sample S = a*chi_I - ln(xi/N_ph).

    Zero-photon draws cannot enter the logarithm; they are rejected and
    redrawn up to a cap, after which the operating point is deemed too dim.
    In transmitted-reference mode the count mean is attenuated by the
    sampled optical depth and only the logarithm term is returned.
    """
    sampler = PhotonSampler(config.n_ph_mean, config.stats)
    atomic, photon, _, _ = _one_trial(
        rng, config, params, gas, depth_prefactor, sampler
    )
    if config.photon_reference == "transmitted":
        return -photon
    return atomic - photon


def run_trials(
    config: TrialConfig,
    params: FourLevelParams,
    gas: GasParams,
    depth_prefactor: float,
    threads: int = 1,
) -> TrialData:
    """Execute all trials of a config, preserving per-trial stream identity.

    With ``threads > 1`` trials are partitioned across a pool; because every
    trial owns its Philox substream and results are assembled by trial
    index, the output is identical for any thread count.
    """
    sampler = PhotonSampler(config.n_ph_mean, config.stats)
    atomic = np.empty(config.trials)
    photon = np.empty(config.trials)
    atom_redraws = np.zeros(config.trials, dtype=np.int64)
    photon_redraws = np.zeros(config.trials, dtype=np.int64)

    def run_range(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            rng = trial_rng(config.seed, i)
            a, ph, za, zp = _one_trial(
                rng, config, params, gas, depth_prefactor, sampler
            )
            atomic[i] = a
            photon[i] = ph
            atom_redraws[i] = za
            photon_redraws[i] = zp

    if threads > 1:
        chunk = math.ceil(config.trials / threads)
        spans = [
            (lo, min(lo + chunk, config.trials))
            for lo in range(0, config.trials, chunk)
        ]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda span: run_range(*span), spans))
    else:
        run_range(0, config.trials)

    za_total = int(atom_redraws.sum())
    zp_total = int(photon_redraws.sum())
    if za_total:
        log.info("redrew %d zero-atom Poisson samples", za_total)
    if zp_total:
        log.info("redrew %d zero-photon counts", zp_total)
    if config.photon_reference == "transmitted":
        total = -photon
    else:
        total = atomic - photon
    return TrialData(
        atomic_term=atomic,
        photon_term=photon,
        total=total,
        photon_mean_achieved=sampler.achieved_mean,
        mandel_q_achieved=sampler.achieved_q,
        zero_photon_resamples=zp_total,
        zero_atom_resamples=za_total,
    )


def estimate_variance(samples) -> VarianceEstimate:
    """Unbiased sample variance with a 95% CI.

    Runs >= 1000 samples use 20 replicated batches and a t interval over
    the batch variances; smaller runs use a delete-one jackknife evaluated
    through the closed-form update of the sample variance.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    mean = float(x.mean())
    var = float(x.var(ddof=1))
    if var == 0.0:
        return VarianceEstimate(
            mean=mean, variance=0.0, ci_low=0.0, ci_high=0.0,
            n_effective=n, degenerate=True,
        )

    if n >= 1000:
        n_batches = 20
        usable = n - (n % n_batches)
        batches = x[:usable].reshape(n_batches, -1)
        batch_vars = batches.var(axis=1, ddof=1)
        se = float(batch_vars.std(ddof=1) / math.sqrt(n_batches))
        t_val = float(student_t.ppf(0.975, n_batches - 1))
        half = t_val * se
    else:
        centered = x - mean
        ss = float(np.dot(centered, centered))
        # Delete-one sample variances via the exact leave-one-out identity.
        ss_loo = ss - centered**2 * n / (n - 1)
        var_loo = ss_loo / (n - 2)
        mean_loo = var_loo.mean()
        se = math.sqrt((n - 1) / n * float(np.sum((var_loo - mean_loo) ** 2)))
        t_val = float(student_t.ppf(0.975, n - 1))
        half = t_val * se
    return VarianceEstimate(
        mean=mean,
        variance=var,
        ci_low=max(var - half, 0.0),
        ci_high=var + half,
        n_effective=n,
        degenerate=False,
    )


@dataclass(frozen=True)
class ScalingPoint:
    """Empirical vs analytic relative noise at one resource ratio."""

    r_target: float
    r_achieved: float
    n_ph_mean: float
    n_at_mean: float
    trials: int
    ratio_empirical: float
    ratio_analytic: float
    rel_deviation: float
    ci_low: float
    ci_high: float
    ci_contains_analytic: bool
    passed: bool


@dataclass
class ScalingReport:
    """Outcome of a Monte Carlo sweep against the analytic scaling law."""

    points: list[ScalingPoint]
    fluctuation_param: float
    rel_tol: float
    passed: bool
    trial_data: list[TrialData] = field(default_factory=list)


def validate_scaling(
    params: FourLevelParams,
    gas: GasParams,
    depth_prefactor: float,
    base_config: TrialConfig,
    r_values,
    rel_tol: float = 0.05,
    threads: int = 1,
    fluctuation_scale: float = 1.0,
    keep_samples: bool = False,
) -> ScalingReport:
    """Sweep the resource ratio and compare Var(S) with the scaling law.

    For each R the photon mean is set to R * N_at with the atom mean fixed.
    A point passes when the empirical-over-analytic deviation stays within
    ``rel_tol`` and the analytic ratio lies inside the 95% CI of the
    empirical one.  ``fluctuation_scale`` multiplies the analytic
    fluctuation parameter and exists so harness failure paths can be tested.
    """
    moments = alpha_moments(params, gas, base_config.mode)
    fluct = fluctuation_parameter(
        depth_prefactor, intrinsic_variance(gas, moments.var_alpha_i)
    ) * fluctuation_scale

    points: list[ScalingPoint] = []
    kept: list[TrialData] = []
    all_passed = True
    for idx, r_target in enumerate(r_values):
        n_ph = r_target * base_config.n_at_mean
        if n_ph < 1e3:
            raise ValueError(
                f"n_ph_mean={n_ph:.3g} at R={r_target:.3g} is below 1e3; the "
                "linearized comparison is not meaningful there"
            )
        config = TrialConfig(
            seed=base_config.seed + idx,
            trials=base_config.trials,
            n_at_mean=base_config.n_at_mean,
            n_ph_mean=n_ph,
            stats=base_config.stats,
            mode=base_config.mode,
            photon_reference=base_config.photon_reference,
        )
        data = run_trials(config, params, gas, depth_prefactor, threads=threads)
        estimate = estimate_variance(data.total)
        shot = 1.0 / math.sqrt(data.photon_mean_achieved)
        ratio_emp = math.sqrt(estimate.variance) / shot
        r_achieved = data.photon_mean_achieved / config.n_at_mean
        stats_achieved = PhotonStatistics.from_mandel_q(data.mandel_q_achieved)
        ratio_ana = generalized_scaling_ratio(
            r_achieved, fluct, stats_achieved
        ).vs_shot_limit
        rel_dev = abs(ratio_emp - ratio_ana) / ratio_ana
        ci_low_ratio = math.sqrt(max(estimate.ci_low, 0.0)) / shot
        ci_high_ratio = math.sqrt(estimate.ci_high) / shot
        ci_ok = ci_low_ratio <= ratio_ana <= ci_high_ratio
        point_passed = rel_dev < rel_tol and ci_ok
        all_passed = all_passed and point_passed
        points.append(
            ScalingPoint(
                r_target=r_target,
                r_achieved=r_achieved,
                n_ph_mean=data.photon_mean_achieved,
                n_at_mean=config.n_at_mean,
                trials=config.trials,
                ratio_empirical=ratio_emp,
                ratio_analytic=ratio_ana,
                rel_deviation=rel_dev,
                ci_low=ci_low_ratio,
                ci_high=ci_high_ratio,
                ci_contains_analytic=ci_ok,
                passed=point_passed,
            )
        )
        if keep_samples:
            kept.append(data)
    return ScalingReport(
        points=points,
        fluctuation_param=fluct,
        rel_tol=rel_tol,
        passed=all_passed,
        trial_data=kept,
    )
