"""The free Gaussian measure μ0, the nonlinear Gibbs measure μ ∝ e^{-F_NL} dμ0 and Gaussian competitors."""

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from common.conf import lab_setting
from common.exceptions import DimensionMismatchError, InvalidArgumentError
from common.parallel import ordered_map
from fock.basis import symmetric_tensor_coefficients
from gibbs.density_matrices import DensityMatrixK

from .estimates import MCEstimate, RunningMoments, WeightedMoments, combine_ratio
from .rng import AUX_STREAM_OFFSET, RNG_ALGORITHM, complex_normal, mode_streams

logger = logging.getLogger(__name__)

# the second half of a split run draws from streams offset by this much
SECOND_HALF_OFFSET = 1 << 16


@dataclass
class ClassicalField:
    """α_j = ⟨u_j, u⟩ for the retained modes."""

    alpha: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=complex)
        if not np.all(np.isfinite(self.alpha)):
            raise InvalidArgumentError("field coefficients must be finite")

    @property
    def mode_count(self):
        return self.alpha.shape[-1]

    def norm2(self):
        return float(np.vdot(self.alpha, self.alpha).real)


def interaction_factor(convention=None):
    convention = lab_setting("INTERACTION_CONVENTION", convention)
    if convention == "half":
        return 0.5
    if convention == "full":
        return 1.0
    raise InvalidArgumentError(f"interaction convention must be 'half' or 'full', got {convention!r}")


def mu0_variances(spectrum):
    """E|α_j|² = 1/λ_j."""
    return 1.0 / spectrum.as_array()


def sample_mu0(spectrum, rng):
    """One draw of μ0: α_j ~ CN(0, 1/λ_j), density (λ_j/π) e^{-λ_j|α_j|²}."""
    v = mu0_variances(spectrum)
    xy = rng.standard_normal((spectrum.mode_count, 2))
    return ClassicalField(np.sqrt(v / 2) * (xy[:, 0] + 1j * xy[:, 1]))


def gaussian_batches(variances, n_samples, seed, batch_size=None, offset=0, mean=None):
    """Yield (S, J) sample arrays of ⊗_j CN(mean_j, variances_j), one Philox stream per mode."""
    if n_samples < 1:
        raise InvalidArgumentError(f"need at least one sample, got {n_samples}")
    batch_size = lab_setting("MC_BATCH_SIZE", batch_size)
    variances = np.asarray(variances, dtype=float)
    generators = mode_streams(seed, len(variances), offset)
    done = 0
    while done < n_samples:
        size = min(batch_size, n_samples - done)
        batch = complex_normal(generators, size, variances)
        if mean is not None:
            batch += np.asarray(mean, dtype=complex)
        yield batch
        done += size


def map_batches(fn, batches, threads=None):
    """Evaluate ``fn`` on every batch, ``threads`` batches at a time, results in batch order."""
    threads = lab_setting("THREADS", threads)
    out = []
    batches = iter(batches)
    while True:
        chunk = list(itertools.islice(batches, max(threads, 1)))
        if not chunk:
            return out
        out.extend(ordered_map(fn, chunk, threads=threads))


def _check_modes(spectrum, kernel):
    if kernel.J != spectrum.mode_count:
        raise DimensionMismatchError(f"kernel has {kernel.J} modes, spectrum has {spectrum.mode_count}")


def f_nl(field, kernel, convention=None):
    """F_NL(u) = ½⟨u⊗u, w u⊗u⟩ (no ½ under the "full" convention); accepts a field or an (S, J) batch."""
    alpha = field.alpha if isinstance(field, ClassicalField) else np.asarray(field, dtype=complex)
    if alpha.shape[-1] != kernel.J:
        raise DimensionMismatchError(f"field has {alpha.shape[-1]} modes, kernel has {kernel.J}")
    if kernel.is_zero():
        return np.zeros(alpha.shape[:-1]) if alpha.ndim > 1 else 0.0
    value = interaction_factor(convention) * kernel.pair_energy(alpha)
    return np.maximum(value, 0.0) if alpha.ndim > 1 else max(float(value), 0.0)


def _boltzmann_run(
    spectrum, kernel, n_samples, seed, observable=None, offset=0, batch_size=None, threads=None, convention=None
):
    """One pass over μ0 samples: plain moments of e^{-F} and (optionally) weighted moments of ``observable``."""
    _check_modes(spectrum, kernel)

    def evaluate(batch):
        w = np.exp(-f_nl(batch, kernel, convention))
        plain = RunningMoments().update(w)
        weighted = WeightedMoments().update(w, observable(batch)) if observable is not None else None
        return plain, weighted

    plain, weighted = RunningMoments(), WeightedMoments()
    batches = gaussian_batches(mu0_variances(spectrum), n_samples, seed, batch_size, offset)
    for p, w in map_batches(evaluate, batches, threads):
        plain.absorb(p)
        if w is not None:
            weighted.absorb(w)
    return plain, weighted


def relative_partition_mc(
    spectrum, kernel, n_samples, seed=None, batch_size=None, threads=None, offset=0, convention=None
):
    """z_r = E_{μ0}[e^{-F_NL}] ∈ (0, 1]."""
    seed = lab_setting("DEFAULT_SEED", seed)
    plain, _ = _boltzmann_run(spectrum, kernel, n_samples, seed, None, offset, batch_size, threads, convention)
    estimate = plain.estimate(seed, RNG_ALGORITHM)
    logger.info("relative partition z_r=%.6g stderr=%.2e n=%d seed=%d", estimate.real, estimate.stderr, n_samples, seed)
    return estimate


def relative_partition_quad(spectrum, kernel, convention=None):
    """Single-mode z_r = ∫_0^∞ λ e^{-λt - c t²} dt with c = factor·W_0000 (t = |α|²)."""
    if spectrum.mode_count != 1 or kernel.J != 1:
        raise DimensionMismatchError("the radial quadrature covers one mode only")
    lam = spectrum.eigenvalues[0]
    c = interaction_factor(convention) * float(kernel.coefficients[0, 0, 0, 0].real)
    value, _ = integrate.quad(lambda t: lam * math.exp(-lam * t - c * t * t), 0, math.inf, epsabs=1e-13)
    return value


def _outer_products(k):
    def observable(batch):
        c = symmetric_tensor_coefficients(batch, k)
        return c[:, :, None] * c[:, None, :].conj()

    return observable


def gamma_k_mc(
    spectrum, kernel, k, n_samples, seed=None, batch_size=None, threads=None, ess_floor=None, convention=None
):
    """γ^(k) = E_{μ0}[e^{-F}|u^{⊗k}⟩⟨u^{⊗k}|] / E_{μ0}[e^{-F}] on the symmetric k-particle basis."""
    if k < 1:
        raise InvalidArgumentError(f"k must be positive, got {k}")
    seed = lab_setting("DEFAULT_SEED", seed)
    plain, weighted = _boltzmann_run(
        spectrum, kernel, n_samples, seed, _outer_products(k), 0, batch_size, threads, convention
    )
    M = weighted.mean
    gamma = DensityMatrixK(k, spectrum.mode_count, 0.5 * (M + M.conj().T), np.asarray(weighted.stderr))
    warning = weighted.ess_warning(ess_floor)
    gamma.meta = {
        "n_samples": n_samples,
        "seed": seed,
        "rng_algorithm": RNG_ALGORITHM,
        "ess": float(weighted.ess),
        "z_r": plain.estimate(seed, RNG_ALGORITHM).to_json(),
        "warning": warning,
    }
    return gamma


def mu0_moments(spectrum, m, n_samples, seed=None, batch_size=None, threads=None):
    """Per-mode estimates of E_{μ0}|α_j|^{2m}; the exact value is m!/λ_j^m."""
    seed = lab_setting("DEFAULT_SEED", seed)

    def evaluate(batch):
        return RunningMoments().update(np.abs(batch) ** (2 * m))

    total = RunningMoments()
    for part in map_batches(evaluate, gaussian_batches(mu0_variances(spectrum), n_samples, seed, batch_size), threads):
        total.absorb(part)
    return [
        MCEstimate(float(total.mean[j]), float(total.stderr[j]), total.count, seed, RNG_ALGORITHM)
        for j in range(spectrum.mode_count)
    ]


def _complete_homogeneous(X, k):
    """h_k(x_1, ..., x_J) = Σ_{|s|=k} Π x_j^{s_j} row by row."""
    H = [np.ones(X.shape[0])] + [np.zeros(X.shape[0]) for _ in range(k)]
    for j in range(X.shape[1]):
        for m in range(1, k + 1):
            H[m] = H[m] + X[:, j] * H[m - 1]
    return H[k]


def tilted_moment_mc(spectrum, powers, k, n_samples, seed=None, batch_size=None, threads=None):
    """E_{μ0}[Π_j |α_j|^{2n_j} h_k(|α_1|², ..., |α_J|²)], the T → ∞ value of the tilted moment."""
    powers = np.asarray(powers, dtype=float)
    if powers.shape != (spectrum.mode_count,) or np.any(powers < 0) or k < 0:
        raise InvalidArgumentError(f"need one nonnegative power per mode and k >= 0, got {powers}, k={k}")
    seed = lab_setting("DEFAULT_SEED", seed)

    def evaluate(batch):
        X = np.abs(batch) ** 2
        return RunningMoments().update(np.prod(X**powers, axis=1) * _complete_homogeneous(X, k))

    total = RunningMoments()
    for part in map_batches(evaluate, gaussian_batches(mu0_variances(spectrum), n_samples, seed, batch_size), threads):
        total.absorb(part)
    return total.estimate(seed, RNG_ALGORITHM)


def gibbs_expectation_mc(spectrum, kernel, fn, n_samples, seed=None, batch_size=None, threads=None, convention=None):
    """∫ fn dμ for the nonlinear Gibbs measure, self-normalised over μ0 samples."""
    seed = lab_setting("DEFAULT_SEED", seed)
    _, weighted = _boltzmann_run(spectrum, kernel, n_samples, seed, fn, 0, batch_size, threads, convention)
    return weighted.estimate(seed, RNG_ALGORITHM)


@dataclass
class VariationalIdentity:
    relative_entropy: float
    interaction: MCEstimate
    log_z_r: float
    residual: float
    residual_stderr: float

    def holds(self, sigmas=3.0):
        return abs(self.residual) <= sigmas * self.residual_stderr + 1e-12

    def to_json(self):
        return {
            "relative_entropy": self.relative_entropy,
            "interaction": self.interaction.to_json(),
            "log_z_r": self.log_z_r,
            "residual": self.residual,
            "residual_stderr": self.residual_stderr,
        }


def classical_variational_identity(
    spectrum, kernel, n_samples, seed=None, batch_size=None, threads=None, convention=None
):
    """H_cl(μ, μ0) + ∫F dμ + log z_r = 0 with dμ/dμ0 = e^{-F}/z_r.

    Two independent halves: z_r from the first fixes the density used for H_cl, the second gives
    ∫F dμ and log z_r. The residual is log ẑ_B - log ẑ_A, pure Monte Carlo noise.
    """
    seed = lab_setting("DEFAULT_SEED", seed)
    half = max(n_samples // 2, 1)
    z_a = relative_partition_mc(spectrum, kernel, half, seed, batch_size, threads, convention=convention)
    plain, weighted = _boltzmann_run(
        spectrum,
        kernel,
        half,
        seed,
        lambda b: f_nl(b, kernel, convention),
        SECOND_HALF_OFFSET,
        batch_size,
        threads,
        convention,
    )
    z_b = plain.estimate(seed, RNG_ALGORITHM)
    interaction = weighted.estimate(seed, RNG_ALGORITHM)
    relative_entropy = -interaction.real - math.log(z_a.real)
    log_z_r = math.log(z_b.real)
    residual, residual_stderr = combine_ratio(z_b, z_a)
    return VariationalIdentity(relative_entropy, interaction, log_z_r, residual, residual_stderr)


@dataclass
class GaussianMeasure:
    """Product of circular complex Gaussians CN(mean_j, variances_j): closed-form competitors ν."""

    mean: np.ndarray
    variances: np.ndarray
    label: str = "gaussian"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=complex)
        self.variances = np.asarray(self.variances, dtype=float)
        if self.mean.shape != self.variances.shape:
            raise DimensionMismatchError("mean and variances must have one entry per mode")
        if np.any(self.variances <= 0) or not np.all(np.isfinite(self.variances)):
            raise InvalidArgumentError(f"variances must be finite and positive, got {self.variances}")

    def batches(self, n_samples, seed, batch_size=None, offset=AUX_STREAM_OFFSET):
        return gaussian_batches(self.variances, n_samples, seed, batch_size, offset, self.mean)


def gaussian_relative_entropy(nu, spectrum):
    """H(ν, μ0) = Σ_j [log(v0_j/v_j) + (v_j + |m_j|²)/v0_j - 1]."""
    v0 = mu0_variances(spectrum)
    if nu.variances.shape != v0.shape:
        raise DimensionMismatchError("competitor and spectrum have different mode counts")
    return float(np.sum(np.log(v0 / nu.variances) + (nu.variances + np.abs(nu.mean) ** 2) / v0 - 1.0))


def gibbs_functional(nu, spectrum, kernel, n_samples, seed=None, batch_size=None, threads=None, convention=None):
    """H(ν, μ0) + ∫F_NL dν; minimised by μ with value -log z_r."""
    seed = lab_setting("DEFAULT_SEED", seed)
    _check_modes(spectrum, kernel)

    def evaluate(batch):
        return RunningMoments().update(f_nl(batch, kernel, convention))

    energy = RunningMoments()
    for part in map_batches(evaluate, nu.batches(n_samples, seed, batch_size), threads):
        energy.absorb(part)
    value = gaussian_relative_entropy(nu, spectrum) + float(energy.mean)
    return MCEstimate(value, float(energy.stderr), energy.count, seed, RNG_ALGORITHM)


def default_competitors(spectrum):
    """μ0 itself, rescaled variances and shifted means."""
    v0 = mu0_variances(spectrum)
    J = spectrum.mode_count
    zero = np.zeros(J)
    shift = np.zeros(J, dtype=complex)
    shift[0] = 0.5 * math.sqrt(v0[0])
    narrow_first = v0.copy()
    narrow_first[0] *= 0.5
    return [
        GaussianMeasure(zero, v0, "mu0"),
        GaussianMeasure(zero, 0.5 * v0, "narrow-0.5"),
        GaussianMeasure(zero, 0.8 * v0, "narrow-0.8"),
        GaussianMeasure(zero, 1.25 * v0, "wide-1.25"),
        GaussianMeasure(shift, v0, "shifted-mode0"),
        GaussianMeasure(zero, narrow_first, "narrow-mode0"),
    ]


def minimality_check(
    spectrum, kernel, n_samples, seed=None, competitors=None, log_z_r=None, threads=None, convention=None
):
    """H(ν, μ0) + ∫F dν >= -log z_r for every competitor, within 3σ."""
    seed = lab_setting("DEFAULT_SEED", seed)
    if log_z_r is None:
        z_r = relative_partition_mc(spectrum, kernel, n_samples, seed, threads=threads, convention=convention)
        log_z_r, bound_stderr = math.log(z_r.real), z_r.stderr / z_r.real
    else:
        bound_stderr = 0.0
    rows = []
    for nu in competitors or default_competitors(spectrum):
        functional = gibbs_functional(nu, spectrum, kernel, n_samples, seed, threads=threads, convention=convention)
        sigma = math.hypot(functional.stderr, bound_stderr)
        margin = functional.real + log_z_r
        rows.append(
            {
                "competitor": nu.label,
                "functional": functional.real,
                "stderr": sigma,
                "bound": -log_z_r,
                "margin": margin,
                "passed": margin >= -3 * sigma - 1e-12,
            }
        )
        if not rows[-1]["passed"]:
            logger.warning("minimality violated competitor=%s margin=%.3e sigma=%.2e", nu.label, margin, sigma)
    return rows
