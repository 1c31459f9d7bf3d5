"""Husimi (lower-symbol) measures μ^ε_{V,Γ}, anti-Wick expectations and the Berezin–Lieb check.

μ^ε_{V,Γ}(u) = (επ)^{-d} ⟨ξ(u/√ε), Γ_V ξ(u/√ε)⟩ with Γ_V the localisation of Γ to the modes V.
Integrals against μ^ε are estimated by importance sampling from a complex Gaussian proposal whose
per-mode variance is matched to ε(Γ^(1)_jj + 1).
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln, logsumexp

from classical.estimates import MCEstimate, RunningMoments, WeightedMoments
from classical.measure import GaussianMeasure, map_batches
from classical.rng import RNG_ALGORITHM
from common.conf import lab_setting
from common.exceptions import CutoffError, DimensionMismatchError, InvalidArgumentError, ProposalError
from fock.basis import build_basis, sector_occupations, symmetric_tensor_coefficients
from fock.operators import k_body_op
from gibbs.density_matrices import DensityMatrixK, reduced_density_matrix, schatten_norm
from gibbs.entropy import INFINITE_ENTROPY, relative_entropy
from gibbs.localization import localize

from .coherent import coherent_log_coefficients

logger = logging.getLogger(__name__)


@dataclass
class HusimiSample:
    u: np.ndarray
    density: float

    def __post_init__(self):
        if self.density < 0:
            raise InvalidArgumentError(f"Husimi density must be nonnegative, got {self.density}")


@dataclass
class SamplerConfig:
    n_samples: int = 100_000
    seed: int = None
    scale: float = 1.0
    floor: float = None
    batch_size: int = None
    threads: int = None

    def __post_init__(self):
        self.seed = lab_setting("DEFAULT_SEED", self.seed)
        if self.n_samples < 1:
            raise InvalidArgumentError(f"need at least one sample, got {self.n_samples}")

    @classmethod
    def from_json(cls, payload):
        payload = payload or {}
        known = {"n_samples", "seed", "scale", "floor", "batch_size", "threads"}
        return cls(**{key: value for key, value in payload.items() if key in known})

    def with_seed(self, seed):
        return SamplerConfig(self.n_samples, seed, self.scale, self.floor, self.batch_size, self.threads)


def _check_scale(eps):
    if not eps > 0 or not math.isfinite(eps):
        raise InvalidArgumentError(f"semiclassical scale must be positive, got {eps}")


class HusimiMeasure:
    """μ^ε_{V,Γ} for a fixed state, mode subset and scale; Γ_V is computed once."""

    def __init__(self, state, modes, eps, threads=None):
        _check_scale(eps)
        self.modes = sorted(int(m) for m in modes)
        self.eps = float(eps)
        self.local = localize(state, self.modes, threads=threads)
        self.basis = self.local.basis
        self.dim = len(self.modes)
        self._live = [n for n in range(self.basis.N_max + 1) if np.isfinite(self.local.log_weights[n]).any()]

    def __repr__(self):
        return f"HusimiMeasure(modes={self.modes}, eps={self.eps:g}, N_max={self.basis.N_max})"

    def log_density(self, U):
        """log μ^ε(u) for a batch (S, d); exact for any u because Γ_V has no weight above N_max."""
        U = np.atleast_2d(np.asarray(U, dtype=complex))
        if U.shape[1] != self.dim:
            raise DimensionMismatchError(f"points have {U.shape[1]} coordinates, V has dimension {self.dim}")
        X = U / math.sqrt(self.eps)
        norm2 = np.sum(np.abs(X) ** 2, axis=1)
        parts = []
        with np.errstate(divide="ignore"):
            for n in self._live:
                log_mag, phase = coherent_log_coefficients(X, self.basis.sector(n))
                lw = self.local.log_weights[n]
                V = self.local.vectors[n]
                if V is None:
                    parts.append(logsumexp(2 * log_mag + lw, axis=1))
                    continue
                top = log_mag.max(axis=1, keepdims=True)
                C = np.exp(log_mag - top + 1j * phase)
                live = np.isfinite(lw)
                amp = np.abs(C @ V[:, live].conj()) ** 2 @ np.exp(lw[live])
                parts.append(2 * top[:, 0] + np.log(amp))
            total = logsumexp(np.vstack(parts), axis=0) if parts else np.full(U.shape[0], -np.inf)
        return total - norm2 - self.dim * math.log(self.eps * math.pi)

    def density(self, U):
        return np.exp(self.log_density(U))

    def at(self, u, guard=None):
        """Point query; |u/√ε|² must respect the coherent-state guard."""
        u = np.asarray(u, dtype=complex)
        guard = lab_setting("COHERENT_GUARD", guard)
        norm2 = float(np.vdot(u, u).real) / self.eps
        if norm2 > guard * max(self.basis.N_max, 1):
            raise CutoffError(f"|u|²/ε = {norm2:.3g} exceeds {guard:g}·N_max for this cutoff")
        return HusimiSample(u, float(self.density(u[None, :])[0]))

    def one_body(self):
        if self.basis.N_max < 1:
            return DensityMatrixK(1, self.dim, np.zeros((self.dim, self.dim)))
        return reduced_density_matrix(self.local, 1)

    def proposal(self, scale=1.0, floor=None):
        """CN(0, v_j) with v_j = max(scale·ε(Γ^(1)_jj + 1), floor); floor defaults to ε."""
        floor = self.eps if floor is None else float(floor)
        occupation = np.real(np.diag(self.one_body().matrix))
        variances = np.maximum(scale * self.eps * (occupation + 1.0), floor)
        if np.any(~np.isfinite(variances)) or np.any(variances <= 0):
            raise ProposalError(f"degenerate proposal variances {variances}")
        return GaussianMeasure(np.zeros(self.dim), variances, "husimi-proposal")


def husimi_density(state, modes, eps, u, guard=None):
    return HusimiMeasure(state, modes, eps).at(u, guard)


def _log_gaussian(q, U):
    return -np.sum(np.log(np.pi * q.variances)) - np.sum(np.abs(U) ** 2 / q.variances, axis=1)


def sample_pass(measure, config, plain=None, weighted=None, offset=0):
    """One importance-sampling pass over the proposal.

    ``plain`` observables are averaged as E_q[w f] (unbiased, w = μ/q); ``weighted`` ones as
    Σ w f / Σ w. The key "norm" always holds E_q[w], which estimates ∫dμ = 1.
    """
    q = measure.proposal(config.scale, config.floor)
    plain = plain or {}
    weighted = weighted or {}

    def evaluate(U):
        w = np.exp(measure.log_density(U) - _log_gaussian(q, U))
        out = {"norm": RunningMoments().update(w)}
        for name, fn in plain.items():
            f = fn(U)
            out[name] = RunningMoments().update(w.reshape((-1,) + (1,) * (f.ndim - 1)) * f)
        for name, fn in weighted.items():
            out[name] = WeightedMoments().update(w, fn(U))
        return out

    totals = {"norm": RunningMoments()}
    totals.update({name: RunningMoments() for name in plain})
    totals.update({name: WeightedMoments() for name in weighted})
    batches = q.batches(config.n_samples, config.seed, config.batch_size, offset=offset)
    for part in map_batches(evaluate, batches, config.threads):
        for name, acc in part.items():
            totals[name].absorb(acc)
    return totals


def normalization_mc(measure, config):
    """∫ dμ^ε; equals one (resolution of the identity)."""
    totals = sample_pass(measure, config)
    return totals["norm"].estimate(config.seed, RNG_ALGORITHM)


def _outer_products(k):
    def observable(U):
        c = symmetric_tensor_coefficients(U, k)
        return c[:, :, None] * c[:, None, :].conj()

    return observable


def husimi_moment_mc(state, modes, eps, k, config=None, measure=None):
    """∫ |u^{⊗k}⟩⟨u^{⊗k}| dμ^ε_{V,Γ}(u) on the orthonormal symmetric k-particle basis of V."""
    if k < 1:
        raise InvalidArgumentError(f"k must be positive, got {k}")
    config = config or SamplerConfig()
    measure = measure or HusimiMeasure(state, modes, eps, threads=config.threads)
    totals = sample_pass(measure, config, plain={"moment": _outer_products(k)})
    M = totals["moment"].mean
    result = DensityMatrixK(k, measure.dim, 0.5 * (M + M.conj().T), np.asarray(totals["moment"].stderr))
    result.meta = {
        "n_samples": config.n_samples,
        "seed": config.seed,
        "rng_algorithm": RNG_ALGORITHM,
        "eps": measure.eps,
        "modes": measure.modes,
        "normalization": totals["norm"].estimate(config.seed, RNG_ALGORITHM).to_json(),
    }
    return result


def _local_dm(local, ell):
    if ell == 0:
        return np.array([[local.total_mass]], dtype=complex)
    if ell > local.basis.N_max:
        D = sector_occupations(local.basis.J, ell).shape[0]
        return np.zeros((D, D), dtype=complex)
    return reduced_density_matrix(local, ell).matrix


def _lifted_terms(local, k):
    """Sector-k blocks of the second quantisations of Γ_V^(ℓ), ℓ = 0..k: C(k,ℓ) Γ_V^(ℓ) ⊗_s 1."""
    sector_k = build_basis(local.basis.J, k)
    return [k_body_op(sector_k, _local_dm(local, ell), ell, threads=1).sector_block(k) for ell in range(k + 1)]


def husimi_identity_rhs(state, modes, eps, k, local=None):
    """k! ε^k Σ_{ℓ=0}^k C(k,ℓ) Γ_V^(ℓ) ⊗_s 1_{k-ℓ}."""
    _check_scale(eps)
    if k < 1:
        raise InvalidArgumentError(f"k must be positive, got {k}")
    local = local or localize(state, modes)
    total = sum(_lifted_terms(local, k))
    return DensityMatrixK(k, local.basis.J, math.factorial(k) * eps**k * total)


def quantitative_bound(state, modes, eps, k, local=None):
    """Trace-norm gap between k!ε^kΓ_V^(k) and ∫|u^{⊗k}⟩⟨u^{⊗k}|dμ^ε, exactly and via two upper bounds.

    trace_norm      ‖RHS - k!ε^kΓ_V^(k)‖₁ computed from the matrices
    exact           k!ε^k Σ_{ℓ<k} tr(C(k,ℓ) Γ_V^(ℓ) ⊗_s 1)
    dimension_bound k!ε^k Σ_{ℓ<k} C(k,ℓ) C(k-ℓ+d-1, d-1) tr Γ_V^(ℓ)
    number_bound    ε^k Σ_{ℓ<k} C(k,ℓ)² (k-ℓ+d-1)!/(d-1)! tr[N^ℓ Γ_V]
    """
    _check_scale(eps)
    local = local or localize(state, modes)
    d = local.basis.J
    terms = _lifted_terms(local, k)
    prefactor = math.factorial(k) * eps**k
    gap = prefactor * (sum(terms) - _local_dm(local, k))
    exact = prefactor * sum(float(np.trace(t).real) for t in terms[:k])
    dimension = prefactor * sum(
        math.comb(k, ell) * math.comb(k - ell + d - 1, d - 1) * float(np.trace(_local_dm(local, ell)).real)
        for ell in range(k)
    )
    number = eps**k * sum(
        math.comb(k, ell) ** 2
        * math.exp(gammaln(k - ell + d) - gammaln(d))
        * local.number_moment(ell)
        for ell in range(k)
    )
    return {
        "trace_norm": schatten_norm(gap, 1),
        "exact": exact,
        "dimension_bound": dimension,
        "number_bound": number,
    }


def moment_estimates(state, modes, eps, s_max, config=None, measure=None):
    """∫‖u‖^{2s} dμ^ε for s = 1..s_max against tr of the identity right side and ε^s tr[N^s Γ_V]."""
    config = config or SamplerConfig()
    measure = measure or HusimiMeasure(state, modes, eps, threads=config.threads)
    observables = {s: (lambda U, s=s: np.sum(np.abs(U) ** 2, axis=1) ** s) for s in range(1, s_max + 1)}
    totals = sample_pass(measure, config, plain=observables)
    rows = []
    for s in range(1, s_max + 1):
        estimate = totals[s].estimate(config.seed, RNG_ALGORITHM)
        exact = husimi_identity_rhs(None, measure.modes, eps, s, local=measure.local).trace
        rows.append(
            {
                "s": s,
                "estimate": estimate.real,
                "stderr": estimate.stderr,
                "exact": exact,
                "number_moment": measure.local.number_moment(s, scale=1.0 / eps),
            }
        )
    return rows


@dataclass
class TestFunction:
    """A bounded function b on V with its sup norm."""

    name: str
    fn: object
    sup_norm: float

    def __call__(self, U):
        return self.fn(U)


def gaussian_test_function(width=1.0):
    return TestFunction(f"gaussian-{width:g}", lambda U: np.exp(-np.sum(np.abs(U) ** 2, axis=1) / width), 1.0)


def clipped_monomial(mode=0, radius=4.0):
    """b(u) = min(|u_mode|², R)."""
    name = f"clipped-|u{mode}|^2-{radius:g}"
    return TestFunction(name, lambda U: np.minimum(np.abs(U[:, mode]) ** 2, radius), radius)


def constant_test_function(value=1.0):
    return TestFunction(f"constant-{value:g}", lambda U: np.full(U.shape[0], float(value)), abs(value))


def default_test_functions():
    return [
        constant_test_function(),
        gaussian_test_function(1.0),
        gaussian_test_function(4.0),
        clipped_monomial(0, 4.0),
    ]


def anti_wick_expectation(state, modes, eps, b, config=None, measure=None, sup_norm=None):
    """tr[B_ε Γ] = ∫ b dμ^ε_{V,Γ}, estimated self-normalised so that |result| <= sup|b|."""
    config = config or SamplerConfig()
    measure = measure or HusimiMeasure(state, modes, eps, threads=config.threads)
    totals = sample_pass(measure, config, weighted={"b": b})
    estimate = totals["b"].estimate(config.seed, RNG_ALGORITHM)
    bound = sup_norm if sup_norm is not None else getattr(b, "sup_norm", None)
    if bound is not None and abs(estimate.value) > bound * (1 + 1e-12):
        raise InvalidArgumentError(f"test function exceeds its declared sup norm {bound}")
    return estimate


@dataclass
class BerezinLiebResult:
    quantum: float
    classical: float
    stderr: float
    margin: float
    passed: bool

    def to_json(self):
        return {
            "quantum": self.quantum,
            "classical": self.classical,
            "stderr": self.stderr,
            "margin": self.margin,
            "passed": self.passed,
        }


def classical_relative_entropy_mc(measure, other, config):
    """H_cl(μ, μ') = E_μ[log(μ/μ')] with exact densities; INFINITE_ENTROPY if μ' vanishes on a sample."""
    leaked = []

    def log_ratio(U):
        first, second = measure.log_density(U), other.log_density(U)
        bad = np.isinf(second) & np.isfinite(first)
        leaked.append(bool(bad.any()))
        ratio = np.where(bad | np.isinf(first), 0.0, first - second)
        return ratio

    totals = sample_pass(measure, config, weighted={"ratio": log_ratio})
    if any(leaked):
        return MCEstimate(INFINITE_ENTROPY, 0.0, config.n_samples, config.seed, RNG_ALGORITHM)
    return totals["ratio"].estimate(config.seed, RNG_ALGORITHM)


def berezin_lieb_check(state, other, modes, eps, config=None, tol=0.0):
    """H(Γ_V, Γ'_V) >= H_cl(μ^ε_Γ, μ^ε_Γ') with the classical side estimated by Monte Carlo."""
    config = config or SamplerConfig()
    first = HusimiMeasure(state, modes, eps, threads=config.threads)
    second = HusimiMeasure(other, modes, eps, threads=config.threads)
    quantum = relative_entropy(first.local, second.local)
    classical = classical_relative_entropy_mc(first, second, config)
    if math.isinf(classical.real):
        # μ' vanishing on the support of μ makes the classical side infinite; nothing to compare
        result = BerezinLiebResult(quantum, INFINITE_ENTROPY, 0.0, math.inf, True)
    else:
        margin = quantum - classical.real
        passed = margin >= -3 * classical.stderr - tol
        result = BerezinLiebResult(quantum, classical.real, classical.stderr, margin, passed)
    if not result.passed:
        logger.warning("Berezin-Lieb margin=%.3e stderr=%.2e eps=%g", result.margin, result.stderr, eps)
    return result


def radial_relative_entropy(state, other):
    """Single-mode classical relative entropy of Husimi measures of diagonal states, by quadrature.

    With t = |u|²/ε both densities are e^{-t} P(t)/(επ) with P(t) = Σ_n p_n t^n/n!, so the
    scale ε drops out.
    """
    if state.basis.J != 1 or other.basis.J != 1:
        raise DimensionMismatchError("radial quadrature needs single-mode states")
    if any(V is not None for V in state.vectors + other.vectors):
        raise InvalidArgumentError("radial quadrature needs states diagonal in the occupation basis")
    n = np.arange(state.basis.N_max + 1)
    lp = np.concatenate(state.log_weights) - gammaln(n + 1)
    lq = np.concatenate(other.log_weights) - gammaln(n + 1)

    def integrand(t):
        log_t = math.log(t) if t > 0 else -np.inf
        with np.errstate(invalid="ignore"):
            a = logsumexp(lp + np.where(n > 0, n * log_t, 0.0))
            b = logsumexp(lq + np.where(n > 0, n * log_t, 0.0))
        if not np.isfinite(a):
            return 0.0
        return math.exp(a - t) * (a - b)

    value, _ = integrate.quad(integrand, 0, math.inf, limit=400, epsabs=1e-12)
    return value


def cylindrical_check(state, outer, inner, eps, config=None, k_max=2, sigmas=3.0):
    """Project the Husimi measure on ``outer`` onto ``inner`` ⊂ ``outer`` and compare moments up to order k_max."""
    outer, inner = sorted(outer), sorted(inner)
    if not set(inner) <= set(outer):
        raise InvalidArgumentError(f"{inner} is not a subset of {outer}")
    config = config or SamplerConfig()
    positions = [outer.index(m) for m in inner]
    big = HusimiMeasure(state, outer, eps, threads=config.threads)
    small = HusimiMeasure(state, inner, eps, threads=config.threads)
    rows = []
    for k in range(1, k_max + 1):
        projected = husimi_moment_mc(None, outer, eps, k, config, measure=big)
        projected_sub = projected.submatrix(positions)
        projected_err = DensityMatrixK(k, len(outer), projected.stderr).submatrix(positions).matrix.real
        direct = husimi_moment_mc(None, inner, eps, k, config.with_seed(config.seed + 1), measure=small)
        gap = np.abs(projected_sub.matrix - direct.matrix)
        sigma = np.hypot(projected_err, direct.stderr)
        rows.append(
            {
                "k": k,
                "max_gap": float(gap.max()),
                "max_sigma": float(sigma.max()),
                "passed": bool(np.all(gap <= sigmas * sigma + 1e-12)),
            }
        )
    return rows
