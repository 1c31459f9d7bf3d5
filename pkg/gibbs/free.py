"""Closed forms for the free (quasi-free) Gibbs state Γ_{0,T} and the adaptive cutoff policy."""

import itertools
import logging
import math

import numpy as np

from common.conf import lab_setting
from common.exceptions import CutoffError, InvalidArgumentError
from fock.basis import build_basis, sector_occupations
from fock.operators import dGamma_op, word_block

from .density_matrices import diagonal_dm, schatten_norm
from .states import gibbs_state

logger = logging.getLogger(__name__)


def _check_temperature(T):
    if not T > 0:
        raise InvalidArgumentError(f"temperature must be positive, got {T}")


def occupation_means(spectrum, T):
    """n̄_j = 1/(e^{λ_j/T} - 1)."""
    _check_temperature(T)
    return 1.0 / np.expm1(spectrum.as_array() / T)


def free_partition_closed_form(spectrum, T):
    """log Z_0 = -Σ_j log(1 - e^{-λ_j/T})."""
    _check_temperature(T)
    return float(-np.sum(np.log(-np.expm1(-spectrum.as_array() / T))))


def free_dm_closed_form(spectrum, T, k):
    """Diagonal Γ_0^(k) with entry Π_i n̄_i^{m_i} on the multiset m."""
    occ = sector_occupations(spectrum.mode_count, k)
    nbar = occupation_means(spectrum, T)
    return diagonal_dm(spectrum.mode_count, k, np.prod(nbar**occ, axis=1))


def classical_free_dm(spectrum, k):
    """γ_0^(k) = k! (h^{-1})^{⊗k} on the symmetric space: entry k! Π_i λ_i^{-m_i}."""
    occ = sector_occupations(spectrum.mode_count, k)
    return diagonal_dm(spectrum.mode_count, k, math.factorial(k) * np.prod(spectrum.as_array() ** (-occ), axis=1))


def free_dm_distance(spectrum, T, k, p=1):
    """‖k! T^{-k} Γ_{0,T}^(k) - γ_0^(k)‖_p in closed form (both sides diagonal)."""
    quantum = free_dm_closed_form(spectrum, T, k).scaled(math.factorial(k) / T**k)
    return schatten_norm(quantum.matrix - classical_free_dm(spectrum, k).matrix, p)


def free_sector_law(spectrum, T, N_max):
    """P(N = n) for n <= N_max under the untruncated free state (convolution of geometric laws)."""
    _check_temperature(T)
    n = np.arange(N_max + 1)
    law = np.zeros(N_max + 1)
    law[0] = 1.0
    for lam in spectrum.as_array():
        q = math.exp(-lam / T)
        geometric = -math.expm1(-lam / T) * q**n
        law = np.convolve(law, geometric)[: N_max + 1]
    return law


def free_tail(spectrum, T, N_max):
    """P(N >= N_max) under the untruncated free state."""
    law = free_sector_law(spectrum, T, N_max)
    return max(0.0, 1.0 - float(law[:-1].sum()))


def adaptive_cutoff(spectrum, T, threshold=None, start=8):
    """Smallest N_max whose free tail P(N >= N_max) is below ``threshold``."""
    threshold = lab_setting("FREE_TAIL_THRESHOLD", threshold)
    guess = max(start, 1)
    while True:
        law = free_sector_law(spectrum, T, guess)
        survival = 1.0 - np.cumsum(law)
        # survival[m] = P(N > m) = P(N >= m + 1)
        hits = np.flatnonzero(survival < threshold)
        if hits.size:
            N_max = int(hits[0]) + 1
            logger.info("adaptive cutoff T=%g threshold=%.1e N_max=%d", T, threshold, N_max)
            return N_max
        guess *= 2
        if guess > 10**6:
            raise CutoffError(f"no cutoff below 10^6 reaches free tail {threshold}")


def free_gibbs_state(spectrum, T, N_max=None, threads=None):
    if N_max is None:
        N_max = adaptive_cutoff(spectrum, T)
    basis = build_basis(spectrum.mode_count, N_max)
    return gibbs_state(dGamma_op(basis, spectrum), T, threads=threads)


def _compositions(total, parts):
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        edges = (-1,) + cut + (total + parts - 1,)
        yield tuple(edges[i + 1] - edges[i] - 1 for i in range(parts))


def _check_powers(powers, k):
    powers = tuple(int(x) for x in powers)
    if any(x < 0 for x in powers) or k < 0:
        raise InvalidArgumentError(f"moment powers must be nonnegative, got n={powers}, k={k}")
    return powers


def tilted_moment(spectrum, T, powers, k):
    """Σ_{|s|=k} Π_j (n_j+s_j)! / (T(e^{λ_j/T}-1))^{n_j+s_j}."""
    powers = _check_powers(powers, k)
    _check_temperature(T)
    scale = T * np.expm1(spectrum.as_array() / T)
    return _moment_sum(scale, powers, k)


def tilted_moment_limit(spectrum, powers, k):
    """T → ∞ value Σ_{|s|=k} Π_j (n_j+s_j)! / λ_j^{n_j+s_j}."""
    powers = _check_powers(powers, k)
    return _moment_sum(spectrum.as_array(), powers, k)


def _moment_sum(scale, powers, k):
    total = 0.0
    for s in _compositions(k, len(powers)):
        term = 1.0
        for j, (n_j, s_j) in enumerate(zip(powers, s)):
            m = n_j + s_j
            term *= math.factorial(m) / scale[j] ** m
        total += term
    return total


def normal_ordered_moment(state, exponents):
    """tr[Π_j a_j†^{m_j} a_j^{m_j} Γ] = Σ_n Σ_r w_r ‖a^m v_r‖²."""
    basis = state.basis
    m = np.asarray(exponents, dtype=np.int64)
    zero = np.zeros(basis.J, dtype=np.int64)
    total = 0.0
    for n in range(int(m.sum()), basis.N_max + 1):
        w = state.weights(n)
        if not np.any(w):
            continue
        A = word_block(basis, n, zero, m)
        if A is None:
            continue
        V = state.vectors[n]
        if V is None:
            col = np.asarray(abs(A).power(2).sum(axis=0)).ravel()
            total += float(np.dot(col, w))
        else:
            AV = A @ V
            total += float(np.dot(np.sum(np.abs(AV) ** 2, axis=0), w))
    return total


def tilted_moment_trace(state, T, powers, k):
    """Direct trace Σ_{|s|=k} tr[Π_j a_j†^{m_j} a_j^{m_j} Γ] / T^{|m|} with m = n + s."""
    powers = _check_powers(powers, k)
    if len(powers) != state.basis.J:
        raise InvalidArgumentError(f"need one power per mode, got {len(powers)} for J={state.basis.J}")
    total = 0.0
    for s in _compositions(k, len(powers)):
        m = [n_j + s_j for n_j, s_j in zip(powers, s)]
        total += normal_ordered_moment(state, m) / T ** sum(m)
    return total
