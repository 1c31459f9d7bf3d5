"""Coherent states ξ(u) = W(u)Ω on the truncated Fock space.

On sector n, ξ(u) has coefficient e^{-|u|²/2} u^α / sqrt(α!) on the occupation vector α.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats
from scipy.special import gammaln

from classical.estimates import RunningMoments
from classical.measure import gaussian_batches, map_batches, relative_partition_mc
from common.conf import lab_setting
from common.exceptions import BasisTooLargeError, CutoffError, DimensionMismatchError, InvalidArgumentError
from fock.kernels import TwoBodyKernel
from fock.operators import annihilation_field, creation_field
from gibbs.states import dephased_pure_state

logger = logging.getLogger(__name__)

# stands in for |u_j| = 0; log(_TINY) is only ever multiplied by a positive occupation
_TINY = 1e-300


def coherent_log_coefficients(U, occ):
    """(log|c|, arg c) of u^α / sqrt(α!) for a batch U (S, J) against occupations occ (d, J).

    The e^{-|u|²/2} prefactor is left out.
    """
    U = np.atleast_2d(np.asarray(U, dtype=complex))
    logr = np.log(np.maximum(np.abs(U), _TINY))
    log_mag = logr @ occ.T - 0.5 * gammaln(occ + 1).sum(axis=1)
    phase = np.angle(U) @ occ.T
    return log_mag, phase


def coherent_coefficients(U, occ):
    """e^{-|u|²/2} u^α / sqrt(α!) for every row of U, shape (S, d)."""
    U = np.atleast_2d(np.asarray(U, dtype=complex))
    log_mag, phase = coherent_log_coefficients(U, occ)
    norm2 = np.sum(np.abs(U) ** 2, axis=1)
    return np.exp(log_mag - 0.5 * norm2[:, None] + 1j * phase)


def poisson_tail(norm2, N_max):
    """Σ_{n > N_max} e^{-|u|²}|u|^{2n}/n!."""
    return float(stats.poisson.sf(N_max, norm2))


@dataclass
class CoherentVector:
    basis: object
    amplitude: np.ndarray
    sectors: list
    tail_norm: float

    @property
    def norm2(self):
        return float(np.vdot(self.amplitude, self.amplitude).real)

    @property
    def retained_norm(self):
        return math.sqrt(sum(float(np.vdot(c, c).real) for c in self.sectors))

    def sector_weights(self):
        return np.array([float(np.vdot(c, c).real) for c in self.sectors])

    def as_vector(self):
        return np.concatenate(self.sectors)

    def as_state(self, label="coherent"):
        """The N-diagonal part Σ_n |ξ_n⟩⟨ξ_n|; it carries the same Γ^(k) and Husimi function."""
        return dephased_pure_state(self.basis, self.sectors, label=label)


def _check_guard(basis, norm2, guard):
    guard = lab_setting("COHERENT_GUARD", guard)
    if norm2 > guard * max(basis.N_max, 1):
        raise CutoffError(f"|u|² = {norm2:.3g} exceeds {guard:g}·N_max = {guard * basis.N_max:.3g}")


def coherent_vector(basis, u, guard=None):
    u = np.asarray(u, dtype=complex)
    if u.shape != (basis.J,):
        raise DimensionMismatchError(f"amplitude has shape {u.shape}, basis has {basis.J} modes")
    if not np.all(np.isfinite(u)):
        raise InvalidArgumentError("amplitude must be finite")
    norm2 = float(np.vdot(u, u).real)
    _check_guard(basis, norm2, guard)
    sectors = [coherent_coefficients(u, basis.sector(n))[0] for n in range(basis.N_max + 1)]
    return CoherentVector(basis, u, sectors, poisson_tail(norm2, basis.N_max))


def eigenrelation_deviation(vector, g):
    """max |a(g)ξ(u) - ⟨g,u⟩ξ(u)| on sectors below the cutoff."""
    a = annihilation_field(vector.basis, g)
    image = a.apply(vector.sectors)
    overlap = np.vdot(g, vector.amplitude)
    worst = 0.0
    for n in range(vector.basis.N_max):
        worst = max(worst, float(np.abs(image[n] - overlap * vector.sectors[n]).max(initial=0.0)))
    return worst


def weyl_operator(basis, f):
    """Dense exp(a†(f) - a(f)) on the truncated space."""
    limit = lab_setting("DENSE_BLOCK_LIMIT")
    if basis.size > limit:
        raise BasisTooLargeError(f"dense Weyl operator needs basis size {basis.size} <= {limit}")
    generator = (creation_field(basis, f) - annihilation_field(basis, f)).to_dense()
    return linalg.expm(generator)


def weyl_action_check(basis, f, g):
    """max deviation of W(f)† a†(g) W(f) from a†(g) + ⟨f,g⟩ on the lowest quarter of the sectors."""
    f = np.asarray(f, dtype=complex)
    if np.linalg.norm(f) > math.sqrt(basis.N_max) / 4:
        raise CutoffError(f"|f| = {np.linalg.norm(f):.3g} exceeds sqrt(N_max)/4 = {math.sqrt(basis.N_max) / 4:.3g}")
    W = weyl_operator(basis, f)
    ad = creation_field(basis, g).to_dense()
    lhs = W.conj().T @ ad @ W
    rhs = ad + np.vdot(f, g) * np.eye(basis.size)
    safe = basis.offsets[basis.N_max // 4 + 1]
    deviation = float(np.abs(lhs - rhs)[:safe, :safe].max())
    logger.debug("Weyl action check |f|=%.3g deviation=%.3e", np.linalg.norm(f), deviation)
    return deviation


def resolution_of_identity_mc(basis, n_samples, seed=None, variance=None, batch_size=None, threads=None):
    """π^{-J} ∫ |ξ(u)⟩⟨ξ(u)| du = 1, estimated with a CN(0, variance) proposal.

    Returns (mean, stderr) as dense matrices on the full truncated basis.
    """
    seed = lab_setting("DEFAULT_SEED", seed)
    # every sample carries a size × size outer product
    batch_size = min(lab_setting("MC_BATCH_SIZE", batch_size), 4096)
    variance = float(basis.N_max + 1) if variance is None else float(variance)
    occ = basis.all_occupations()

    def evaluate(U):
        norm2 = np.sum(np.abs(U) ** 2, axis=1)
        # π^{-J} / q(u) with q the CN(0, variance) density
        w = variance**basis.J * np.exp(norm2 / variance)
        C = coherent_coefficients(U, occ)
        return RunningMoments().update(w[:, None, None] * C[:, :, None] * C[:, None, :].conj())

    total = RunningMoments()
    batches = gaussian_batches(np.full(basis.J, variance), n_samples, seed, batch_size)
    for part in map_batches(evaluate, batches, threads):
        total.absorb(part)
    return total.mean, total.stderr


def coherent_lower_bound(spectrum, kernel, T, coupling, n_samples, seed=None, batch_size=None, threads=None):
    """Coherent-state trial bound log Z_λ >= log[(T/π)^J ∫ e^{-⟨u,hu⟩ - (λT/2)⟨u⊗u,w u⊗u⟩} du].

    The exponent is the Weyl expectation, so the ½ stays whatever the interaction convention.
    Returns (log value, stderr of the log).
    """
    J = spectrum.mode_count
    base = J * math.log(T) - float(np.sum(np.log(spectrum.as_array())))
    if coupling == 0 or kernel.is_zero():
        return base, 0.0
    scaled = TwoBodyKernel(J, coupling * T * kernel.coefficients, f"{kernel.label}|λT", kernel.psd_certificate)
    estimate = relative_partition_mc(spectrum, scaled, n_samples, seed, batch_size, threads, convention="half")
    return base + math.log(estimate.real), estimate.stderr / estimate.real
