"""N-commuting mixed states on a truncated Fock space and the grand-canonical Gibbs state."""

import logging

import numpy as np
from scipy import linalg, sparse
from scipy.special import logsumexp

from common.conf import lab_setting
from common.exceptions import BasisTooLargeError, DimensionMismatchError, InvalidArgumentError, NotHermitianError
from common.parallel import ordered_map
from fock.basis import build_basis

logger = logging.getLogger(__name__)


class QuantumState:
    """Γ = ⊕_n G_n with G_n = V_n diag(w_n) V_n†.

    Weights are kept as logarithms so that Gibbs weights far below machine range stay exact.
    ``vectors[n] is None`` means the occupation basis itself diagonalises G_n.
    """

    def __init__(self, basis, log_weights, vectors, log_partition=None, label=""):
        if len(log_weights) != basis.N_max + 1 or len(vectors) != basis.N_max + 1:
            raise DimensionMismatchError("state needs one block per sector")
        self.basis = basis
        self.log_weights = [np.asarray(lw, dtype=float) for lw in log_weights]
        self.vectors = vectors
        self.log_partition = log_partition
        self.label = label

    def __repr__(self):
        return f"QuantumState({self.basis!r}, label={self.label!r}, tail={self.tail:.3e})"

    def weights(self, n):
        return np.exp(self.log_weights[n])

    def eigvecs(self, n):
        V = self.vectors[n]
        return np.eye(self.basis.dims[n]) if V is None else V

    @property
    def probabilities(self):
        return np.array([self.weights(n).sum() for n in range(self.basis.N_max + 1)])

    @property
    def total_mass(self):
        return float(self.probabilities.sum())

    @property
    def tail(self):
        """Mass on the top sector; small values certify the cutoff."""
        return float(self.weights(self.basis.N_max).sum())

    def block(self, n):
        w = self.weights(n)
        V = self.vectors[n]
        if V is None:
            return np.diag(w).astype(complex)
        return (V * w) @ V.conj().T

    def sector_expectation(self, n, B):
        """tr(B G_n) for a (possibly sparse) operator block B on sector n."""
        w = self.weights(n)
        V = self.vectors[n]
        if V is None:
            return complex(np.dot(np.asarray(B.diagonal()), w))
        BV = B @ V
        return complex(np.einsum("ir,ir,r->", V.conj(), BV, w))

    def expectation(self, op):
        """tr(op Γ) for an operator that is block-diagonal in N."""
        if op.shift not in (0, None):
            return 0.0
        total = 0.0
        for n in range(self.basis.N_max + 1):
            if (n, n) in op.blocks:
                total += self.sector_expectation(n, op.blocks[(n, n)])
        return total

    def number_moment(self, k, scale=1.0):
        """tr[(N/scale)^k Γ]."""
        n = np.arange(self.basis.N_max + 1, dtype=float)
        return float(np.dot(self.probabilities, (n / scale) ** k))

    def entropy(self):
        total = 0.0
        for n in range(self.basis.N_max + 1):
            lw = self.log_weights[n]
            finite = np.isfinite(lw)
            total -= float(np.dot(np.exp(lw[finite]), lw[finite]))
        return total

    def hermitian_blocks(self):
        return [self.block(n) for n in range(self.basis.N_max + 1)]

    def to_json(self):
        sectors = []
        for n in range(self.basis.N_max + 1):
            G = self.block(n)
            sectors.append({"n": n, "real": G.real.tolist(), "imag": G.imag.tolist()})
        return {
            "basis": {"J": self.basis.J, "N_max": self.basis.N_max},
            "label": self.label,
            "log_partition": self.log_partition,
            "sectors": sectors,
        }

    @classmethod
    def from_json(cls, payload):
        basis = build_basis(payload["basis"]["J"], payload["basis"]["N_max"])
        blocks = [np.asarray(s["real"]) + 1j * np.asarray(s["imag"]) for s in payload["sectors"]]
        state = state_from_blocks(basis, blocks, label=payload.get("label", ""))
        state.log_partition = payload.get("log_partition")
        return state


def _log(w):
    with np.errstate(divide="ignore"):
        return np.log(w)


def state_from_blocks(basis, blocks, label="", normalize=False, threads=None):
    """Eigendecompose Hermitian PSD blocks G_n; tiny negative eigenvalues are clipped to zero."""

    def decompose(G):
        G = np.asarray(G)
        w, V = linalg.eigh(0.5 * (G + G.conj().T))
        return np.clip(w, 0.0, None), V

    pieces = ordered_map(decompose, blocks, threads)
    weights = [w for w, _ in pieces]
    if normalize:
        total = sum(w.sum() for w in weights)
        weights = [w / total for w in weights]
    return QuantumState(basis, [_log(w) for w in weights], [V for _, V in pieces], label=label)


def _is_diagonal(block):
    return sparse.triu(block, 1).count_nonzero() == 0 and sparse.tril(block, -1).count_nonzero() == 0


def gibbs_state(H, T, threads=None, tol=None):
    """e^{-H/T}/Z from per-sector eigendecompositions; log Z is reduced in ascending n."""
    if not T > 0:
        raise InvalidArgumentError(f"temperature must be positive, got {T}")
    if H.shift != 0:
        raise InvalidArgumentError("Gibbs states need a Hamiltonian that commutes with N")
    defect = H.hermitian_defect()
    if defect > lab_setting("HERMITIAN_TOL", tol):
        raise NotHermitianError(f"Hamiltonian is not Hermitian (defect {defect:.3e})")
    basis = H.basis
    limit = lab_setting("DENSE_BLOCK_LIMIT")

    def diagonalise(n):
        block = H.block(n, n)
        if _is_diagonal(block):
            return np.real(block.diagonal()), None
        if basis.dims[n] > limit:
            raise BasisTooLargeError(f"sector {n} has dimension {basis.dims[n]} > dense limit {limit}")
        dense = block.toarray()
        if not np.iscomplexobj(dense) or not np.any(dense.imag):
            dense = dense.real
        E, V = linalg.eigh(dense)
        return E, V

    pieces = ordered_map(diagonalise, range(basis.N_max + 1), threads)
    log_unnormalised = [-E / T for E, _ in pieces]
    log_z = float(logsumexp(np.concatenate(log_unnormalised)))
    state = QuantumState(
        basis,
        [lw - log_z for lw in log_unnormalised],
        [V for _, V in pieces],
        log_partition=log_z,
        label=f"gibbs(T={T:g})",
    )
    logger.debug("gibbs state T=%g log_z=%.12g tail=%.3e", T, log_z, state.tail)
    return state


def vacuum_state(basis):
    log_weights = [np.full(d, -np.inf) for d in basis.dims]
    log_weights[0] = np.zeros(1)
    return QuantumState(basis, log_weights, [None] * (basis.N_max + 1), log_partition=0.0, label="vacuum")


def dephased_pure_state(basis, sector_vectors, label="pure"):
    """Σ_n |ψ_n⟩⟨ψ_n| for a vector given sector by sector (its N-diagonal part)."""
    log_weights, vectors = [], []
    for n, psi in enumerate(sector_vectors):
        psi = np.asarray(psi, dtype=complex)
        norm = np.linalg.norm(psi)
        if norm == 0:
            log_weights.append(np.array([-np.inf]))
            e = np.zeros((basis.dims[n], 1), dtype=complex)
            e[0, 0] = 1.0
            vectors.append(e)
        else:
            log_weights.append(np.array([2 * np.log(norm)]))
            vectors.append((psi / norm)[:, None])
    return QuantumState(basis, log_weights, vectors, label=label)


def random_unitary(d, rng):
    Z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_state(basis, rng, diagonal=False, rank=None, label="random"):
    """Random N-commuting state: Dirichlet sector weights and Haar eigenvectors per sector."""
    log_weights, vectors = [], []
    raw = [rng.gamma(1.0, size=d) for d in basis.dims]
    if rank is not None:
        for w in raw:
            w[rank:] = 0.0
    total = sum(w.sum() for w in raw)
    for n, w in enumerate(raw):
        log_weights.append(_log(w / total))
        vectors.append(None if diagonal else random_unitary(basis.dims[n], rng))
    return QuantumState(basis, log_weights, vectors, label=label)


def perturb_state(state, rng, scale=0.05):
    """Random Hermitian perturbation of every block, clipped to PSD and renormalised."""
    blocks = []
    for n in range(state.basis.N_max + 1):
        d = state.basis.dims[n]
        X = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        blocks.append(state.block(n) + scale * (X + X.conj().T) / (2 * d))
    return state_from_blocks(state.basis, blocks, label=f"{state.label}+perturbed", normalize=True)


def free_energy(state, H, T):
    """tr(HΓ) - T S(Γ); the Gibbs state minimises it with value -T log Z."""
    if state.basis != H.basis:
        raise DimensionMismatchError("state and Hamiltonian live on different bases")
    return float(np.real(state.expectation(H))) - T * state.entropy()
