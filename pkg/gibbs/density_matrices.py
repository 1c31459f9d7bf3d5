"""k-particle reduced density matrices Γ^(k) on the orthonormal symmetric k-particle basis.

Convention: ⟨e_α, Γ^(k) e_β⟩ = tr(a†^β a^α Γ) / sqrt(α! β!), so that tr Γ^(k) = E[C(N, k)].
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from common.conf import lab_setting
from common.exceptions import BasisTooLargeError, CutoffError, DimensionMismatchError
from fock.basis import sector_occupations, symmetric_embedding
from fock.operators import word_block

logger = logging.getLogger(__name__)

PARTIAL_TRACE_LIMIT = 4096


@dataclass
class DensityMatrixK:
    k: int
    J: int
    matrix: np.ndarray
    stderr: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        D = sector_occupations(self.J, self.k).shape[0]
        if self.matrix.shape != (D, D):
            raise DimensionMismatchError(f"Γ^({self.k}) on {self.J} modes must be {D}×{D}, got {self.matrix.shape}")

    @property
    def trace(self):
        return float(np.trace(self.matrix).real)

    @property
    def occupations(self):
        return sector_occupations(self.J, self.k)

    def hermitian_defect(self):
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def eigenvalues(self):
        return np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))

    def is_psd(self, tol=None):
        return self.eigenvalues().min() >= -lab_setting("PSD_TOL", tol)

    def scaled(self, factor):
        stderr = None if self.stderr is None else abs(factor) * self.stderr
        return DensityMatrixK(self.k, self.J, factor * self.matrix, stderr, dict(self.meta))

    def schatten_distance(self, other, p=1):
        if (other.k, other.J) != (self.k, self.J):
            raise DimensionMismatchError("density matrices of different order or mode count")
        return schatten_norm(self.matrix - other.matrix, p)

    def submatrix(self, modes):
        """P^{⊗k} Γ^(k) P^{⊗k} for the coordinate projection onto ``modes``, on the sub-basis."""
        modes = list(modes)
        occ = self.occupations
        sub_occ = sector_occupations(len(modes), self.k)
        full = np.zeros((sub_occ.shape[0], self.J), dtype=np.int64)
        full[:, modes] = sub_occ
        lookup = {tuple(row): i for i, row in enumerate(occ.tolist())}
        idx = [lookup[tuple(row)] for row in full.tolist()]
        return DensityMatrixK(self.k, len(modes), self.matrix[np.ix_(idx, idx)])

    def to_json(self):
        payload = {"k": self.k, "J": self.J, "real": self.matrix.real.tolist(), "imag": self.matrix.imag.tolist()}
        if self.stderr is not None:
            payload["stderr"] = np.asarray(self.stderr).tolist()
        if self.meta:
            payload["meta"] = self.meta
        return payload

    @classmethod
    def from_json(cls, payload):
        matrix = np.asarray(payload["real"]) + 1j * np.asarray(payload["imag"])
        stderr = np.asarray(payload["stderr"]) if "stderr" in payload else None
        return cls(payload["k"], payload["J"], matrix, stderr, payload.get("meta", {}))


def schatten_norm(A, p=1):
    """(tr|A|^p)^{1/p} through singular values; p = inf gives the operator norm."""
    s = np.linalg.svd(np.asarray(A), compute_uv=False)
    if np.isinf(p):
        return float(s.max(initial=0.0))
    return float(np.sum(s**p) ** (1.0 / p))


def diagonal_dm(J, k, entries):
    return DensityMatrixK(k, J, np.diag(np.asarray(entries, dtype=complex)))


def _factorials(occ):
    return np.array([math.prod(math.factorial(int(x)) for x in row) for row in occ], dtype=float)


def reduced_density_matrix(state, k):
    """Γ^(k) via annihilation words: Γ_{αβ} = Σ_n Σ_r w_r ⟨a^β v_r, a^α v_r⟩ / sqrt(α! β!)."""
    basis = state.basis
    if k < 0 or k > basis.N_max:
        raise CutoffError(f"k={k} outside 0..{basis.N_max}")
    occ_k = sector_occupations(basis.J, k)
    D = occ_k.shape[0]
    out = np.zeros((D, D), dtype=complex)
    zero = np.zeros(basis.J, dtype=np.int64)
    for n in range(k, basis.N_max + 1):
        w = state.weights(n)
        if not np.any(w):
            continue
        stack = [word_block(basis, n, zero, alpha) for alpha in occ_k]
        stack = [
            b if b is not None else sparse.csr_array((basis.dims[n - k], basis.dims[n]), dtype=complex) for b in stack
        ]
        A = sparse.vstack(stack, format="csr")
        V = state.vectors[n]
        if V is None:
            M = (A @ sparse.diags_array(np.sqrt(w))).toarray()
        else:
            M = A @ (V * np.sqrt(w))
        M = np.asarray(M).reshape(D, basis.dims[n - k], -1)
        out += np.einsum("axr,bxr->ab", M, M.conj())
    norms = np.sqrt(_factorials(occ_k))
    return DensityMatrixK(k, basis.J, out / np.outer(norms, norms))


def reduced_density_matrix_partial_trace(state, k, limit=PARTIAL_TRACE_LIMIT):
    """Γ^(k) = Σ_{n>=k} C(n,k) tr_{k+1→n}(G_n), computed on explicit tensor powers ⊗^n C^J."""
    basis = state.basis
    if k < 0 or k > basis.N_max:
        raise CutoffError(f"k={k} outside 0..{basis.N_max}")
    J = basis.J
    if J**basis.N_max > limit:
        raise BasisTooLargeError(f"partial-trace route needs J^N_max = {J**basis.N_max} <= {limit}")
    Ek = symmetric_embedding(J, k).toarray()
    out = np.zeros((Ek.shape[1], Ek.shape[1]), dtype=complex)
    for n in range(k, basis.N_max + 1):
        if not np.any(state.weights(n)):
            continue
        En = symmetric_embedding(J, n).toarray()
        G = En @ state.block(n) @ En.T
        G = G.reshape(J**k, J ** (n - k), J**k, J ** (n - k))
        partial = np.einsum("aibi->ab", G)
        out += math.comb(n, k) * (Ek.T @ partial @ Ek)
    return DensityMatrixK(k, J, out)


def interaction_energy(gamma2, kernel):
    """tr(w Γ^(2)) on the symmetric pair space."""
    if gamma2.k != 2 or gamma2.J != kernel.J:
        raise DimensionMismatchError("interaction energy needs Γ^(2) on the kernel's modes")
    return float(np.real(np.trace(kernel.symmetric_matrix() @ gamma2.matrix)))


def expected_binomial(state, k):
    """E[C(N, k)] over the sector law; equals tr Γ^(k)."""
    n = np.arange(state.basis.N_max + 1)
    return float(np.dot(state.probabilities, [math.comb(int(m), k) for m in n]))
