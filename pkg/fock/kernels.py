"""Two-body interaction kernels w, stored in the product mode basis φ_a ⊗ φ_b."""

import itertools
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from common.conf import lab_setting
from common.exceptions import DimensionMismatchError, KernelError

from .basis import sector_occupations, symmetric_embedding

logger = logging.getLogger(__name__)

DELTA = "delta"
FINITE_RANK = "finite_rank"
RANK_ONE = "rank_one"
ZERO = "zero"
KERNEL_TYPES = (DELTA, FINITE_RANK, RANK_ONE, ZERO)


@dataclass(frozen=True, eq=False)
class TwoBodyKernel:
    """W_{(a,b),(c,d)} = ⟨φ_a ⊗ φ_b, w φ_c ⊗ φ_d⟩ as a complex (J, J, J, J) array."""

    J: int
    coefficients: np.ndarray
    label: str = "custom"
    psd_certificate: bool = field(default=False)

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=complex)
        if coeffs.shape != (self.J,) * 4:
            raise DimensionMismatchError(f"kernel coefficients must have shape {(self.J,) * 4}, got {coeffs.shape}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    def matrix(self):
        """J² × J² matrix on the product pair space, row (a,b) ↦ a·J + b."""
        return self.coefficients.reshape(self.J**2, self.J**2)

    def symmetric_matrix(self):
        """S† W S on the orthonormal symmetric pair basis (sector-2 order)."""
        S = symmetric_embedding(self.J, 2).toarray()
        return S.T @ self.matrix() @ S

    def symmetry_defect(self):
        """max of the exchange and Hermiticity violations."""
        W = self.coefficients
        exchange = np.abs(W - W.transpose(1, 0, 3, 2)).max()
        hermitian = np.abs(W - W.transpose(2, 3, 0, 1).conj()).max()
        return float(max(exchange, hermitian))

    def min_eigenvalue(self):
        w_sym = self.symmetric_matrix()
        return float(np.linalg.eigvalsh(0.5 * (w_sym + w_sym.conj().T)).min())

    def is_zero(self):
        return not np.any(self.coefficients)

    def nonzero_entries(self):
        idx = np.argwhere(self.coefficients != 0)
        return [(tuple(int(x) for x in row), self.coefficients[tuple(row)]) for row in idx]

    def pair_energy(self, u):
        """⟨u⊗u, W u⊗u⟩ for one J-vector or a batch (S, J)."""
        u = np.asarray(u, dtype=complex)
        pair = (u[..., :, None] * u[..., None, :]).reshape(*u.shape[:-1], self.J**2)
        value = np.einsum("...i,ij,...j->...", pair.conj(), self.matrix(), pair)
        return value.real

    def restricted(self, modes):
        modes = list(modes)
        sub = self.coefficients[np.ix_(modes, modes, modes, modes)]
        return TwoBodyKernel(len(modes), sub, f"{self.label}|restricted", self.psd_certificate)

    def to_json(self):
        entries = [[*abcd, float(v.real), float(v.imag)] for abcd, v in self.nonzero_entries()]
        return {"J": self.J, "label": self.label, "entries": entries}

    def dumps(self):
        return json.dumps(self.to_json())


def kernel_from_json(payload):
    if isinstance(payload, str):
        payload = json.loads(payload)
    J = int(payload["J"])
    coeffs = np.zeros((J,) * 4, dtype=complex)
    for a, b, c, d, re, im in payload["entries"]:
        coeffs[a, b, c, d] = complex(re, im)
    return certify(TwoBodyKernel(J, coeffs, payload.get("label", "custom")))


def certify(kernel, tol=None, psd_tol=None):
    """Check exchange symmetry, Hermiticity and positivity; returns a copy with psd_certificate set."""
    tol = lab_setting("HERMITIAN_TOL", tol)
    psd_tol = lab_setting("PSD_TOL", psd_tol)
    defect = kernel.symmetry_defect()
    if defect > tol:
        raise KernelError(f"kernel {kernel.label!r} violates exchange/Hermitian symmetry by {defect:.3e}")
    lowest = kernel.min_eigenvalue()
    if lowest < -psd_tol:
        raise KernelError(f"kernel {kernel.label!r} is not positive on symmetric pairs (min eig {lowest:.3e})")
    return TwoBodyKernel(kernel.J, kernel.coefficients, kernel.label, True)


def zero_kernel(J):
    return TwoBodyKernel(J, np.zeros((J,) * 4), ZERO, True)


def _cosine_overlap(p, q):
    # ∫_0^π cos(px) cos(qx) dx for integers p, q
    return (np.pi / 2) * ((p == q).astype(float) + (p == -q).astype(float))


def _delta_integrand(x, freqs):
    return (2 / np.pi) ** 2 * np.prod(np.sin(np.asarray(freqs) * x))


def delta_kernel(J, verify=True, quad_tol=1e-10):
    """Contact interaction ∫_0^π φ_a φ_b φ_c φ_d dx with φ_n = sqrt(2/π) sin((n+1)x)."""
    if J < 1:
        raise KernelError(f"mode count must be >= 1, got {J}")
    f = np.arange(1, J + 1)
    a, b, c, d = np.meshgrid(f, f, f, f, indexing="ij")
    coeffs = (
        (2 / np.pi) ** 2
        * 0.25
        * (
            _cosine_overlap(a - b, c - d)
            - _cosine_overlap(a - b, c + d)
            - _cosine_overlap(a + b, c - d)
            + _cosine_overlap(a + b, c + d)
        )
    )
    if verify:
        # the integrand is symmetric in all four indices, so sorted quadruples suffice
        for quad in itertools.combinations_with_replacement(range(J), 4):
            freqs = [i + 1 for i in quad]
            value, _ = integrate.quad(_delta_integrand, 0, np.pi, args=(freqs,), limit=200, epsabs=1e-13)
            if abs(value - coeffs[quad]) > quad_tol:
                raise KernelError(f"delta kernel entry {quad} disagrees with quadrature: {coeffs[quad]} vs {value}")
    logger.debug("delta kernel built J=%d", J)
    return TwoBodyKernel(J, coeffs, DELTA, True)


def finite_rank_kernel(J, vectors, weights, label=FINITE_RANK):
    """w = Σ_r weight_r |g_r⟩⟨g_r| with each g_r given on the orthonormal symmetric pair basis."""
    D2 = sector_occupations(J, 2).shape[0]
    vectors = [np.asarray(g, dtype=complex) for g in vectors]
    weights = [float(x) for x in weights]
    if len(vectors) != len(weights):
        raise DimensionMismatchError(f"{len(vectors)} vectors but {len(weights)} weights")
    if any(x <= 0 for x in weights):
        raise KernelError("finite-rank kernel weights must be positive")
    for g in vectors:
        if g.shape != (D2,):
            raise DimensionMismatchError(f"pair vector has shape {g.shape}, symmetric pair space has dimension {D2}")
    w_sym = np.zeros((D2, D2), dtype=complex)
    for g, weight in zip(vectors, weights):
        w_sym += weight * np.outer(g, g.conj())
    S = symmetric_embedding(J, 2).toarray()
    Wmat = S @ w_sym @ S.T
    return TwoBodyKernel(J, Wmat.reshape((J,) * 4), label, True)


def pair_basis_vector(J, modes):
    """Unit vector of the symmetric pair basis for the occupation with one particle in each of ``modes``."""
    occ = np.zeros(J, dtype=np.int64)
    for m in modes:
        if not 0 <= m < J:
            raise KernelError(f"mode {m} out of range for J={J}")
        occ[m] += 1
    pairs = sector_occupations(J, 2)
    g = np.zeros(pairs.shape[0], dtype=complex)
    g[np.flatnonzero((pairs == occ).all(axis=1))[0]] = 1.0
    return g


def decaying_pair_vector(J, decay):
    """g_α ∝ Π_i (i+1)^{-decay·α_i}; rank-one kernels built on it stay summable as J grows."""
    pairs = sector_occupations(J, 2)
    g = np.prod((np.arange(1, J + 1, dtype=float)) ** (-decay * pairs), axis=1).astype(complex)
    return g / np.linalg.norm(g)


def build_kernel(block, J):
    """Kernel from the RunConfig ``kernel`` block."""
    kind = block.get("type", ZERO)
    if kind == ZERO:
        return zero_kernel(J)
    if kind == DELTA:
        kernel = delta_kernel(J, verify=block.get("verify", True))
        strength = float(block.get("strength", 1.0))
        return TwoBodyKernel(J, strength * kernel.coefficients, DELTA, True)
    if kind == RANK_ONE:
        if "vector" in block:
            g = np.asarray(block["vector"], dtype=complex)
        elif "modes" in block:
            g = pair_basis_vector(J, block["modes"])
        else:
            g = decaying_pair_vector(J, float(block.get("decay", 1.0)))
        return finite_rank_kernel(J, [g], [block.get("weight", 1.0)], RANK_ONE)
    if kind == FINITE_RANK:
        return finite_rank_kernel(J, block["vectors"], block["weights"])
    raise KernelError(f"unknown kernel type {kind!r}")


def trace_against_inverse(kernel, spectrum):
    """tr[w h^{-1}⊗h^{-1}] on the symmetric pair space: Σ_α w_sym[α,α] Π_i λ_i^{-α_i}."""
    if spectrum.mode_count != kernel.J:
        raise DimensionMismatchError(f"spectrum has {spectrum.mode_count} modes, kernel has {kernel.J}")
    pairs = sector_occupations(kernel.J, 2)
    inv = np.prod(spectrum.as_array() ** (-pairs.astype(float)), axis=1)
    return float(np.real(np.diag(kernel.symmetric_matrix())) @ inv)
