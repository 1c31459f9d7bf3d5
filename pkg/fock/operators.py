"""Second-quantised operators as sparse blocks between particle-number sectors."""

import logging
import math
from collections import defaultdict

import numpy as np
from scipy import sparse

from common.conf import lab_setting
from common.exceptions import CutoffError, DimensionMismatchError, InvalidArgumentError, KernelError
from common.parallel import ordered_map

from .basis import sector_occupations

logger = logging.getLogger(__name__)

DIAGONAL = "diagonal-in-N"
RAISING = "raises-N-by-1"
LOWERING = "lowers-N-by-1"
GENERAL = "general"

_STRUCTURES = {0: DIAGONAL, 1: RAISING, -1: LOWERING}


class FockOperator:
    """Block operator: ``blocks[(m, n)]`` maps sector n into sector m.

    ``shift`` is m - n when every block has the same offset (None otherwise).
    Missing blocks are zero.
    """

    def __init__(self, basis, blocks, shift=None, hermitian=False):
        self.basis = basis
        self.blocks = {key: sparse.csr_array(b) for key, b in blocks.items()}
        self.shift = shift
        self.hermitian = hermitian
        if shift is not None and any(m - n != shift for m, n in self.blocks):
            raise InvalidArgumentError(f"blocks do not match declared shift {shift}")

    def __repr__(self):
        return f"FockOperator({self.basis!r}, structure={self.structure!r}, blocks={len(self.blocks)})"

    @property
    def structure(self):
        return _STRUCTURES.get(self.shift, GENERAL)

    def block(self, m, n):
        b = self.blocks.get((m, n))
        if b is None:
            return sparse.csr_array((self.basis.dims[m], self.basis.dims[n]), dtype=complex)
        return b

    def sector_block(self, n):
        """Dense (n, n) block."""
        return self.block(n, n).toarray()

    def adjoint(self):
        blocks = {(n, m): b.conj().T for (m, n), b in self.blocks.items()}
        shift = None if self.shift is None else -self.shift
        return FockOperator(self.basis, blocks, shift, self.hermitian)

    def _check_basis(self, other):
        if other.basis != self.basis:
            raise DimensionMismatchError(f"operators live on different bases: {self.basis!r} vs {other.basis!r}")

    def __add__(self, other):
        self._check_basis(other)
        blocks = dict(self.blocks)
        for key, b in other.blocks.items():
            blocks[key] = blocks[key] + b if key in blocks else b
        shift = self.shift if self.shift == other.shift else None
        return FockOperator(self.basis, blocks, shift, self.hermitian and other.hermitian)

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        blocks = {key: scalar * b for key, b in self.blocks.items()}
        return FockOperator(self.basis, blocks, self.shift, self.hermitian and np.isreal(scalar))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            self._check_basis(other)
            by_row = defaultdict(list)
            for (n, p), b in other.blocks.items():
                by_row[n].append((p, b))
            blocks = {}
            for (m, n), a in self.blocks.items():
                for p, b in by_row.get(n, ()):
                    prod = a @ b
                    blocks[(m, p)] = blocks[(m, p)] + prod if (m, p) in blocks else prod
            shift = None if self.shift is None or other.shift is None else self.shift + other.shift
            return FockOperator(self.basis, blocks, shift)
        return self.apply(other)

    def apply(self, vector):
        """Act on a vector given as a list of per-sector coefficient arrays."""
        if len(vector) != self.basis.N_max + 1:
            raise DimensionMismatchError("vector must have one array per sector")
        out = [np.zeros(d, dtype=complex) for d in self.basis.dims]
        for (m, n), b in self.blocks.items():
            out[m] += b @ np.asarray(vector[n], dtype=complex)
        return out

    def power(self, k):
        result = identity_op(self.basis)
        for _ in range(k):
            result = self @ result
        return result

    def to_dense(self):
        offsets = self.basis.offsets
        out = np.zeros((self.basis.size, self.basis.size), dtype=complex)
        for (m, n), b in self.blocks.items():
            out[offsets[m] : offsets[m + 1], offsets[n] : offsets[n + 1]] = b.toarray()
        return out

    def hermitian_defect(self):
        worst = 0.0
        for (m, n), b in self.blocks.items():
            diff = b - self.block(n, m).conj().T
            if diff.nnz:
                worst = max(worst, float(np.abs(diff.data).max()))
        return worst

    def is_hermitian(self, tol=None):
        return self.hermitian_defect() <= lab_setting("HERMITIAN_TOL", tol)

    def deviation(self, other, max_sector=None):
        """Largest entry of self - other over blocks whose source sector is <= max_sector."""
        self._check_basis(other)
        top = self.basis.N_max if max_sector is None else max_sector
        keys = {k for k in set(self.blocks) | set(other.blocks) if k[1] <= top and k[0] <= top}
        worst = 0.0
        for m, n in keys:
            diff = self.block(m, n) - other.block(m, n)
            if diff.nnz:
                worst = max(worst, float(np.abs(diff.data).max()))
        return worst


def _falling(occ, powers):
    """Π_i occ_i! / (occ_i - powers_i)! row-wise, in exact integer steps."""
    out = np.ones(occ.shape[0])
    for i, r in enumerate(powers):
        for t in range(int(r)):
            out *= occ[:, i] - t
    return out


def word_block(basis, n, create, annihilate):
    """Sparse block of a†^create a^annihilate acting on sector n, or None when it vanishes."""
    create = np.asarray(create, dtype=np.int64)
    annihilate = np.asarray(annihilate, dtype=np.int64)
    target = n - int(annihilate.sum()) + int(create.sum())
    if target < 0 or target > basis.N_max:
        return None
    occ = basis.sector(n)
    keep = np.flatnonzero((occ >= annihilate).all(axis=1))
    if keep.size == 0:
        return None
    middle = occ[keep] - annihilate
    out = middle + create
    values = np.sqrt(_falling(occ[keep], annihilate) * _falling(out, create))
    rows = basis.index_of(target, out)
    return sparse.csr_array((values.astype(complex), (rows, keep)), shape=(basis.dims[target], basis.dims[n]))


def assemble(basis, words, shift, hermitian=False, threads=None):
    """Σ coef · a†^create a^annihilate, assembled sector by sector."""
    words = list(words)

    def sector(n):
        total = None
        for coef, create, annihilate in words:
            b = word_block(basis, n, create, annihilate)
            if b is None:
                continue
            total = coef * b if total is None else total + coef * b
        return n, total

    blocks = {}
    for n, block in ordered_map(sector, range(basis.N_max + 1), threads):
        if block is not None and 0 <= n + shift <= basis.N_max:
            blocks[(n + shift, n)] = block
    return FockOperator(basis, blocks, shift, hermitian)


def _unit(J, mode):
    if not 0 <= mode < J:
        raise InvalidArgumentError(f"mode {mode} out of range for J={J}")
    e = np.zeros(J, dtype=np.int64)
    e[mode] = 1
    return e


def creation_op(basis, mode):
    """a†_i |…, n_i, …⟩ = sqrt(n_i + 1) |…, n_i + 1, …⟩; the top sector is sent to zero."""
    e = _unit(basis.J, mode)
    return assemble(basis, [(1.0, e, np.zeros_like(e))], shift=1, threads=1)


def annihilation_op(basis, mode):
    e = _unit(basis.J, mode)
    return assemble(basis, [(1.0, np.zeros_like(e), e)], shift=-1, threads=1)


def creation_field(basis, v):
    """a†(v) = Σ_i v_i a†_i."""
    v = _mode_vector(basis, v)
    zero = np.zeros(basis.J, dtype=np.int64)
    words = [(v[i], _unit(basis.J, i), zero) for i in range(basis.J) if v[i] != 0]
    return assemble(basis, words, shift=1, threads=1)


def annihilation_field(basis, v):
    """a(v) = Σ_i conj(v_i) a_i."""
    v = _mode_vector(basis, v)
    zero = np.zeros(basis.J, dtype=np.int64)
    words = [(np.conj(v[i]), zero, _unit(basis.J, i)) for i in range(basis.J) if v[i] != 0]
    return assemble(basis, words, shift=-1, threads=1)


def _mode_vector(basis, v):
    v = np.asarray(v, dtype=complex)
    if v.shape != (basis.J,):
        raise DimensionMismatchError(f"mode vector has shape {v.shape}, basis has {basis.J} modes")
    return v


def _diagonal(basis, values_per_sector):
    blocks = {(n, n): sparse.diags_array(values.astype(complex)) for n, values in enumerate(values_per_sector)}
    return FockOperator(basis, blocks, 0, hermitian=True)


def identity_op(basis):
    return _diagonal(basis, [np.ones(d) for d in basis.dims])


def number_op(basis):
    return _diagonal(basis, [np.full(d, float(n)) for n, d in enumerate(basis.dims)])


def dGamma_op(basis, spectrum):
    """dΓ(h) = Σ_i λ_i a†_i a_i, diagonal in the occupation basis."""
    if spectrum.mode_count != basis.J:
        raise DimensionMismatchError(f"spectrum has {spectrum.mode_count} modes, basis has {basis.J}")
    lam = spectrum.as_array()
    return _diagonal(basis, [occ @ lam for occ in basis.sectors])


def two_body_op(basis, kernel, threads=None, tol=None):
    """W = ½ Σ W_{(a,b),(c,d)} a†_a a†_b a_d a_c, block-diagonal in N."""
    if kernel.J != basis.J:
        raise DimensionMismatchError(f"kernel has {kernel.J} modes, basis has {basis.J}")
    defect = kernel.symmetry_defect()
    if defect > lab_setting("HERMITIAN_TOL", tol):
        raise KernelError(f"kernel {kernel.label!r} breaks exchange/Hermitian symmetry by {defect:.3e}")
    grouped = defaultdict(complex)
    for (a, b, c, d), value in kernel.nonzero_entries():
        create = np.bincount([a, b], minlength=basis.J)
        annihilate = np.bincount([c, d], minlength=basis.J)
        grouped[(tuple(create), tuple(annihilate))] += 0.5 * value
    words = [(coef, np.array(cr), np.array(an)) for (cr, an), coef in grouped.items() if coef != 0]
    op = assemble(basis, words, shift=0, hermitian=True, threads=threads)
    logger.debug("two-body operator assembled label=%s words=%d blocks=%d", kernel.label, len(words), len(op.blocks))
    return op


def k_body_op(basis, A, k, threads=None):
    """Second quantisation of a k-body operator given on the orthonormal symmetric k-particle basis.

    Σ_{α,β} A_{αβ} a†^α a^β / sqrt(α! β!); on sector n it acts as C(n,k) times the symmetrised A ⊗ 1.
    """
    occ_k = sector_occupations(basis.J, k)
    A = np.asarray(A, dtype=complex)
    if A.shape != (occ_k.shape[0],) * 2:
        raise DimensionMismatchError(f"k-body matrix has shape {A.shape}, expected {(occ_k.shape[0],) * 2}")
    norms = np.array([math.prod(math.factorial(int(x)) for x in row) for row in occ_k], dtype=float)
    words = []
    for i, j in zip(*np.nonzero(A)):
        words.append((A[i, j] / math.sqrt(norms[i] * norms[j]), occ_k[i], occ_k[j]))
    hermitian = bool(np.allclose(A, A.conj().T))
    return assemble(basis, words, shift=0, hermitian=hermitian, threads=threads)


def hamiltonian(basis, spectrum, kernel, coupling, threads=None):
    """H_λ = dΓ(h) + λ W."""
    if coupling < 0:
        raise InvalidArgumentError(f"coupling must be nonnegative, got {coupling}")
    free = dGamma_op(basis, spectrum)
    if coupling == 0 or kernel is None or kernel.is_zero():
        return free
    H = free + coupling * two_body_op(basis, kernel, threads=threads)
    H.hermitian = True
    return H


def commutator(A, B):
    return A @ B - B @ A


def wick_identity_check(basis, v, k):
    """max |a(v)^k a†(v)^k - Σ_ℓ C(k,ℓ)(k!/ℓ!)|v|^{2(k-ℓ)} a†(v)^ℓ a(v)^ℓ| for n <= N_max - k."""
    if k < 1:
        raise InvalidArgumentError(f"k must be positive, got {k}")
    if k > basis.N_max - 1:
        raise CutoffError(f"k={k} needs N_max >= {k + 1}, basis has N_max={basis.N_max}")
    a = annihilation_field(basis, v)
    ad = creation_field(basis, v)
    norm2 = float(np.vdot(v, v).real)
    lhs = a.power(k) @ ad.power(k)
    rhs = None
    for ell in range(k + 1):
        coef = math.comb(k, ell) * math.factorial(k) / math.factorial(ell) * norm2 ** (k - ell)
        term = coef * (ad.power(ell) @ a.power(ell))
        rhs = term if rhs is None else rhs + term
    return lhs.deviation(rhs, max_sector=basis.N_max - k)
