"""Occupation-number basis of the truncated bosonic Fock space over J modes."""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.special import gammaln

from common.conf import lab_setting
from common.exceptions import BasisTooLargeError, DimensionMismatchError, IntegerOverflowError, InvalidArgumentError

logger = logging.getLogger(__name__)

INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class OccupationVector:
    counts: tuple

    @property
    def total(self):
        return sum(self.counts)


def sector_dimension(J, n):
    """C(n+J-1, J-1), exact."""
    if J < 1 or n < 0:
        raise InvalidArgumentError(f"need J >= 1 and n >= 0, got J={J}, n={n}")
    value = math.comb(n + J - 1, J - 1)
    if value > INT64_MAX:
        raise IntegerOverflowError(f"sector dimension C({n + J - 1}, {J - 1}) exceeds int64")
    return value


def symmetric_norm_factor(occ):
    """Π_i n_i!, the squared norm of the unnormalised symmetric tensor with these occupations."""
    counts = occ.counts if isinstance(occ, OccupationVector) else tuple(occ)
    return math.prod(math.factorial(int(n)) for n in counts)


@lru_cache(maxsize=256)
def _compositions(n, J):
    # descending lexicographic order: (n,0,..), (n-1,1,..), ..., (0,..,n)
    if J == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for first in range(n, -1, -1):
        rest = _compositions(n - first, J - 1)
        head = np.full((rest.shape[0], 1), first, dtype=np.int64)
        blocks.append(np.hstack([head, rest]))
    out = np.vstack(blocks)
    out.setflags(write=False)
    return out


class FockBasis:
    """Sectors n = 0..N_max of the J-mode Fock space, each enumerated in a fixed order.

    Vectors are the orthonormalised occupation states |n_1, ..., n_J>.
    """

    def __init__(self, J, N_max, sectors):
        self.J = J
        self.N_max = N_max
        self.sectors = sectors
        self.dims = tuple(s.shape[0] for s in sectors)
        self.offsets = tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.dims)]))
        self._radix = N_max + 1
        self._use_keys = self._radix**J <= INT64_MAX
        self._lookup = [self._make_lookup(s) for s in sectors]

    def __repr__(self):
        return f"FockBasis(J={self.J}, N_max={self.N_max}, size={self.size})"

    def __eq__(self, other):
        return isinstance(other, FockBasis) and (self.J, self.N_max) == (other.J, other.N_max)

    def __hash__(self):
        return hash((self.J, self.N_max))

    @property
    def size(self):
        return self.offsets[-1]

    def sector(self, n):
        return self.sectors[n]

    def _keys(self, occ):
        weights = self._radix ** np.arange(self.J - 1, -1, -1, dtype=np.int64)
        return occ @ weights

    def _make_lookup(self, occ):
        if self._use_keys:
            keys = self._keys(occ)
            order = np.argsort(keys, kind="stable")
            return keys[order], order
        return {tuple(int(x) for x in row): i for i, row in enumerate(occ)}

    def index_of(self, n, occ):
        """Positions of the rows of ``occ`` (all of total n) inside sector n."""
        occ = np.atleast_2d(np.asarray(occ, dtype=np.int64))
        if occ.shape[1] != self.J:
            raise DimensionMismatchError(f"occupations have {occ.shape[1]} modes, basis has {self.J}")
        if occ.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        lookup = self._lookup[n]
        if self._use_keys:
            keys_sorted, order = lookup
            keys = self._keys(occ)
            pos = np.searchsorted(keys_sorted, keys)
            pos = np.clip(pos, 0, len(keys_sorted) - 1)
            if not np.array_equal(keys_sorted[pos], keys):
                raise InvalidArgumentError(f"occupation not in sector {n}")
            return order[pos]
        return np.array([lookup[tuple(int(x) for x in row)] for row in occ], dtype=np.int64)

    def locate(self, occ):
        """(sector, position) of one occupation vector."""
        counts = occ.counts if isinstance(occ, OccupationVector) else tuple(occ)
        n = sum(counts)
        if n > self.N_max:
            raise InvalidArgumentError(f"occupation {counts} exceeds cutoff {self.N_max}")
        return n, int(self.index_of(n, counts)[0])

    def occupation(self, n, position):
        return OccupationVector(tuple(int(x) for x in self.sectors[n][position]))

    def global_index(self, n, position):
        return self.offsets[n] + position

    def all_occupations(self):
        return np.vstack(self.sectors)


def basis_size(J, N_max):
    """Σ_{n<=N_max} C(n+J-1, J-1) = C(N_max+J, J)."""
    return math.comb(N_max + J, J)


def build_basis(J, N_max, max_size=None):
    if J < 1:
        raise InvalidArgumentError(f"mode count must be >= 1, got {J}")
    if N_max < 0:
        raise InvalidArgumentError(f"particle cutoff must be >= 0, got {N_max}")
    ceiling = lab_setting("MAX_BASIS_SIZE", max_size)
    total = basis_size(J, N_max)
    if total > ceiling:
        raise BasisTooLargeError(f"basis J={J} N_max={N_max} has {total} states, ceiling is {ceiling}")
    sectors = [_compositions(n, J) for n in range(N_max + 1)]
    logger.debug("basis built J=%d N_max=%d size=%d", J, N_max, total)
    return FockBasis(J, N_max, sectors)


@lru_cache(maxsize=64)
def cached_basis(J, N_max):
    return build_basis(J, N_max)


def symmetric_tensor_coefficients(u, k, J=None):
    """⟨e_α, u^{⊗k}⟩ = sqrt(k!/α!) Π u_i^{α_i} over sector k, in sector order.

    ``u`` may be a single J-vector or a batch of shape (S, J); the result has shape (D_k,) or (S, D_k).
    """
    u = np.asarray(u, dtype=complex)
    J = u.shape[-1] if J is None else J
    occ = _compositions(k, J)
    log_norm = 0.5 * (gammaln(k + 1) - gammaln(occ + 1).sum(axis=1))
    powers = np.prod(u[..., None, :] ** occ, axis=-1)
    return np.exp(log_norm) * powers


def symmetric_embedding(J, k, max_size=None):
    """Isometry from the orthonormal symmetric k-particle basis into ⊗^k C^J (sparse, J^k × D_k).

    Column α is sqrt(α!/k!) Σ of the product basis vectors whose index sequence has occupations α.
    """
    rows = J**k
    ceiling = lab_setting("MAX_BASIS_SIZE", max_size)
    if rows > ceiling:
        raise BasisTooLargeError(f"tensor power J^k = {rows} exceeds ceiling {ceiling}")
    occ_k = _compositions(k, J)
    if k == 0:
        return sparse.csr_array(np.ones((1, 1)))
    seqs = np.array(list(itertools.product(range(J), repeat=k)), dtype=np.int64)
    counts = np.zeros((rows, J), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(rows), k), seqs.ravel()), 1)
    lookup = {tuple(int(x) for x in row): i for i, row in enumerate(occ_k)}
    cols = np.array([lookup[tuple(int(x) for x in row)] for row in counts], dtype=np.int64)
    values = np.exp(0.5 * (gammaln(counts + 1).sum(axis=1) - gammaln(k + 1)))
    return sparse.csr_array((values, (np.arange(rows), cols)), shape=(rows, occ_k.shape[0]))


def sector_occupations(J, k):
    return _compositions(k, J)
