"""Von Neumann relative entropy H(Γ, Γ') = tr Γ(log Γ - log Γ') of N-commuting states."""

import logging
import math

import numpy as np

from common.exceptions import DimensionMismatchError

logger = logging.getLogger(__name__)

INFINITE_ENTROPY = math.inf
SUPPORT_TOL = 1e-12


def _overlaps(state, other, n):
    """|⟨v_i, v'_j⟩|² for the eigenvectors of sector n of both states."""
    V, W = state.vectors[n], other.vectors[n]
    if V is None and W is None:
        return np.eye(state.basis.dims[n])
    if V is None:
        return np.abs(W) ** 2
    if W is None:
        return (np.abs(V) ** 2).T
    return np.abs(V.conj().T @ W) ** 2


def relative_entropy(state, other, support_tol=SUPPORT_TOL):
    """Σ_n [Σ_i w_i log w_i - Σ_{ij} w_i |⟨v_i, v'_j⟩|² log w'_j].

    Returns INFINITE_ENTROPY when Γ puts more than ``support_tol`` mass on the kernel of Γ'.
    """
    if state.basis != other.basis:
        raise DimensionMismatchError(f"states live on different bases: {state.basis!r} vs {other.basis!r}")
    total = 0.0
    leaked = 0.0
    for n in range(state.basis.N_max + 1):
        lw = state.log_weights[n]
        live = np.isfinite(lw)
        if not live.any():
            continue
        w = np.exp(lw[live])
        O = _overlaps(state, other, n)[live]
        lw_other = other.log_weights[n]
        support = np.isfinite(lw_other)
        leaked += float(w @ O[:, ~support].sum(axis=1))
        total += float(w @ lw[live]) - float(w @ (O[:, support] @ lw_other[support]))
    if leaked > support_tol:
        logger.debug("relative entropy is infinite: leaked mass %.3e", leaked)
        return INFINITE_ENTROPY
    return total


def von_neumann_entropy(state):
    return state.entropy()
