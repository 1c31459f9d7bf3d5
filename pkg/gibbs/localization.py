"""Localisation Γ ↦ Γ_P: partial trace over the Fock factor of the complementary modes."""

import logging
from collections import defaultdict

import numpy as np

from common.exceptions import InvalidArgumentError
from fock.basis import build_basis

from .states import QuantumState, _log, state_from_blocks

logger = logging.getLogger(__name__)


def _check_modes(J, modes):
    modes = sorted(set(int(m) for m in modes))
    if not modes:
        raise InvalidArgumentError("localisation needs a nonempty mode subset")
    if modes[0] < 0 or modes[-1] >= J:
        raise InvalidArgumentError(f"modes {modes} out of range for J={J}")
    return modes


def localize(state, modes, threads=None):
    """Γ_P on F(span of ``modes``), using F(H) ≃ F(H_P) ⊗ F(H_P^⊥)."""
    basis = state.basis
    modes = _check_modes(basis.J, modes)
    if len(modes) == basis.J:
        return state
    rest = [m for m in range(basis.J) if m not in modes]
    sub = build_basis(len(modes), basis.N_max)
    diagonal = all(V is None for V in state.vectors)
    blocks = [np.zeros((d, d), dtype=complex) for d in sub.dims] if not diagonal else None
    diag_weights = [np.zeros(d) for d in sub.dims] if diagonal else None

    for n in range(basis.N_max + 1):
        w = state.weights(n)
        if not np.any(w):
            continue
        occ = basis.sector(n)
        kept = occ[:, modes]
        kept_n = kept.sum(axis=1)
        if diagonal:
            for m in np.unique(kept_n):
                rows = np.flatnonzero(kept_n == m)
                np.add.at(diag_weights[m], sub.index_of(int(m), kept[rows]), w[rows])
            continue
        G = state.block(n)
        groups = defaultdict(list)
        for x, key in enumerate(map(tuple, occ[:, rest].tolist())):
            groups[key].append(x)
        for xs in groups.values():
            xs = np.asarray(xs)
            m = int(kept_n[xs[0]])
            ys = sub.index_of(m, kept[xs])
            blocks[m][np.ix_(ys, ys)] += G[np.ix_(xs, xs)]

    label = f"{state.label}|modes={modes}"
    if diagonal:
        return QuantumState(sub, [_log(w) for w in diag_weights], [None] * (sub.N_max + 1), label=label)
    return state_from_blocks(sub, blocks, label=label, threads=threads)
