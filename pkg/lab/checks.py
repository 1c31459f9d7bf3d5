"""Fast invariant battery behind the ``check_lab`` command: exact identities and inequalities at toy sizes."""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from classical.rng import stream
from common.conf import lab_setting
from common.exceptions import LabError
from fock.basis import build_basis, sector_dimension
from fock.kernels import certify, delta_kernel
from fock.operators import annihilation_op, commutator, creation_op, hamiltonian, identity_op, wick_identity_check
from gibbs.density_matrices import reduced_density_matrix, reduced_density_matrix_partial_trace
from gibbs.entropy import relative_entropy
from gibbs.free import (
    free_dm_closed_form,
    free_gibbs_state,
    free_partition_closed_form,
    tilted_moment,
    tilted_moment_trace,
)
from gibbs.localization import localize
from gibbs.states import free_energy, gibbs_state, perturb_state, random_state
from husimi.coherent import coherent_vector, eigenrelation_deviation
from spectra.spectrum import custom_spectrum, dirichlet_spectrum

from .campaigns import a_priori_checks, gibbs_pair
from .constants import BATTERY_DRAWS, CLOSED_FORM_TOL, EXACT_TOL

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def to_json(self):
        return asdict(self)


_CHECKS = []


def check(name, tolerance):
    """Register a check returning a nonnegative deviation; it passes when deviation <= tolerance."""

    def register(fn):
        _CHECKS.append((name, tolerance, fn))
        return fn

    return register


@check("ccr", EXACT_TOL)
def _ccr(seed):
    basis = build_basis(2, 6)
    worst = 0.0
    for i in range(2):
        for j in range(2):
            comm = commutator(annihilation_op(basis, i), creation_op(basis, j))
            worst = max(worst, comm.deviation(identity_op(basis) * float(i == j), max_sector=basis.N_max - 1))
    return worst


@check("wick_identity", EXACT_TOL)
def _wick(seed):
    basis = build_basis(2, 8)
    v = np.array([0.6, 0.8j])
    return max(wick_identity_check(basis, v, k) for k in (1, 2, 3))


@check("sector_dimensions", 0)
def _sector_dimensions(seed):
    mismatches = 0
    for J in (1, 2, 3):
        basis = build_basis(J, 6)
        for n in range(7):
            expected = math.comb(n + J - 1, J - 1)
            mismatches += sector_dimension(J, n) != expected
            mismatches += basis.sector(n).shape[0] != expected
    return mismatches


@check("free_partition_closed_form", 1e-8)
def _free_partition(seed):
    spectrum = dirichlet_spectrum(2)
    worst = 0.0
    for T in (1.0, 4.0):
        state = free_gibbs_state(spectrum, T, threads=1)
        exact = free_partition_closed_form(spectrum, T)
        worst = max(worst, abs(state.log_partition - exact) / max(1.0, abs(exact)))
    return worst


@check("free_dm_closed_form", CLOSED_FORM_TOL)
def _free_dm(seed):
    spectrum = dirichlet_spectrum(2)
    T = 4.0
    state = free_gibbs_state(spectrum, T, threads=1)
    worst = 0.0
    for k in (1, 2):
        exact = free_dm_closed_form(spectrum, T, k).matrix
        computed = reduced_density_matrix(state, k).matrix
        worst = max(worst, float(np.abs(computed - exact).max() / np.abs(exact).max()))
    return worst


@check("rdm_two_routes", 1e-9)
def _rdm_routes(seed):
    basis = build_basis(2, 4)
    state = random_state(basis, stream(seed, 1))
    worst = 0.0
    for k in (1, 2, 3):
        a = reduced_density_matrix(state, k).matrix
        b = reduced_density_matrix_partial_trace(state, k).matrix
        worst = max(worst, float(np.abs(a - b).max()))
    return worst


@check("tilted_moment_trace", EXACT_TOL)
def _tilted(seed):
    spectrum = custom_spectrum([1.0])
    T = 10.0
    # P(N >= 400) = e^{-40}: truncation bias far below the tolerance
    state = free_gibbs_state(spectrum, T, N_max=400, threads=1)
    worst = 0.0
    for powers, k in (((1,), 1), ((2,), 0), ((0,), 2)):
        exact = tilted_moment(spectrum, T, powers, k)
        worst = max(worst, abs(tilted_moment_trace(state, T, powers, k) - exact) / max(1.0, exact))
    return worst


@check("coherent_eigenrelation", EXACT_TOL)
def _eigenrelation(seed):
    basis = build_basis(2, 30)
    vector = coherent_vector(basis, np.array([0.5, 0.3j]))
    return eigenrelation_deviation(vector, np.array([1.0, 0.5 - 0.2j]))


@check("relative_entropy_identity", EXACT_TOL)
def _entropy_identity(seed):
    basis = build_basis(2, 3)
    state = random_state(basis, stream(seed, 2))
    return abs(relative_entropy(state, state))


@check("relative_entropy_positive", 1e-8)
def _entropy_positive(seed):
    basis = build_basis(2, 3)
    rng = stream(seed, 3)
    pairs = ((random_state(basis, rng), random_state(basis, rng)) for _ in range(BATTERY_DRAWS))
    return max(max(0.0, -relative_entropy(a, b)) for a, b in pairs)


@check("localization_monotone", 1e-8)
def _localization(seed):
    basis = build_basis(3, 3)
    rng = stream(seed, 4)
    worst = 0.0
    for index in range(BATTERY_DRAWS):
        a, b = random_state(basis, rng), random_state(basis, rng)
        modes = [index % 3]
        full = relative_entropy(a, b)
        local = relative_entropy(localize(a, modes, threads=1), localize(b, modes, threads=1))
        worst = max(worst, local - full)
    return max(0.0, worst)


@check("gibbs_variational_principle", 1e-9)
def _variational(seed):
    spectrum = dirichlet_spectrum(2)
    kernel = delta_kernel(2)
    basis = build_basis(2, 6)
    T = 2.0
    H = hamiltonian(basis, spectrum, kernel, 0.5, threads=1)
    gibbs = gibbs_state(H, T, threads=1)
    floor = -T * gibbs.log_partition
    rng = stream(seed, 5)
    worst = abs(free_energy(gibbs, H, T) - floor)
    for _ in range(BATTERY_DRAWS):
        worst = max(worst, floor - free_energy(perturb_state(gibbs, rng), H, T))
    return max(0.0, worst)


@check("a_priori_bounds", 0)
def _a_priori(seed):
    spectrum = dirichlet_spectrum(2)
    kernel = delta_kernel(2)
    failed = 0
    for T in (1.0, 2.0):
        pair = gibbs_pair(spectrum, kernel, T, 1.0 / T, 24)
        failed += sum(not c["passed"] for c in a_priori_checks(pair, spectrum, kernel).values())
    return failed


@check("kernel_certificate", 0)
def _kernel(seed):
    try:
        certify(delta_kernel(3))
    except LabError:
        return 1
    return 0


def run_checks(seed=None, names=None):
    """Run the battery (or the named subset) in registration order; errors count as failures."""
    seed = lab_setting("DEFAULT_SEED", seed)
    results = []
    for name, tolerance, fn in _CHECKS:
        if names and name not in names:
            continue
        try:
            value = float(fn(seed))
            result = CheckResult(name, value, tolerance, value <= tolerance)
        except LabError as exc:
            result = CheckResult(name, math.nan, tolerance, False, str(exc))
        log = logger.info if result.passed else logger.warning
        log("invariant check name=%s value=%.3e tolerance=%.1e passed=%s", name, result.value, tolerance, result.passed)
        results.append(result)
    return results


def check_names():
    return [name for name, _, _ in _CHECKS]
