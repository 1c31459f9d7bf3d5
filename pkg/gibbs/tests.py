import math

import numpy as np
from django.test import SimpleTestCase
from scipy import sparse

from common.exceptions import CutoffError, DimensionMismatchError, InvalidArgumentError, NotHermitianError
from fock.basis import build_basis
from fock.kernels import delta_kernel, finite_rank_kernel, pair_basis_vector
from fock.operators import FockOperator, dGamma_op, hamiltonian, two_body_op
from spectra.spectrum import custom_spectrum, dirichlet_spectrum

from .density_matrices import (
    expected_binomial,
    interaction_energy,
    reduced_density_matrix,
    reduced_density_matrix_partial_trace,
    schatten_norm,
)
from .entropy import INFINITE_ENTROPY, relative_entropy
from .free import (
    adaptive_cutoff,
    classical_free_dm,
    free_dm_closed_form,
    free_dm_distance,
    free_gibbs_state,
    free_partition_closed_form,
    free_sector_law,
    free_tail,
    tilted_moment,
    tilted_moment_limit,
    tilted_moment_trace,
)
from .localization import localize
from .states import (
    QuantumState,
    dephased_pure_state,
    free_energy,
    gibbs_state,
    perturb_state,
    random_state,
    vacuum_state,
)


class GibbsStateTests(SimpleTestCase):
    def test_single_mode_truncated_partition(self):
        T, N_max = 1.5, 12
        basis = build_basis(1, N_max)
        state = gibbs_state(dGamma_op(basis, custom_spectrum([1.0])), T)
        expected = math.log(sum(math.exp(-n / T) for n in range(N_max + 1)))
        self.assertAlmostEqual(state.log_partition, expected, places=12)
        self.assertAlmostEqual(state.total_mass, 1.0, places=12)

    def test_closed_form_with_adaptive_cutoff(self):
        spectrum = dirichlet_spectrum(2)
        T = 3.0
        state = free_gibbs_state(spectrum, T)
        self.assertLess(state.tail, 1e-10)
        self.assertAlmostEqual(state.log_partition, free_partition_closed_form(spectrum, T), delta=1e-9)

    def test_single_sector_is_vacuum(self):
        basis = build_basis(2, 0)
        state = gibbs_state(dGamma_op(basis, dirichlet_spectrum(2)), 1.0)
        self.assertEqual(state.log_partition, 0.0)
        np.testing.assert_allclose(state.probabilities, [1.0])

    def test_low_temperature_concentrates_on_ground_state(self):
        basis = build_basis(2, 4)
        H = hamiltonian(basis, dirichlet_spectrum(2), delta_kernel(2), 1.0)
        state = gibbs_state(H, 0.02)
        self.assertGreater(state.probabilities[0], 1 - 1e-12)

    def test_rejects_bad_input(self):
        basis = build_basis(1, 2)
        H = dGamma_op(basis, custom_spectrum([1.0]))
        with self.assertRaises(InvalidArgumentError):
            gibbs_state(H, 0.0)
        skew = FockOperator(basis, {(1, 1): sparse.csr_array(np.array([[1j]]))}, shift=0)
        with self.assertRaises(NotHermitianError):
            gibbs_state(skew, 1.0)

    def test_variational_principle(self):
        rng = np.random.default_rng(5)
        basis = build_basis(2, 4)
        T = 1.3
        H = hamiltonian(basis, dirichlet_spectrum(2), delta_kernel(2), 0.8)
        gibbs = gibbs_state(H, T)
        floor = free_energy(gibbs, H, T)
        self.assertAlmostEqual(floor, -T * gibbs.log_partition, places=10)
        for _ in range(100):
            trial = perturb_state(gibbs, rng, scale=rng.uniform(0.01, 0.5))
            self.assertGreaterEqual(free_energy(trial, H, T) - floor, -1e-9)

    def test_relative_entropy_reformulation(self):
        spectrum = dirichlet_spectrum(2)
        kernel = delta_kernel(2)
        basis = build_basis(2, 10)
        T, lam = 2.0, 0.5
        interacting = gibbs_state(hamiltonian(basis, spectrum, kernel, lam), T)
        free = gibbs_state(dGamma_op(basis, spectrum), T)
        lhs = -(interacting.log_partition - free.log_partition)
        gamma2 = reduced_density_matrix(interacting, 2)
        rhs = relative_entropy(interacting, free) + lam / T * interaction_energy(gamma2, kernel)
        self.assertLessEqual(abs(lhs - rhs), 1e-8 * abs(lhs))

    def test_interaction_energy_matches_operator_trace(self):
        rng = np.random.default_rng(8)
        basis = build_basis(3, 4)
        kernel = delta_kernel(3)
        state = random_state(basis, rng)
        direct = state.expectation(two_body_op(basis, kernel)).real
        self.assertAlmostEqual(interaction_energy(reduced_density_matrix(state, 2), kernel), direct, places=12)

    def test_json_restores_blocks(self):
        rng = np.random.default_rng(2)
        state = random_state(build_basis(2, 3), rng)
        restored = QuantumState.from_json(state.to_json())
        for n in range(4):
            np.testing.assert_allclose(restored.block(n), state.block(n), atol=1e-12)


class FreeClosedFormTests(SimpleTestCase):
    def test_partition_function(self):
        self.assertAlmostEqual(free_partition_closed_form(custom_spectrum([1.0]), 1.0), 0.45868, places=5)
        self.assertLess(free_partition_closed_form(custom_spectrum([1.0]), 0.01), 1e-40)

    def test_one_body_density(self):
        gamma = free_dm_closed_form(custom_spectrum([1.0]), 1.0, 1)
        self.assertAlmostEqual(gamma.matrix[0, 0].real, 1 / (math.e - 1), places=12)
        self.assertAlmostEqual(gamma.matrix[0, 0].real, 0.58198, places=5)

    def test_two_body_density_entry(self):
        T = 2.0
        gamma = free_dm_closed_form(dirichlet_spectrum(2), T, 2)
        self.assertAlmostEqual(gamma.matrix[0, 0].real, (math.exp(1 / T) - 1) ** -2, places=12)

    def test_classical_limit(self):
        T = 1e4
        gamma = free_dm_closed_form(custom_spectrum([1.0]), T, 1)
        self.assertAlmostEqual(T * gamma.matrix[0, 0].real, 1.0, places=3)
        self.assertLess(free_dm_distance(dirichlet_spectrum(2), T, 1), free_dm_distance(dirichlet_spectrum(2), 10, 1))

    def test_classical_free_dm(self):
        gamma = classical_free_dm(dirichlet_spectrum(2), 2)
        np.testing.assert_allclose(np.diag(gamma.matrix).real, [2.0, 2 / 4, 2 / 16])

    def test_sector_law_and_cutoff(self):
        spectrum = dirichlet_spectrum(2)
        T = 4.0
        N_max = adaptive_cutoff(spectrum, T, threshold=1e-10)
        self.assertLess(free_tail(spectrum, T, N_max), 1e-10)
        self.assertGreaterEqual(free_tail(spectrum, T, N_max - 1), 1e-10)
        state = free_gibbs_state(spectrum, T, N_max)
        law = free_sector_law(spectrum, T, N_max)
        np.testing.assert_allclose(state.probabilities, law / law.sum(), atol=1e-13)

    def test_distance_matches_reduced_density_matrix(self):
        spectrum = dirichlet_spectrum(2)
        T = 2.0
        state = free_gibbs_state(spectrum, T, N_max=100)
        gamma = reduced_density_matrix(state, 1).scaled(1 / T)
        direct = schatten_norm(gamma.matrix - classical_free_dm(spectrum, 1).matrix, 1)
        self.assertAlmostEqual(free_dm_distance(spectrum, T, 1), direct, delta=1e-10)


class ReducedDensityMatrixTests(SimpleTestCase):
    def test_free_state_matches_closed_form(self):
        spectrum = dirichlet_spectrum(2)
        T = 2.5
        state = free_gibbs_state(spectrum, T, N_max=120)
        for k in (1, 2):
            computed = reduced_density_matrix(state, k)
            expected = free_dm_closed_form(spectrum, T, k)
            np.testing.assert_allclose(computed.matrix, expected.matrix, atol=1e-10)

    def test_two_routes_agree(self):
        rng = np.random.default_rng(17)
        for J, N_max in [(2, 4), (3, 3), (1, 5)]:
            state = random_state(build_basis(J, N_max), rng)
            for k in range(1, min(3, N_max) + 1):
                by_words = reduced_density_matrix(state, k)
                by_trace = reduced_density_matrix_partial_trace(state, k)
                self.assertLessEqual(np.abs(by_words.matrix - by_trace.matrix).max(), 1e-9)

    def test_vacuum(self):
        gamma = reduced_density_matrix(vacuum_state(build_basis(2, 3)), 1)
        self.assertEqual(np.abs(gamma.matrix).max(), 0.0)

    def test_trace_is_expected_binomial(self):
        rng = np.random.default_rng(4)
        state = random_state(build_basis(2, 5), rng)
        for k in (1, 2, 3):
            gamma = reduced_density_matrix(state, k)
            self.assertAlmostEqual(gamma.trace, expected_binomial(state, k), places=12)
            self.assertLessEqual(gamma.hermitian_defect(), 1e-12)
            self.assertTrue(gamma.is_psd())

    def test_k_above_cutoff(self):
        with self.assertRaises(CutoffError):
            reduced_density_matrix(vacuum_state(build_basis(2, 2)), 3)


class RelativeEntropyTests(SimpleTestCase):
    def test_self_entropy_is_zero(self):
        rng = np.random.default_rng(1)
        state = random_state(build_basis(2, 3), rng)
        self.assertLessEqual(abs(relative_entropy(state, state)), 1e-10)

    def test_geometric_laws(self):
        spectrum = custom_spectrum([1.0])
        T1, T2 = 1.0, 2.0
        N_max = 120
        first = free_gibbs_state(spectrum, T1, N_max)
        second = free_gibbs_state(spectrum, T2, N_max)
        q1, q2 = math.exp(-1 / T1), math.exp(-1 / T2)
        mean = q1 / (1 - q1)
        expected = math.log((1 - q1) / (1 - q2)) + mean * math.log(q1 / q2)
        self.assertAlmostEqual(relative_entropy(first, second), expected, places=10)

    def test_pure_excited_state(self):
        spectrum = dirichlet_spectrum(2)
        basis = build_basis(2, 30)
        gibbs = gibbs_state(dGamma_op(basis, spectrum), 1.5)
        n, pos = basis.locate((1, 1))
        vectors = [np.zeros(d) for d in basis.dims]
        vectors[n][pos] = 1.0
        pure = dephased_pure_state(basis, vectors)
        expected = -gibbs.log_weights[n][pos]
        self.assertAlmostEqual(relative_entropy(pure, gibbs), expected, places=10)

    def test_support_violation_is_infinite(self):
        rng = np.random.default_rng(9)
        basis = build_basis(2, 2)
        self.assertEqual(relative_entropy(random_state(basis, rng), vacuum_state(basis)), INFINITE_ENTROPY)

    def test_basis_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            relative_entropy(vacuum_state(build_basis(2, 2)), vacuum_state(build_basis(2, 3)))

    def test_monotone_under_localization(self):
        rng = np.random.default_rng(21)
        for J, N_max, modes in [(2, 4, [0]), (3, 3, [0, 2]), (3, 4, [1])]:
            basis = build_basis(J, N_max)
            for _ in range(35):
                first, second = random_state(basis, rng), random_state(basis, rng)
                full = relative_entropy(first, second)
                local = relative_entropy(localize(first, modes), localize(second, modes))
                self.assertGreaterEqual(full - local, -1e-8)


class LocalizationTests(SimpleTestCase):
    def test_all_modes_is_identity(self):
        rng = np.random.default_rng(0)
        state = random_state(build_basis(2, 3), rng)
        self.assertIs(localize(state, [0, 1]), state)

    def test_free_state_factorises(self):
        spectrum = dirichlet_spectrum(3)
        T, N_max = 1.0, 40
        state = free_gibbs_state(spectrum, T, N_max)
        local = localize(state, [1])
        factor = free_gibbs_state(spectrum.restricted([1]), T, N_max)
        np.testing.assert_allclose(local.probabilities, factor.probabilities, atol=1e-12)

    def test_density_matrices_are_compressed(self):
        rng = np.random.default_rng(13)
        state = random_state(build_basis(3, 4), rng)
        modes = [0, 2]
        local = localize(state, modes)
        for k in (1, 2):
            expected = reduced_density_matrix(state, k).submatrix(modes)
            np.testing.assert_allclose(reduced_density_matrix(local, k).matrix, expected.matrix, atol=1e-12)
        self.assertAlmostEqual(local.total_mass, 1.0, places=12)

    def test_empty_subset(self):
        with self.assertRaises(InvalidArgumentError):
            localize(vacuum_state(build_basis(2, 2)), [])


class TiltedMomentTests(SimpleTestCase):
    def test_trivial_values(self):
        spectrum = custom_spectrum([1.0])
        self.assertEqual(tilted_moment(spectrum, 3.0, (0,), 0), 1.0)
        self.assertAlmostEqual(tilted_moment(spectrum, 1.0, (1,), 0), 1 / (math.e - 1), places=12)

    def test_closed_form_matches_trace_single_mode(self):
        spectrum = custom_spectrum([1.0])
        T = 10.0
        state = free_gibbs_state(spectrum, T, N_max=600)
        closed = tilted_moment(spectrum, T, (1,), 1)
        expected = sum(math.factorial(1 + s) / (T * math.expm1(1 / T)) ** (1 + s) for s in (0, 1))
        self.assertAlmostEqual(closed, expected, places=12)
        self.assertLessEqual(abs(tilted_moment_trace(state, T, (1,), 1) - closed), 1e-10)

    def test_closed_form_matches_trace_two_modes(self):
        spectrum = dirichlet_spectrum(2)
        T = 2.0
        state = free_gibbs_state(spectrum, T, N_max=90)
        for powers, k in [((1, 0), 1), ((0, 2), 1), ((1, 1), 2)]:
            closed = tilted_moment(spectrum, T, powers, k)
            self.assertLessEqual(abs(tilted_moment_trace(state, T, powers, k) - closed), 1e-10 * closed)

    def test_limit(self):
        spectrum = dirichlet_spectrum(2)
        limit = tilted_moment_limit(spectrum, (1, 0), 1)
        self.assertAlmostEqual(limit, 2.0 + 1.0 / 4, places=12)
        self.assertAlmostEqual(tilted_moment(spectrum, 1e5, (1, 0), 1), limit, places=3)

    def test_negative_powers(self):
        with self.assertRaises(InvalidArgumentError):
            tilted_moment(custom_spectrum([1.0]), 1.0, (-1,), 0)


class BoundTests(SimpleTestCase):
    def test_partition_ratio_below_one(self):
        spectrum = dirichlet_spectrum(2)
        kernel = finite_rank_kernel(2, [pair_basis_vector(2, [0, 0])], [1.0])
        basis = build_basis(2, 25)
        T = 3.0
        interacting = gibbs_state(hamiltonian(basis, spectrum, kernel, 1 / T), T)
        free = gibbs_state(dGamma_op(basis, spectrum), T)
        self.assertLessEqual(interacting.log_partition, free.log_partition)
