import itertools
import math

import numpy as np
from django.test import SimpleTestCase

from common.exceptions import (
    BasisTooLargeError,
    CutoffError,
    DimensionMismatchError,
    InvalidArgumentError,
    KernelError,
)
from spectra.spectrum import dirichlet_spectrum

from .basis import (
    OccupationVector,
    build_basis,
    sector_dimension,
    symmetric_embedding,
    symmetric_norm_factor,
    symmetric_tensor_coefficients,
)
from .kernels import (
    TwoBodyKernel,
    certify,
    delta_kernel,
    finite_rank_kernel,
    kernel_from_json,
    pair_basis_vector,
    trace_against_inverse,
    zero_kernel,
)
from .operators import (
    DIAGONAL,
    LOWERING,
    RAISING,
    annihilation_op,
    commutator,
    creation_op,
    dGamma_op,
    hamiltonian,
    identity_op,
    k_body_op,
    number_op,
    two_body_op,
    wick_identity_check,
)


class FockBasisTests(SimpleTestCase):
    def test_sector_sizes(self):
        basis = build_basis(2, 2)
        self.assertEqual(basis.dims, (1, 2, 3))
        self.assertEqual(basis.size, 6)
        self.assertEqual(build_basis(3, 1).dims, (1, 3))
        self.assertEqual(build_basis(1, 10).dims, (1,) * 11)

    def test_sector_order_is_descending_lexicographic(self):
        basis = build_basis(2, 2)
        self.assertEqual([tuple(row) for row in basis.sector(2)], [(2, 0), (1, 1), (0, 2)])
        self.assertEqual([tuple(row) for row in basis.sector(1)], [(1, 0), (0, 1)])

    def test_sector_dimension(self):
        self.assertEqual(sector_dimension(2, 2), 3)
        self.assertEqual(sector_dimension(4, 3), 20)
        self.assertEqual(sector_dimension(3, 24), 325)

    def test_sector_dimension_overflow(self):
        with self.assertRaises(OverflowError):
            sector_dimension(200, 200)

    def test_hockey_stick(self):
        for J, N_max in [(1, 5), (2, 7), (3, 6), (5, 4)]:
            total = sum(sector_dimension(J, n) for n in range(N_max + 1))
            self.assertEqual(total, math.comb(N_max + J, J))
            self.assertEqual(build_basis(J, N_max).size, total)

    def test_symmetric_norm_factor(self):
        self.assertEqual(symmetric_norm_factor(OccupationVector((2, 0))), 2)
        self.assertEqual(symmetric_norm_factor((1, 1)), 1)
        self.assertEqual(symmetric_norm_factor((3, 2)), 12)

    def test_index_round_trip(self):
        basis = build_basis(3, 5)
        for n in range(basis.N_max + 1):
            for position in range(basis.dims[n]):
                occ = basis.occupation(n, position)
                self.assertEqual(occ.total, n)
                self.assertEqual(basis.locate(occ), (n, position))

    def test_resource_guard(self):
        with self.assertRaises(BasisTooLargeError):
            build_basis(6, 40, max_size=1000)
        with self.assertRaises(InvalidArgumentError):
            build_basis(0, 3)

    def test_symmetric_embedding_is_isometry(self):
        for J, k in [(2, 2), (3, 2), (2, 3), (3, 3)]:
            S = symmetric_embedding(J, k).toarray()
            np.testing.assert_allclose(S.T @ S, np.eye(S.shape[1]), atol=1e-14)

    def test_symmetric_tensor_coefficients_match_embedding(self):
        rng = np.random.default_rng(3)
        u = rng.normal(size=3) + 1j * rng.normal(size=3)
        S = symmetric_embedding(3, 3).toarray()
        product = np.einsum("i,j,k->ijk", u, u, u).ravel()
        np.testing.assert_allclose(symmetric_tensor_coefficients(u, 3), S.T @ product, atol=1e-12)


class LadderOperatorTests(SimpleTestCase):
    def setUp(self):
        self.basis = build_basis(2, 4)

    def test_single_mode_ladder(self):
        basis = build_basis(1, 6)
        ad = creation_op(basis, 0)
        for n in range(basis.N_max):
            self.assertAlmostEqual(ad.block(n + 1, n).toarray()[0, 0], math.sqrt(n + 1), places=14)
        self.assertNotIn((basis.N_max + 1, basis.N_max), ad.blocks)
        self.assertEqual(ad.structure, RAISING)

    def test_matrix_elements(self):
        ad = creation_op(self.basis, 1)
        _, src = self.basis.locate((1, 0))
        _, dst = self.basis.locate((1, 1))
        self.assertAlmostEqual(ad.block(2, 1).toarray()[dst, src], 1.0)
        _, src = self.basis.locate((0, 1))
        _, dst = self.basis.locate((0, 2))
        self.assertAlmostEqual(ad.block(2, 1).toarray()[dst, src], math.sqrt(2))

        a = annihilation_op(self.basis, 0)
        self.assertEqual(a.structure, LOWERING)
        _, src = self.basis.locate((2, 0))
        _, dst = self.basis.locate((1, 0))
        self.assertAlmostEqual(a.block(1, 2).toarray()[dst, src], math.sqrt(2))
        self.assertNotIn((-1, 0), a.blocks)

    def test_annihilation_is_adjoint_of_creation(self):
        for mode in range(self.basis.J):
            diff = annihilation_op(self.basis, mode).deviation(creation_op(self.basis, mode).adjoint())
            self.assertEqual(diff, 0.0)

    def test_canonical_commutation_on_safe_sectors(self):
        basis = build_basis(3, 4)
        one = identity_op(basis)
        for i, j in itertools.product(range(basis.J), repeat=2):
            ccr = commutator(annihilation_op(basis, i), creation_op(basis, j))
            expected = one if i == j else 0.0 * one
            self.assertLessEqual(ccr.deviation(expected, max_sector=basis.N_max - 1), 1e-14)
            aa = commutator(annihilation_op(basis, i), annihilation_op(basis, j))
            self.assertLessEqual(aa.deviation(0.0 * one), 1e-15)

    def test_dgamma_and_number(self):
        spectrum = dirichlet_spectrum(2)
        basis = build_basis(2, 3)
        dg = dGamma_op(basis, spectrum)
        self.assertEqual(dg.structure, DIAGONAL)
        self.assertEqual(dg.sector_block(0)[0, 0], 0)
        n, pos = basis.locate((1, 1))
        self.assertAlmostEqual(dg.sector_block(n)[pos, pos].real, 5.0)
        n, pos = basis.locate((0, 3))
        self.assertAlmostEqual(dg.sector_block(n)[pos, pos].real, 12.0)
        N = number_op(basis)
        np.testing.assert_array_equal(np.diag(N.sector_block(3)).real, [3.0] * basis.dims[3])
        self.assertEqual(commutator(N, dg).deviation(0.0 * N), 0.0)

    def test_dgamma_mode_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            dGamma_op(build_basis(3, 2), dirichlet_spectrum(2))

    def test_mode_out_of_range(self):
        with self.assertRaises(InvalidArgumentError):
            creation_op(self.basis, 2)


class KernelTests(SimpleTestCase):
    def test_delta_kernel_values(self):
        kernel = delta_kernel(3)
        self.assertAlmostEqual(kernel.coefficients[0, 0, 0, 0].real, 3 / (2 * np.pi), places=12)
        for idx in itertools.product(range(3), repeat=4):
            if sum(i + 1 for i in idx) % 2:
                self.assertEqual(kernel.coefficients[idx], 0)
        self.assertEqual(kernel.symmetry_defect(), 0.0)
        self.assertGreaterEqual(kernel.min_eigenvalue(), -1e-10)

    def test_finite_rank_spectrum(self):
        J = 2
        g1 = pair_basis_vector(J, [0, 0])
        g2 = pair_basis_vector(J, [0, 1])
        kernel = finite_rank_kernel(J, [g1, g2], [2.0, 3.0])
        eig = np.linalg.eigvalsh(kernel.symmetric_matrix())
        np.testing.assert_allclose(sorted(eig, reverse=True), [3.0, 2.0, 0.0], atol=1e-13)
        projector = finite_rank_kernel(J, [g1], [1.0])
        np.testing.assert_allclose(sorted(np.linalg.eigvalsh(projector.symmetric_matrix())), [0, 0, 1], atol=1e-13)

    def test_finite_rank_rejects_bad_input(self):
        g = pair_basis_vector(2, [0, 1])
        with self.assertRaises(KernelError):
            finite_rank_kernel(2, [g], [-1.0])
        with self.assertRaises(DimensionMismatchError):
            finite_rank_kernel(2, [np.ones(4)], [1.0])

    def test_json_round_trip_keeps_certificate(self):
        kernel = delta_kernel(2)
        restored = kernel_from_json(kernel.dumps())
        np.testing.assert_array_equal(restored.coefficients, kernel.coefficients)
        self.assertTrue(restored.psd_certificate)

    def test_certify_rejects_asymmetric(self):
        coeffs = np.zeros((2,) * 4)
        coeffs[0, 1, 0, 0] = 1.0
        with self.assertRaises(KernelError):
            certify(TwoBodyKernel(2, coeffs))

    def test_trace_against_inverse(self):
        spectrum = dirichlet_spectrum(2)
        kernel = finite_rank_kernel(2, [pair_basis_vector(2, [0, 1])], [1.0])
        self.assertAlmostEqual(trace_against_inverse(kernel, spectrum), 1 / 4)


class TwoBodyTests(SimpleTestCase):
    def test_low_sectors_vanish(self):
        basis = build_basis(2, 3)
        W = two_body_op(basis, delta_kernel(2))
        self.assertEqual(np.abs(W.sector_block(0)).max(), 0)
        self.assertEqual(np.abs(W.sector_block(1)).max(), 0)

    def test_delta_single_mode_pair(self):
        basis = build_basis(1, 3)
        W = two_body_op(basis, delta_kernel(1))
        self.assertAlmostEqual(W.sector_block(2)[0, 0].real, 3 / (2 * np.pi), places=12)

    def test_rank_one_pair_element(self):
        basis = build_basis(2, 3)
        kernel = finite_rank_kernel(2, [pair_basis_vector(2, [0, 1])], [1.0])
        W = two_body_op(basis, kernel)
        n, pos = basis.locate((1, 1))
        self.assertAlmostEqual(W.sector_block(n)[pos, pos].real, 1.0, places=13)

    def test_sector_two_block_is_symmetric_matrix(self):
        basis = build_basis(3, 2)
        kernel = delta_kernel(3)
        W = two_body_op(basis, kernel)
        np.testing.assert_allclose(W.sector_block(2), kernel.symmetric_matrix(), atol=1e-13)

    def test_matches_k_body_second_quantisation(self):
        basis = build_basis(2, 5)
        kernel = delta_kernel(2)
        W = two_body_op(basis, kernel)
        K = k_body_op(basis, kernel.symmetric_matrix(), 2)
        self.assertLessEqual(W.deviation(K), 1e-12)

    def test_hermitian_and_positive(self):
        basis = build_basis(3, 4)
        W = two_body_op(basis, delta_kernel(3))
        self.assertTrue(W.is_hermitian())
        for n in range(basis.N_max + 1):
            self.assertGreaterEqual(np.linalg.eigvalsh(W.sector_block(n)).min(), -1e-10)

    def test_pairwise_sum_oracle(self):
        # explicit ⊗^n construction: Σ_{i<j} w_ij on symmetrised product states
        J, n = 2, 3
        basis = build_basis(J, n)
        kernel = delta_kernel(J)
        W = two_body_op(basis, kernel)
        Wmat = kernel.matrix()
        eye = np.eye(J)
        total = np.zeros((J**n, J**n), dtype=complex)
        for i, j in itertools.combinations(range(n), 2):
            rest = [k for k in range(n) if k not in (i, j)]
            op = np.kron(Wmat, eye)
            perm = [i, j] + rest
            inv = np.argsort(perm)
            tensor = op.reshape((J,) * (2 * n))
            axes = list(inv) + [n + p for p in inv]
            total += tensor.transpose(axes).reshape(J**n, J**n)
        S = symmetric_embedding(J, n).toarray()
        np.testing.assert_allclose(S.T @ total @ S, W.sector_block(n), atol=1e-12)


class HamiltonianTests(SimpleTestCase):
    def test_zero_coupling_is_free(self):
        basis = build_basis(2, 3)
        spectrum = dirichlet_spectrum(2)
        H = hamiltonian(basis, spectrum, delta_kernel(2), 0.0)
        self.assertEqual(H.deviation(dGamma_op(basis, spectrum)), 0.0)

    def test_single_mode_sector_two(self):
        basis = build_basis(1, 3)
        H = hamiltonian(basis, dirichlet_spectrum(1), delta_kernel(1), 1.0)
        self.assertAlmostEqual(H.sector_block(2)[0, 0].real, 2 + 3 / (2 * np.pi), places=12)

    def test_ground_energy_bound(self):
        basis = build_basis(2, 4)
        spectrum = dirichlet_spectrum(2)
        H = hamiltonian(basis, spectrum, delta_kernel(2), 0.7)
        self.assertTrue(H.is_hermitian())
        for n in range(basis.N_max + 1):
            floor = n * spectrum.eigenvalues[0]
            self.assertGreaterEqual(np.linalg.eigvalsh(H.sector_block(n)).min(), floor - 1e-10)

    def test_negative_coupling_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            hamiltonian(build_basis(1, 2), dirichlet_spectrum(1), delta_kernel(1), -0.1)

    def test_zero_kernel_hamiltonian_is_free(self):
        basis = build_basis(2, 3)
        spectrum = dirichlet_spectrum(2)
        H = hamiltonian(basis, spectrum, zero_kernel(2), 0.5)
        self.assertEqual(H.deviation(dGamma_op(basis, spectrum)), 0.0)


class WickIdentityTests(SimpleTestCase):
    def test_first_order_is_ccr(self):
        basis = build_basis(2, 6)
        v = np.array([0.6, 0.8j])
        self.assertLessEqual(wick_identity_check(basis, v, 1), 1e-12)

    def test_higher_orders(self):
        rng = np.random.default_rng(11)
        basis = build_basis(2, 8)
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        for k in (2, 3):
            self.assertLessEqual(wick_identity_check(basis, v, k), 1e-10)

    def test_non_unit_vector(self):
        basis = build_basis(3, 6)
        self.assertLessEqual(wick_identity_check(basis, np.array([0.5, -1.2, 0.3j]), 2), 1e-10)

    def test_k_equal_cutoff_rejected(self):
        basis = build_basis(2, 3)
        with self.assertRaises(CutoffError):
            wick_identity_check(basis, np.array([1.0, 0.0]), 3)
