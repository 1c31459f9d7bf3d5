import math

import numpy as np
from django.test import SimpleTestCase

from common.exceptions import DimensionMismatchError, InvalidArgumentError
from fock.kernels import delta_kernel, finite_rank_kernel, pair_basis_vector, zero_kernel
from gibbs.free import classical_free_dm, tilted_moment_limit
from spectra.spectrum import custom_spectrum, dirichlet_spectrum

from .estimates import MCEstimate, RunningMoments, WeightedMoments
from .measure import (
    SECOND_HALF_OFFSET,
    ClassicalField,
    GaussianMeasure,
    classical_variational_identity,
    default_competitors,
    f_nl,
    gamma_k_mc,
    gaussian_batches,
    gaussian_relative_entropy,
    gibbs_expectation_mc,
    minimality_check,
    mu0_moments,
    mu0_variances,
    relative_partition_mc,
    relative_partition_quad,
    sample_mu0,
    tilted_moment_mc,
)
from .rng import RNG_ALGORITHM, stream


class EstimateTests(SimpleTestCase):
    def test_running_moments_do_not_depend_on_batching(self):
        x = np.random.default_rng(1).normal(size=1000)
        whole = RunningMoments().update(x)
        parts = RunningMoments()
        for chunk in np.array_split(x, 7):
            parts.update(chunk)
        self.assertAlmostEqual(whole.mean, parts.mean, places=12)
        self.assertAlmostEqual(whole.variance, parts.variance, places=10)
        self.assertAlmostEqual(whole.stderr, x.std(ddof=1) / math.sqrt(1000), places=10)

    def test_unit_weights_reduce_to_plain_mean(self):
        f = np.random.default_rng(2).normal(size=500)
        acc = WeightedMoments().update(np.ones(500), f)
        self.assertAlmostEqual(acc.mean, f.mean(), places=12)
        self.assertAlmostEqual(acc.stderr, math.sqrt(((f - f.mean()) ** 2).sum()) / 500, places=12)
        self.assertAlmostEqual(acc.ess, 500.0)

    def test_low_ess_sets_warning(self):
        w = np.full(100, 1e-6)
        w[0] = 1.0
        estimate = WeightedMoments().update(w, np.arange(100.0)).estimate(seed=1, rng_algorithm=RNG_ALGORITHM)
        self.assertTrue(estimate.warning)
        self.assertLess(estimate.ess, 2.0)

    def test_estimate_needs_samples(self):
        with self.assertRaises(InvalidArgumentError):
            MCEstimate(1.0, 0.0, 0, 1, RNG_ALGORITHM)

    def test_json_keeps_reproducibility_fields(self):
        payload = MCEstimate(0.5, 0.01, 10, 7, RNG_ALGORITHM).to_json()
        self.assertEqual(payload["seed"], 7)
        self.assertEqual(payload["rng_algorithm"], RNG_ALGORITHM)
        self.assertEqual(payload["value"], 0.5)


class RngTests(SimpleTestCase):
    def test_streams_are_reproducible(self):
        a = stream(11, 3).standard_normal(5)
        b = stream(11, 3).standard_normal(5)
        c = stream(11, 4).standard_normal(5)
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.allclose(a, c))

    def test_batches_do_not_depend_on_batch_size(self):
        v = [1.0, 0.25]
        big = np.vstack(list(gaussian_batches(v, 1000, seed=5, batch_size=1000)))
        small = np.vstack(list(gaussian_batches(v, 1000, seed=5, batch_size=128)))
        np.testing.assert_allclose(big, small)

    def test_bad_seed(self):
        with self.assertRaises(InvalidArgumentError):
            stream(-1)


class FreeMeasureTests(SimpleTestCase):
    def setUp(self):
        self.spectrum = dirichlet_spectrum(2)

    def test_single_draw(self):
        field = sample_mu0(self.spectrum, stream(3))
        self.assertIsInstance(field, ClassicalField)
        self.assertEqual(field.mode_count, 2)

    def test_gaussian_moments(self):
        lam = self.spectrum.as_array()
        for m in range(1, 5):
            estimates = mu0_moments(self.spectrum, m, 200_000, seed=17)
            for j, estimate in enumerate(estimates):
                exact = math.factorial(m) / lam[j] ** m
                self.assertTrue(estimate.agrees_with(exact, sigmas=4), (m, j, estimate.value, exact))

    def test_circular_symmetry(self):
        samples = np.vstack(list(gaussian_batches(mu0_variances(self.spectrum), 100_000, seed=23)))
        for observable in (samples, samples**2):
            acc = RunningMoments().update(observable)
            for j in range(2):
                self.assertLessEqual(abs(acc.mean[j]), 4 * acc.stderr[j])


class InteractionTests(SimpleTestCase):
    def test_zero_field(self):
        self.assertEqual(f_nl(ClassicalField(np.zeros(2)), delta_kernel(2, verify=False)), 0.0)

    def test_contraction_oracle(self):
        kernel = delta_kernel(2, verify=False)
        u = np.array([0.7 - 0.2j, -0.4 + 0.9j])
        W = kernel.coefficients
        brute = 0.0
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        brute += np.conj(u[a] * u[b]) * W[a, b, c, d] * u[c] * u[d]
        self.assertAlmostEqual(f_nl(ClassicalField(u), kernel), 0.5 * brute.real, places=12)

    def test_single_mode_delta(self):
        kernel = delta_kernel(1, verify=False)
        self.assertAlmostEqual(f_nl(ClassicalField([1.3]), kernel), 0.5 * 1.3**4 * 3 / (2 * math.pi), places=12)

    def test_orthogonal_pair_projector(self):
        kernel = finite_rank_kernel(2, [pair_basis_vector(2, [0, 0])], [1.0])
        self.assertAlmostEqual(f_nl(ClassicalField([0.0, 2.0]), kernel), 0.0, places=14)

    def test_full_convention_doubles(self):
        kernel = delta_kernel(2, verify=False)
        u = ClassicalField([0.3, 0.5j])
        self.assertAlmostEqual(f_nl(u, kernel, convention="full"), 2 * f_nl(u, kernel, convention="half"))

    def test_batch_matches_single(self):
        kernel = delta_kernel(2, verify=False)
        batch = np.array([[0.3, 0.1j], [1.0, -0.5]])
        values = f_nl(batch, kernel)
        for row, value in zip(batch, values):
            self.assertAlmostEqual(value, f_nl(ClassicalField(row), kernel), places=12)

    def test_mode_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            f_nl(ClassicalField([1.0]), delta_kernel(2, verify=False))


class RelativePartitionTests(SimpleTestCase):
    def test_zero_kernel_is_exactly_one(self):
        z = relative_partition_mc(dirichlet_spectrum(2), zero_kernel(2), 10_000, seed=1)
        self.assertEqual(z.value, 1.0)
        self.assertEqual(z.stderr, 0.0)

    def test_range_and_cross_seed_agreement(self):
        s, kernel = dirichlet_spectrum(2), delta_kernel(2, verify=False)
        a = relative_partition_mc(s, kernel, 100_000, seed=101)
        b = relative_partition_mc(s, kernel, 100_000, seed=202)
        for z in (a, b):
            self.assertGreater(z.real, 0.0)
            self.assertLessEqual(z.real, 1.0)
        self.assertLessEqual(abs(a.real - b.real), 4 * math.hypot(a.stderr, b.stderr))

    def test_single_mode_radial_quadrature(self):
        s = custom_spectrum([1.0])
        kernel = finite_rank_kernel(1, [np.array([1.0])], [0.8])
        exact = relative_partition_quad(s, kernel)
        z = relative_partition_mc(s, kernel, 200_000, seed=9)
        self.assertTrue(z.agrees_with(exact, sigmas=4), (z.value, z.stderr, exact))
        self.assertLess(exact, 1.0)

    def test_no_samples(self):
        with self.assertRaises(InvalidArgumentError):
            relative_partition_mc(dirichlet_spectrum(2), zero_kernel(2), 0, seed=1)


class GammaKTests(SimpleTestCase):
    def assertWithinErrors(self, gamma, exact, sigmas=4.0):
        gap = np.abs(gamma.matrix - exact)
        allowed = sigmas * gamma.stderr + 1e-12
        self.assertTrue(np.all(gap <= allowed), (gamma.matrix, exact, gamma.stderr))

    def test_free_one_body(self):
        gamma = gamma_k_mc(dirichlet_spectrum(2), zero_kernel(2), 1, 200_000, seed=31)
        self.assertWithinErrors(gamma, np.diag([1.0, 0.25]))
        self.assertEqual(gamma.meta["seed"], 31)
        self.assertEqual(gamma.meta["rng_algorithm"], RNG_ALGORITHM)

    def test_free_two_body(self):
        s = dirichlet_spectrum(2)
        gamma = gamma_k_mc(s, zero_kernel(2), 2, 200_000, seed=37)
        self.assertWithinErrors(gamma, classical_free_dm(s, 2).matrix)

    def test_interacting_bound(self):
        s, kernel = dirichlet_spectrum(2), delta_kernel(2, verify=False)
        gamma = gamma_k_mc(s, kernel, 1, 100_000, seed=41)
        z_r = gamma.meta["z_r"]["value"]
        free = classical_free_dm(s, 1).matrix
        for j in range(2):
            self.assertLessEqual(gamma.matrix[j, j].real, free[j, j].real / z_r + 3 * gamma.stderr[j, j])

    def test_hermitian_and_positive(self):
        gamma = gamma_k_mc(dirichlet_spectrum(2), delta_kernel(2, verify=False), 2, 50_000, seed=43)
        self.assertEqual(gamma.hermitian_defect(), 0.0)
        self.assertGreaterEqual(gamma.eigenvalues().min(), -3 * gamma.stderr.max())

    def test_k_must_be_positive(self):
        with self.assertRaises(InvalidArgumentError):
            gamma_k_mc(dirichlet_spectrum(2), zero_kernel(2), 0, 10, seed=1)


class VariationalIdentityTests(SimpleTestCase):
    def test_zero_kernel(self):
        result = classical_variational_identity(dirichlet_spectrum(2), zero_kernel(2), 10_000, seed=3)
        self.assertEqual(result.relative_entropy, 0.0)
        self.assertEqual(result.interaction.real, 0.0)
        self.assertEqual(result.log_z_r, 0.0)
        self.assertEqual(result.residual, 0.0)

    def test_residual_is_noise(self):
        result = classical_variational_identity(dirichlet_spectrum(2), delta_kernel(2, verify=False), 200_000, seed=5)
        self.assertTrue(result.holds(sigmas=4), result.to_json())
        self.assertGreater(result.interaction.real, 0.0)

    def test_convention_argument_overrides_setting(self):
        s, kernel = dirichlet_spectrum(2), delta_kernel(2, verify=False)
        with self.settings(MEANFIELD_LAB={"INTERACTION_CONVENTION": "half"}):
            full = classical_variational_identity(s, kernel, 20_000, seed=7, convention="full")
            half = classical_variational_identity(s, kernel, 20_000, seed=7)
        z_full = relative_partition_mc(s, kernel, 10_000, seed=7, offset=SECOND_HALF_OFFSET, convention="full")
        self.assertAlmostEqual(full.log_z_r, math.log(z_full.real), places=12)
        # F_full = 2 F_half on the same draws
        self.assertLess(full.log_z_r, half.log_z_r)


class CompetitorTests(SimpleTestCase):
    def test_closed_form_relative_entropy(self):
        s = dirichlet_spectrum(2)
        v0 = mu0_variances(s)
        self.assertAlmostEqual(gaussian_relative_entropy(GaussianMeasure(np.zeros(2), v0), s), 0.0)
        narrow = GaussianMeasure(np.zeros(2), 0.5 * v0)
        self.assertAlmostEqual(gaussian_relative_entropy(narrow, s), 2 * (math.log(2) - 0.5))
        shifted = GaussianMeasure(np.array([0.5, 0.0]), v0)
        self.assertAlmostEqual(gaussian_relative_entropy(shifted, s), 0.25 / v0[0])

    def test_gibbs_measure_is_minimal(self):
        s, kernel = dirichlet_spectrum(2), delta_kernel(2, verify=False)
        rows = minimality_check(s, kernel, 50_000, seed=13)
        self.assertGreaterEqual(len(rows), 5)
        self.assertEqual(len(default_competitors(s)), len(rows))
        for row in rows:
            self.assertTrue(row["passed"], row)

    def test_minimality_uses_given_convention(self):
        s, kernel = dirichlet_spectrum(2), delta_kernel(2, verify=False)
        with self.settings(MEANFIELD_LAB={"INTERACTION_CONVENTION": "half"}):
            rows = minimality_check(s, kernel, 20_000, seed=13, convention="full")
        z_full = relative_partition_mc(s, kernel, 20_000, seed=13, convention="full")
        for row in rows:
            self.assertAlmostEqual(row["bound"], -math.log(z_full.real), places=12)
            self.assertTrue(row["passed"], row)

    def test_degenerate_competitor(self):
        with self.assertRaises(InvalidArgumentError):
            GaussianMeasure(np.zeros(2), np.array([1.0, 0.0]))


class GibbsExpectationTests(SimpleTestCase):
    def test_constant_is_exact(self):
        estimate = gibbs_expectation_mc(
            dirichlet_spectrum(2), delta_kernel(2, verify=False), lambda b: np.ones(b.shape[0]), 20_000, seed=4
        )
        self.assertAlmostEqual(estimate.real, 1.0, places=12)

    def test_free_second_moment(self):
        s = dirichlet_spectrum(2)
        estimate = gibbs_expectation_mc(s, zero_kernel(2), lambda b: np.abs(b[:, 1]) ** 2, 200_000, seed=6)
        self.assertTrue(estimate.agrees_with(0.25, sigmas=4), estimate.to_json())

    def test_repulsion_lowers_second_moment(self):
        s = dirichlet_spectrum(2)
        kernel = delta_kernel(2, verify=False)
        estimate = gibbs_expectation_mc(s, kernel, lambda b: np.abs(b[:, 0]) ** 2, 100_000, seed=6)
        self.assertLess(estimate.real, 1.0)


class TiltedMomentTests(SimpleTestCase):
    def test_matches_limit(self):
        s = dirichlet_spectrum(2)
        for powers, k in [((1, 0), 1), ((0, 1), 2), ((1, 1), 0)]:
            estimate = tilted_moment_mc(s, powers, k, 400_000, seed=17)
            self.assertTrue(estimate.agrees_with(tilted_moment_limit(s, powers, k), sigmas=4), (powers, k))

    def test_rejects_bad_powers(self):
        with self.assertRaises(InvalidArgumentError):
            tilted_moment_mc(dirichlet_spectrum(2), (1,), 1, 10, seed=1)
