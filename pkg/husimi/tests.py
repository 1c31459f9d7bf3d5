import math

import numpy as np
from django.test import SimpleTestCase

from common.exceptions import CutoffError, DimensionMismatchError, InvalidArgumentError, ProposalError
from fock.basis import build_basis, symmetric_tensor_coefficients
from gibbs.density_matrices import reduced_density_matrix, schatten_norm
from gibbs.entropy import relative_entropy
from gibbs.free import free_gibbs_state
from gibbs.states import random_state, vacuum_state
from spectra.spectrum import dirichlet_spectrum

from .coherent import (
    coherent_vector,
    eigenrelation_deviation,
    poisson_tail,
    resolution_of_identity_mc,
    weyl_action_check,
)
from .lower_symbols import (
    HusimiMeasure,
    SamplerConfig,
    anti_wick_expectation,
    berezin_lieb_check,
    clipped_monomial,
    constant_test_function,
    cylindrical_check,
    gaussian_test_function,
    husimi_density,
    husimi_identity_rhs,
    husimi_moment_mc,
    moment_estimates,
    normalization_mc,
    quantitative_bound,
    radial_relative_entropy,
)


class CoherentVectorTests(SimpleTestCase):
    def test_zero_amplitude_is_vacuum(self):
        xi = coherent_vector(build_basis(2, 5), np.zeros(2))
        self.assertEqual(xi.sectors[0][0], 1.0)
        self.assertEqual(xi.tail_norm, 0.0)
        self.assertAlmostEqual(xi.retained_norm, 1.0)

    def test_poisson_sector_law_and_tail(self):
        u = np.array([0.8, -0.5j])
        xi = coherent_vector(build_basis(2, 6), u)
        t = 0.89
        expected = [math.exp(-t) * t**n / math.factorial(n) for n in range(7)]
        np.testing.assert_allclose(xi.sector_weights(), expected, atol=1e-14)
        self.assertAlmostEqual(xi.tail_norm, 1 - xi.retained_norm**2, delta=1e-12)
        self.assertAlmostEqual(poisson_tail(t, 6), 1 - sum(expected), delta=1e-14)

    def test_eigenrelation(self):
        xi = coherent_vector(build_basis(2, 20), np.array([0.6, 0.3 + 0.4j]))
        g = np.array([0.2 - 0.7j, 1.1])
        self.assertLessEqual(eigenrelation_deviation(xi, g), 1e-10)

    def test_density_matrices_are_tensor_powers(self):
        u = np.array([0.5, 0.2 - 0.3j])
        state = coherent_vector(build_basis(2, 20), u).as_state()
        for k in (1, 2):
            c = symmetric_tensor_coefficients(u, k)
            expected = np.outer(c, c.conj()) / math.factorial(k)
            np.testing.assert_allclose(reduced_density_matrix(state, k).matrix, expected, atol=1e-10)

    def test_guard(self):
        with self.assertRaises(CutoffError):
            coherent_vector(build_basis(1, 8), np.array([3.0]))
        with self.assertRaises(DimensionMismatchError):
            coherent_vector(build_basis(2, 8), np.array([0.1]))

    def test_resolution_of_identity(self):
        basis = build_basis(1, 4)
        mean, stderr = resolution_of_identity_mc(basis, 40_000, seed=3)
        gap = np.abs(mean - np.eye(basis.size))
        self.assertTrue(np.all(gap <= 4 * stderr + 1e-12), gap / np.maximum(stderr, 1e-300))


class WeylTests(SimpleTestCase):
    def test_zero_translation(self):
        self.assertEqual(weyl_action_check(build_basis(2, 8), np.zeros(2), np.array([1.0, 0.5])), 0.0)

    def test_translation_of_creation_operator(self):
        rng = np.random.default_rng(5)
        f = rng.normal(size=2) + 1j * rng.normal(size=2)
        g = rng.normal(size=2) + 1j * rng.normal(size=2)
        f /= np.linalg.norm(f)
        g /= np.linalg.norm(g)
        self.assertLessEqual(weyl_action_check(build_basis(2, 24), f, g), 1e-8)

    def test_large_translation(self):
        with self.assertRaises(CutoffError):
            weyl_action_check(build_basis(1, 16), np.array([2.0]), np.array([1.0]))


class HusimiDensityTests(SimpleTestCase):
    def test_vacuum(self):
        eps, u = 0.5, np.array([0.3, 0.2j])
        sample = husimi_density(vacuum_state(build_basis(2, 4)), [0, 1], eps, u)
        expected = (eps * math.pi) ** -2 * math.exp(-0.13 / eps)
        self.assertAlmostEqual(sample.density, expected, delta=1e-12 * expected)

    def test_matches_coherent_overlap(self):
        basis = build_basis(2, 4)
        state = random_state(basis, np.random.default_rng(7))
        eps, u = 0.7, np.array([0.4 - 0.1j, 0.3j])
        xi = coherent_vector(basis, u / math.sqrt(eps), guard=1.0)
        overlap = sum(np.vdot(xi.sectors[n], state.block(n) @ xi.sectors[n]).real for n in range(5))
        measure = HusimiMeasure(state, [0, 1], eps)
        self.assertAlmostEqual(measure.density(u[None, :])[0], overlap / (eps * math.pi) ** 2, places=12)

    def test_nonnegative_and_normalised(self):
        state = random_state(build_basis(2, 4), np.random.default_rng(11))
        measure = HusimiMeasure(state, [0, 1], 0.3)
        points = np.random.default_rng(1).normal(size=(50, 2)) * (1 + 1j)
        self.assertTrue(np.all(measure.density(points) >= 0))
        total = normalization_mc(measure, SamplerConfig(100_000, seed=13))
        self.assertTrue(total.agrees_with(1.0, sigmas=4), (total.value, total.stderr))

    def test_point_query_guard(self):
        with self.assertRaises(CutoffError):
            husimi_density(vacuum_state(build_basis(1, 4)), [0], 0.1, np.array([2.0]))

    def test_degenerate_proposal(self):
        measure = HusimiMeasure(vacuum_state(build_basis(1, 4)), [0], 0.5)
        with self.assertRaises(ProposalError):
            measure.proposal(scale=0.0, floor=0.0)

    def test_bad_scale(self):
        with self.assertRaises(InvalidArgumentError):
            HusimiMeasure(vacuum_state(build_basis(1, 4)), [0], 0.0)


class DensityMatrixIdentityTests(SimpleTestCase):
    def setUp(self):
        self.state = random_state(build_basis(2, 4), np.random.default_rng(17))

    def test_one_body(self):
        eps = 0.25
        rhs = husimi_identity_rhs(self.state, [0, 1], eps, 1)
        gamma = reduced_density_matrix(self.state, 1).matrix
        np.testing.assert_allclose(rhs.matrix, eps * (gamma + np.eye(2)), atol=1e-13)

    def test_vacuum(self):
        rhs = husimi_identity_rhs(vacuum_state(build_basis(2, 4)), [0, 1], 0.5, 3)
        np.testing.assert_allclose(rhs.matrix, 6 * 0.125 * np.eye(4), atol=1e-14)

    def test_lower_bound_is_positive_gap(self):
        eps = 0.5
        rhs = husimi_identity_rhs(self.state, [0, 1], eps, 2)
        gap = rhs.matrix - 2 * eps**2 * reduced_density_matrix(self.state, 2).matrix
        self.assertGreaterEqual(np.linalg.eigvalsh(gap).min(), -1e-8)

    def test_monte_carlo_matches_identity(self):
        eps = 0.4
        for k in (1, 2):
            mc = husimi_moment_mc(self.state, [0, 1], eps, k, SamplerConfig(200_000, seed=19 + k))
            exact = husimi_identity_rhs(self.state, [0, 1], eps, k).matrix
            gap = np.abs(mc.matrix - exact)
            self.assertTrue(np.all(gap <= 4 * mc.stderr + 1e-12), (k, mc.matrix, exact))

    def test_free_gibbs_state(self):
        T = 4.0
        state = free_gibbs_state(dirichlet_spectrum(2), T, N_max=40)
        mc = husimi_moment_mc(state, [0, 1], 1 / T, 1, SamplerConfig(50_000, seed=23))
        exact = (reduced_density_matrix(state, 1).matrix + np.eye(2)) / T
        self.assertTrue(np.all(np.abs(mc.matrix - exact) <= 4 * mc.stderr + 1e-12))

    def test_quantitative_bound(self):
        eps, k = 0.3, 2
        bound = quantitative_bound(self.state, [0, 1], eps, k)
        self.assertAlmostEqual(bound["trace_norm"], bound["exact"], delta=1e-10)
        self.assertLessEqual(bound["exact"], bound["dimension_bound"] + 1e-12)
        self.assertLessEqual(bound["dimension_bound"], bound["number_bound"] + 1e-12)
        mc = husimi_moment_mc(self.state, [0, 1], eps, k, SamplerConfig(100_000, seed=29))
        target = math.factorial(k) * eps**k * reduced_density_matrix(self.state, k).matrix
        self.assertLessEqual(schatten_norm(mc.matrix - target, 1), bound["dimension_bound"] + 4 * mc.stderr.sum())

    def test_moment_estimates(self):
        rows = moment_estimates(self.state, [0, 1], 0.5, 2, SamplerConfig(100_000, seed=31))
        self.assertEqual([row["s"] for row in rows], [1, 2])
        for row in rows:
            self.assertLessEqual(abs(row["estimate"] - row["exact"]), 4 * row["stderr"])


class AntiWickTests(SimpleTestCase):
    def test_constant(self):
        state = random_state(build_basis(2, 3), np.random.default_rng(37))
        estimate = anti_wick_expectation(state, [0, 1], 0.5, constant_test_function(), SamplerConfig(10_000, seed=1))
        self.assertAlmostEqual(estimate.real, 1.0, places=12)

    def test_gaussian_against_vacuum(self):
        vacuum = vacuum_state(build_basis(2, 3))
        b = gaussian_test_function(1.0)
        estimate = anti_wick_expectation(vacuum, [0, 1], 1.0, b, SamplerConfig(100_000, seed=41))
        self.assertTrue(estimate.agrees_with(0.25, sigmas=4), (estimate.value, estimate.stderr))
        self.assertLessEqual(abs(estimate.value), b.sup_norm)

    def test_clipped_monomial_approaches_occupation(self):
        vacuum = vacuum_state(build_basis(1, 3))
        estimate = anti_wick_expectation(vacuum, [0], 1.0, clipped_monomial(0, 50.0), SamplerConfig(100_000, seed=43))
        self.assertTrue(estimate.agrees_with(1.0, sigmas=4), (estimate.value, estimate.stderr))


class BerezinLiebTests(SimpleTestCase):
    def test_equal_states(self):
        state = random_state(build_basis(2, 3), np.random.default_rng(47))
        result = berezin_lieb_check(state, state, [0, 1], 0.5, SamplerConfig(5_000, seed=1))
        self.assertAlmostEqual(result.quantum, 0.0, places=10)
        self.assertEqual(result.classical, 0.0)
        self.assertTrue(result.passed)

    def test_radial_quadrature_oracle(self):
        rng = np.random.default_rng(53)
        basis = build_basis(1, 6)
        for _ in range(5):
            first = random_state(basis, rng, diagonal=True)
            second = random_state(basis, rng, diagonal=True)
            quantum = relative_entropy(first, second)
            self.assertGreaterEqual(quantum - radial_relative_entropy(first, second), -1e-8)

    def test_monte_carlo_matches_quadrature(self):
        rng = np.random.default_rng(59)
        basis = build_basis(1, 6)
        first = random_state(basis, rng, diagonal=True)
        second = random_state(basis, rng, diagonal=True)
        result = berezin_lieb_check(first, second, [0], 0.5, SamplerConfig(100_000, seed=61))
        oracle = radial_relative_entropy(first, second)
        self.assertLessEqual(abs(result.classical - oracle), 4 * result.stderr + 1e-9)
        self.assertTrue(result.passed)

    def test_free_states_at_two_temperatures(self):
        s = dirichlet_spectrum(2)
        hot = free_gibbs_state(s, 3.0, N_max=20)
        cold = free_gibbs_state(s, 2.0, N_max=20)
        result = berezin_lieb_check(hot, cold, [0, 1], 0.5, SamplerConfig(50_000, seed=67))
        self.assertTrue(result.passed, result.to_json())
        self.assertGreater(result.quantum, 0.0)


class CylindricalTests(SimpleTestCase):
    def test_projection_matches_smaller_subspace(self):
        state = random_state(build_basis(2, 4), np.random.default_rng(71))
        rows = cylindrical_check(state, [0, 1], [1], 0.5, SamplerConfig(100_000, seed=73), sigmas=4)
        self.assertEqual([row["k"] for row in rows], [1, 2])
        for row in rows:
            self.assertTrue(row["passed"], row)

    def test_not_a_subspace(self):
        state = vacuum_state(build_basis(2, 2))
        with self.assertRaises(InvalidArgumentError):
            cylindrical_check(state, [0], [1], 0.5)
