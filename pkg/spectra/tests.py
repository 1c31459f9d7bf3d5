import math

from django.test import SimpleTestCase

from common.exceptions import InvalidArgumentError

from .constants import ANHARMONIC, CUSTOM, DIRICHLET_INTERVAL
from .spectrum import (
    OneBodySpectrum,
    build_spectrum,
    custom_spectrum,
    dirichlet_spectrum,
    linear_spectrum,
    schatten_trace,
)


class SpectrumTests(SimpleTestCase):
    def test_dirichlet(self):
        s = dirichlet_spectrum(3)
        self.assertEqual(s.eigenvalues, (1.0, 4.0, 9.0))
        self.assertEqual(s.family_tag, DIRICHLET_INTERVAL)
        self.assertEqual(s.mode_count, 3)

    def test_linear(self):
        s = linear_spectrum(4, 0.5)
        self.assertEqual(s.eigenvalues, (0.5, 1.0, 1.5, 2.0))
        self.assertEqual(s.family_tag, ANHARMONIC)
        with self.assertRaises(InvalidArgumentError):
            linear_spectrum(2, 0.0)

    def test_custom_is_sorted_and_shifted(self):
        s = custom_spectrum([3.0, 1.0], shift=0.5)
        self.assertEqual(s.eigenvalues, (1.5, 3.5))
        self.assertEqual(s.family_tag, CUSTOM)

    def test_rejects_bad_eigenvalues(self):
        for values in ((), (0.0, 1.0), (-1.0,), (math.inf,), (2.0, 1.0)):
            with self.assertRaises(InvalidArgumentError):
                OneBodySpectrum(values)
        with self.assertRaises(InvalidArgumentError):
            OneBodySpectrum((1.0,), "unknown")
        with self.assertRaises(InvalidArgumentError):
            dirichlet_spectrum(0)

    def test_restriction_and_concatenation(self):
        s = dirichlet_spectrum(3)
        self.assertEqual(s.restricted([2, 0]).eigenvalues, (1.0, 9.0))
        self.assertEqual(s.concatenated(custom_spectrum([2.0])).eigenvalues, (1.0, 2.0, 4.0, 9.0))
        self.assertEqual(s.shifted(1.0).eigenvalues, (2.0, 5.0, 10.0))

    def test_schatten_trace(self):
        s = dirichlet_spectrum(2)
        self.assertAlmostEqual(schatten_trace(s, 1), 1.25)
        self.assertAlmostEqual(schatten_trace(s, 2), 1 + 1 / 16)
        with self.assertRaises(InvalidArgumentError):
            schatten_trace(s, 0)

    def test_linear_trace_diverges_slowly(self):
        # tr h^{-1} grows like log J, tr h^{-2} stays bounded
        small, large = linear_spectrum(10, 1.0), linear_spectrum(1000, 1.0)
        self.assertGreater(schatten_trace(large, 1) - schatten_trace(small, 1), 4.0)
        self.assertLess(schatten_trace(large, 2), math.pi**2 / 6)

    def test_build_spectrum(self):
        self.assertEqual(build_spectrum({"family": DIRICHLET_INTERVAL, "modes": 2}).eigenvalues, (1.0, 4.0))
        self.assertEqual(build_spectrum({"family": ANHARMONIC, "modes": 2, "slope": 2.0}).eigenvalues, (2.0, 4.0))
        self.assertEqual(build_spectrum({"family": CUSTOM, "eigenvalues": [5.0]}).eigenvalues, (5.0,))
        shifted = build_spectrum({"family": DIRICHLET_INTERVAL, "modes": 1, "shift": 1.0})
        self.assertEqual(shifted.eigenvalues, (2.0,))
        with self.assertRaises(InvalidArgumentError):
            build_spectrum({"family": "torus", "modes": 2})
