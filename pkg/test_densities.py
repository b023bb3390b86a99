# test_densities.py
import math
import unittest

import numpy as np
from scipy import integrate, stats

import densities
from errors import InvalidParameterError, SampleTooSmallError


def _integrate_power(d, p):
    lo, hi = d.support
    cuts = [lo] + [b for b in d.breakpoints if lo < b < hi] + [hi]
    return sum(integrate.quad(lambda x: float(d.pdf_fn(np.asarray(x))) ** p, a, b, limit=200)[0]
               for a, b in zip(cuts[:-1], cuts[1:]))


class TestDensityConstants(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.smooth = [
            densities.gaussian(0.0, 1.0),
            densities.gaussian(1.0, 2.0),
            densities.laplace(0.7),
            densities.uniform(-1.0, 2.0),
            densities.mixture(),
        ]

    def test_theta2_and_theta3_match_quadrature(self):
        for d in self.smooth:
            with self.subTest(density=d.spec):
                self.assertAlmostEqual(densities.theta2(d), _integrate_power(d, 2), places=7)
                self.assertAlmostEqual(densities.theta3(d), _integrate_power(d, 3), places=7)

    def test_known_values(self):
        g = densities.gaussian()
        self.assertAlmostEqual(densities.theta2(g), 0.2820948, places=7)
        self.assertAlmostEqual(densities.theta2(densities.laplace(1.0)), 0.25, places=12)
        self.assertAlmostEqual(densities.theta2(densities.cusp(-0.3)), 0.6125, places=12)

    def test_cusp_theta2_matches_quadrature(self):
        d = densities.cusp(-0.3)
        numeric = 2.0 * integrate.quad(lambda x: (0.35 * x ** -0.3) ** 2, 0.0, 1.0)[0]
        self.assertAlmostEqual(densities.theta2(d), numeric, places=6)

    def test_tau_sq(self):
        self.assertEqual(densities.tau_sq(densities.uniform()), 0.0)
        self.assertGreater(densities.tau_sq(densities.laplace()), 0.0)
        heavy = densities.cusp(-0.4)
        self.assertTrue(math.isinf(densities.theta3(heavy)))
        self.assertTrue(math.isinf(densities.tau_sq(heavy)))
        self.assertTrue(math.isinf(heavy.sup_norm))
        self.assertTrue(math.isfinite(densities.tau_sq(densities.cusp(-0.3))))

    def test_mixture_sup_norm(self):
        d = densities.mixture()
        grid = np.linspace(-3, 3, 20001)
        self.assertAlmostEqual(d.sup_norm, float(np.max(d.pdf_fn(grid))), places=6)

    def test_sobolev_orders(self):
        self.assertTrue(math.isinf(densities.gaussian().sobolev_sup))
        self.assertAlmostEqual(densities.cusp(-0.3).sobolev_sup, 0.2, places=12)
        self.assertEqual(densities.uniform().sobolev_sup, 0.5)

    def test_invalid_parameters(self):
        with self.assertRaises(InvalidParameterError):
            densities.gaussian(sigma=0.0)
        with self.assertRaises(InvalidParameterError):
            densities.cusp(-0.6)
        with self.assertRaises(InvalidParameterError):
            densities.uniform(1.0, 1.0)


class TestAutocorrelation(unittest.TestCase):

    def test_value_at_zero_is_theta2(self):
        for d in (densities.gaussian(), densities.laplace(), densities.uniform(), densities.mixture(),
                  densities.cusp(-0.3)):
            with self.subTest(density=d.spec):
                self.assertAlmostEqual(densities.autocorrelation(d, 0.0), densities.theta2(d), places=9)

    def test_matches_quadrature(self):
        cases = [(densities.laplace(1.0), 0.7), (densities.mixture(), 0.5), (densities.uniform(0, 1), 0.25),
                 (densities.cusp(-0.3), 0.4), (densities.cusp(-0.3), 1.3)]
        for d, t in cases:
            with self.subTest(density=d.spec, t=t):
                lo, hi = d.support
                pts = sorted({p for p in d.breakpoints + tuple(b - t for b in d.breakpoints)
                              if math.isfinite(lo) and lo < p < hi}) or None
                numeric = integrate.quad(lambda x: float(d.pdf_fn(np.asarray(x)) * d.pdf_fn(np.asarray(x + t))),
                                         lo, hi, points=pts if math.isfinite(lo) else None, limit=400)[0]
                self.assertAlmostEqual(densities.autocorrelation(d, t), numeric, places=5)

    def test_vanishes_beyond_support(self):
        self.assertEqual(densities.autocorrelation(densities.cusp(-0.3), 2.5), 0.0)
        self.assertEqual(densities.autocorrelation(densities.uniform(0, 1), 1.5), 0.0)

    def test_characteristic_abs_sq(self):
        self.assertAlmostEqual(densities.characteristic_abs_sq(densities.gaussian(), 0.0), 1.0, places=12)
        self.assertAlmostEqual(densities.characteristic_abs_sq(densities.cusp(-0.3), 0.0), 1.0, places=12)
        self.assertAlmostEqual(densities.characteristic_abs_sq(densities.gaussian(), 1.0), math.exp(-1.0), places=12)

    def test_cusp_characteristic_over_wide_frequencies(self):
        gamma = -0.3
        d = densities.cusp(gamma)
        # x = t^(1 / (gamma + 1)) turns the transform into a smooth integral over t
        for u in np.linspace(0.5, 50.0, 100):
            with self.subTest(u=u):
                value = densities.characteristic_abs_sq(d, u)
                self.assertTrue(math.isfinite(value))
                self.assertGreaterEqual(value, 0.0)
                self.assertLessEqual(value, 1.0)
                ft = integrate.quad(lambda t: math.cos(u * t ** (1.0 / (gamma + 1.0))), 0.0, 1.0, limit=400)[0]
                self.assertAlmostEqual(value, ft * ft, delta=1e-8)

    def test_cusp_characteristic_envelope(self):
        # |F f(u)|^2 decays like u^(-2 (gamma + 1)); its envelope over a window shrinks accordingly
        d = densities.cusp(-0.3)
        peak = lambda lo: max(densities.characteristic_abs_sq(d, u) for u in np.linspace(lo, 2.0 * lo, 60))
        ratio = peak(40.0) / peak(10.0)
        self.assertLess(ratio, 0.4)
        self.assertGreater(ratio, 4.0 ** -2.0)


class TestSampling(unittest.TestCase):

    def test_uniforms_stay_inside_open_interval(self):
        edge = np.array([0.0, 0.5, 1.0 - 2.0 ** -53])
        u = densities.open_unit(edge)
        self.assertTrue(np.all(u > 0.0))
        self.assertTrue(np.all(u < 1.0))
        self.assertEqual(u[0], 2.0 ** -54)
        self.assertEqual(u[2], np.nextafter(1.0, 0.0))

    def test_reproducible(self):
        d = densities.mixture()
        self.assertEqual(densities.sample(d, 500, 42), densities.sample(d, 500, 42))
        self.assertNotEqual(densities.sample(d, 500, 42), densities.sample(d, 500, 43))

    def test_prefix_stable_across_chunks(self):
        d = densities.laplace()
        long = densities.sample(d, 5000, 7).values
        np.testing.assert_array_equal(long[:100], densities.sample(d, 100, 7).values)
        np.testing.assert_array_equal(long[:4100], densities.sample(d, 4100, 7).values)

    def test_supports(self):
        x = densities.sample(densities.cusp(-0.35), 5000, 1).values
        self.assertTrue(np.all(np.abs(x) <= 1.0))
        u = densities.sample(densities.uniform(2.0, 3.0), 5000, 1).values
        self.assertTrue(np.all((u > 2.0) & (u < 3.0)))

    def test_samples_follow_their_cdf(self):
        for d in (densities.gaussian(), densities.laplace(0.5), densities.mixture(), densities.cusp(-0.3)):
            with self.subTest(density=d.spec):
                x = densities.sample(d, 5000, 2024).values
                result = stats.kstest(x, lambda v: densities.cdf(d, v))
                self.assertLess(result.statistic, 0.03)

    def test_too_small(self):
        with self.assertRaises(SampleTooSmallError):
            densities.sample(densities.gaussian(), 1, 0)


class TestParseDensity(unittest.TestCase):

    def test_specifiers(self):
        d = densities.parse_density("cusp:gamma=-0.3")
        self.assertEqual(d.name, "cusp")
        self.assertEqual(d.params, {"gamma": -0.3})
        self.assertEqual(densities.parse_density("uniform").params, {"a": 0.0, "b": 1.0})
        self.assertEqual(densities.parse_density(d.spec).params, d.params)

    def test_bad_specifiers(self):
        for spec in ("weibull", "gaussian:foo=1", "gaussian:sigma=abc", "gaussian:sigma"):
            with self.subTest(spec=spec):
                with self.assertRaises(InvalidParameterError):
                    densities.parse_density(spec)


if __name__ == "__main__":
    unittest.main()
