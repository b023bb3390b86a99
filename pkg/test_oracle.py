# test_oracle.py
import math
import os
import unittest

import numpy as np
from scipy import integrate

import densities
import oracle
from errors import DegenerateRateFitError, InvalidParameterError
from kernels import KERNELS, abs_moment

SLOW = os.getenv("QFE_SLOW_TESTS")


class TestNaive(unittest.TestCase):

    def test_worked_examples(self):
        self.assertAlmostEqual(oracle.t_n_naive([0.0, 0.0], KERNELS["gaussian"], 1.0), 0.3989423, places=7)
        self.assertAlmostEqual(oracle.t_n_naive([0.0, 1.0, 2.0], KERNELS["box"], 1.0), 1.0 / 3.0, places=12)


class TestExactExpectations(unittest.TestCase):

    def test_gaussian_closed_form(self):
        d, k = densities.gaussian(), KERNELS["gaussian"]
        value = oracle.expected_tn_exact(d, k, 0.5)
        self.assertAlmostEqual(value, 0.265962, places=6)
        closed = 1.0 / math.sqrt(2.0 * math.pi * 2.25)
        self.assertAlmostEqual(value, closed, places=12)
        self.assertAlmostEqual(value - d.theta2, closed - 0.5 / math.sqrt(math.pi), places=12)
        self.assertAlmostEqual(value - d.theta2, -0.016133, places=6)
        self.assertAlmostEqual(oracle.expected_tn_exact(d, k, 1e-6), d.theta2, places=10)

    def test_quadrature_path_matches_closed_form(self):
        # a mixture of two identical standard normals is the standard normal
        d = densities.mixture(w=0.5, mu1=0.0, sigma1=1.0, mu2=0.0, sigma2=1.0)
        k = KERNELS["gaussian"]
        for h in (0.1, 0.5, 1.0):
            with self.subTest(h=h):
                closed = 1.0 / math.sqrt(2.0 * math.pi * (2.0 + h * h))
                self.assertAlmostEqual(oracle.expected_tn_exact(d, k, h), closed, delta=1e-9)

    def test_uniform_with_box_kernel(self):
        d, k = densities.uniform(0.0, 1.0), KERNELS["box"]
        h = 0.4
        self.assertAlmostEqual(oracle.expected_tn_exact(d, k, h), 1.0 - h / 2.0, places=9)
        self.assertAlmostEqual(oracle.expected_tbar_exact(d, k, h), 1.0 - 2.0 * h / 3.0, places=9)
        self.assertAlmostEqual(oracle.smoothing_ise(d, k, h), h / 3.0, places=9)

    def test_smoothing_ise_gaussian(self):
        d, k = densities.gaussian(), KERNELS["gaussian"]
        h = 0.7
        m = lambda x: math.exp(-x * x / (2 * (1 + h * h))) / math.sqrt(2 * math.pi * (1 + h * h))
        f = lambda x: math.exp(-x * x / 2) / math.sqrt(2 * math.pi)
        numeric = integrate.quad(lambda x: (m(x) - f(x)) ** 2, -np.inf, np.inf)[0]
        self.assertAlmostEqual(oracle.smoothing_ise(d, k, h), numeric, places=10)

    @unittest.skipUnless(SLOW, "set QFE_SLOW_TESTS=1 to run Monte Carlo checks")
    def test_monte_carlo_mean_of_tn(self):
        from estimators import t_n
        d, k = densities.gaussian(), KERNELS["gaussian"]
        values = [t_n(densities.sample(d, 200, seed), k, 0.5) for seed in range(2000)]
        se = np.std(values, ddof=1) / math.sqrt(len(values))
        self.assertLess(abs(np.mean(values) - oracle.expected_tn_exact(d, k, 0.5)), 4.0 * se)

    def test_self_convolution_numeric(self):
        self.assertAlmostEqual(oracle.self_convolution_numeric(KERNELS["box"], 1.0), 0.25, places=10)
        self.assertEqual(oracle.self_convolution_numeric(KERNELS["box"], 3.0), 0.0)


class TestBiasLaw(unittest.TestCase):

    def test_cusp_exponent(self):
        result = oracle.bias_rate_probe(densities.cusp(-0.3), KERNELS["box"], [0.2, 0.1, 0.05, 0.025])
        self.assertLess(abs(result.slope - 0.4), 0.1)
        self.assertEqual(result.excluded, [])

    def test_smooth_exponent(self):
        result = oracle.bias_rate_probe(densities.gaussian(), KERNELS["gaussian"], [0.2, 0.1, 0.05, 0.025])
        self.assertGreaterEqual(result.slope, 1.8)

    def test_degenerate_rate_fits(self):
        with self.assertRaises(DegenerateRateFitError):
            oracle.bias_slope([0.4, 0.2, 0.1, 0.05], [1e-3] * 4)
        with self.assertRaises(DegenerateRateFitError):
            oracle.bias_slope([0.4, 0.2, 0.1, 0.05], [0.0, 0.0, 0.0, 1e-3])
        with self.assertRaises(InvalidParameterError):
            oracle.bias_rate_probe(densities.gaussian(), KERNELS["gaussian"], [0.2, 0.1, 0.05])

    def test_zero_biases_are_reported(self):
        result = oracle.bias_slope([0.4, 0.2, 0.1, 0.05], [1.6e-1, 4e-2, 1e-2, 0.0])
        self.assertEqual(result.excluded, [0.05])
        self.assertAlmostEqual(result.slope, 2.0, places=10)

    def test_bias_within_moment_envelope(self):
        d, k = densities.gaussian(), KERNELS["box"]
        a = 0.5
        h_list = [0.4, 0.2, 0.1, 0.05]
        ratio_bound = max(oracle.autocorrelation_ratio(d, t, a) for t in np.linspace(1e-3, max(h_list), 400))
        for h in h_list:
            with self.subTest(h=h):
                bias = abs(oracle.expected_tn_exact(d, k, h) - d.theta2)
                self.assertLessEqual(bias, abs_moment(k, 2 * a) * ratio_bound * h ** (2 * a))

    def test_autocorrelation_ratio_stays_bounded(self):
        d = densities.cusp(-0.3)
        ratios = [oracle.autocorrelation_ratio(d, t, 0.2) for t in (1e-2, 1e-3, 1e-4)]
        self.assertLess(max(ratios) / min(ratios), 2.0)
        with self.assertRaises(InvalidParameterError):
            oracle.autocorrelation_ratio(d, 0.0, 0.2)
        with self.assertRaises(InvalidParameterError):
            oracle.autocorrelation_ratio(d, 0.1, 0.7)

    def test_sobolev_energy(self):
        value = oracle.sobolev_energy(densities.gaussian(), 1.0, 50.0)
        self.assertAlmostEqual(value, 1.5 * math.sqrt(math.pi), places=7)

    def test_sobolev_energy_trend_for_cusp(self):
        # sobolev order of cusp(-0.3) is 0.2: the energy settles below it and keeps growing above it
        d = densities.cusp(-0.3)
        growth = lambda alpha: oracle.sobolev_energy(d, alpha, 50.0) / oracle.sobolev_energy(d, alpha, 12.5)
        below, above = growth(0.05), growth(0.6)
        self.assertLess(below, 1.15)
        self.assertGreater(above, 1.4)
        self.assertGreater(above, below)


class TestHoeffding(unittest.TestCase):

    def test_identity_gaussian(self):
        d, k = densities.gaussian(), KERNELS["gaussian"]
        s = densities.sample(d, 50, 3)
        self.assertLessEqual(oracle.hoeffding_check(s, d, k, 0.3), 1e-9)

    def test_identity_random_instances(self):
        dens = [densities.laplace(), densities.mixture(), densities.uniform(), densities.gaussian(sigma=0.7)]
        kernels = [KERNELS["box"], KERNELS["gaussian"], KERNELS["triangular"], KERNELS["epanechnikov"]]
        rng = np.random.default_rng(41)
        for i in range(20):
            d, k = dens[i % 4], kernels[(i // 4) % 4]
            n = int(rng.integers(2, 61))
            h = float(rng.uniform(0.1, 0.6))
            with self.subTest(density=d.spec, kernel=k.name, n=n, h=h):
                s = densities.sample(d, n, 100 + i)
                self.assertLessEqual(oracle.hoeffding_check(s, d, k, h), 1e-9)

    def test_two_points(self):
        d, k = densities.gaussian(), KERNELS["gaussian"]
        self.assertLessEqual(oracle.hoeffding_check([0.1, -0.4], d, k, 0.5), 1e-12)

    def test_smoothed_density_paths_agree(self):
        d = densities.mixture()
        x = np.array([-1.5, -0.2, 0.9])
        closed = oracle.smoothed_density(d, KERNELS["gaussian"], 0.3, x)
        numeric = [integrate.quad(lambda u: float(KERNELS["gaussian"].pdf_fn(np.asarray(u)) *
                                                  d.pdf_fn(np.asarray(p - 0.3 * u))), -40, 40)[0] for p in x]
        np.testing.assert_allclose(closed, numeric, rtol=1e-7)
        self.assertAlmostEqual(oracle.smoothed_density(densities.uniform(), KERNELS["box"], 0.2, 0.5), 1.0, places=12)

    def test_degenerate_variance_bound(self):
        d, k = densities.gaussian(), KERNELS["gaussian"]
        n, h = 100, 0.2
        values = [oracle.degenerate_part(densities.sample(d, n, seed), d, k, h) for seed in range(500)]
        bound = oracle.degenerate_variance_bound(d, k, h, n)
        self.assertLessEqual(np.var(values, ddof=1), 1.1 * bound)


class TestLinearPart(unittest.TestCase):

    def test_spot_value(self):
        d, k = densities.gaussian(), KERNELS["gaussian"]
        m = lambda x: math.exp(-x * x / 4.0) / math.sqrt(4.0 * math.pi)
        f = lambda x: math.exp(-x * x / 2.0) / math.sqrt(2.0 * math.pi)
        numeric = integrate.quad(lambda x: (2 * m(x) - 2 * f(x)) ** 2 * f(x), -np.inf, np.inf)[0]
        lhs, rhs = oracle.linear_part_variance_check(d, k, 1.0, 100)
        self.assertAlmostEqual(lhs, numeric, places=10)
        self.assertGreater(rhs, 0.0)

    def test_decay_for_smooth_density(self):
        result = oracle.linear_part_decay(densities.gaussian(), KERNELS["gaussian"], [1.0, 0.5, 0.25, 0.125, 0.0625])
        self.assertTrue(result.monotone)
        self.assertGreater(result.slope, 3.0)

    def test_decay_for_cusp(self):
        result = oracle.linear_part_decay(densities.cusp(-0.3), KERNELS["box"], [0.2, 0.1, 0.05, 0.025])
        self.assertLess(abs(result.slope - 0.4), 0.15)
        self.assertTrue(all(b <= a for a, b in zip(result.lhs, result.lhs[1:])))


if __name__ == "__main__":
    unittest.main()
