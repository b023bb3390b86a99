# test_estimators.py
import math
import unittest

import numpy as np
from scipy import integrate

import densities
import estimators
from errors import InvalidBandwidthError, InvalidLevelError, InvalidParameterError, SampleTooSmallError
from kernels import KERNELS
from oracle import expected_tn_exact, t_n_naive


class TestSample(unittest.TestCase):

    def test_from_values(self):
        s = estimators.Sample.from_values([3.0, 1.0, 2.0])
        self.assertEqual(s.n, 3)
        self.assertEqual(len(s), 3)
        np.testing.assert_array_equal(s.sorted_values(), [1.0, 2.0, 3.0])
        with self.assertRaises(ValueError):
            s.values[0] = 5.0

    def test_rejects_bad_input(self):
        with self.assertRaises(SampleTooSmallError):
            estimators.Sample.from_values([1.0])
        with self.assertRaises(SampleTooSmallError):
            estimators.Sample.from_values([1.0, float("inf")])


class TestTn(unittest.TestCase):

    def test_worked_examples(self):
        self.assertAlmostEqual(estimators.t_n([0.0, 0.0], KERNELS["gaussian"], 1.0), 0.3989423, places=7)
        self.assertAlmostEqual(estimators.t_n([0.0, 1.0, 2.0], KERNELS["box"], 1.0), 1.0 / 3.0, places=12)

    def test_matches_naive_double_loop(self):
        rng = np.random.default_rng(20240501)
        for trial in range(100):
            name = list(KERNELS)[trial % 4]
            n = int(rng.integers(2, 501))
            h = float(10 ** rng.uniform(-3, 0))
            x = rng.standard_normal(n) * rng.uniform(0.1, 3.0)
            with self.subTest(kernel=name, n=n, h=h):
                fast = estimators.t_n(x, KERNELS[name], h)
                slow = t_n_naive(x, KERNELS[name], h)
                self.assertLessEqual(abs(fast - slow), 1e-12 * max(abs(slow), 1e-300))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(400)
        k = KERNELS["epanechnikov"]
        self.assertEqual(estimators.t_n(x, k, 0.2), estimators.t_n(rng.permutation(x), k, 0.2))

    def test_translation_invariance(self):
        x = np.random.default_rng(4).standard_normal(300)
        k = KERNELS["gaussian"]
        self.assertAlmostEqual(estimators.t_n(x, k, 0.3), estimators.t_n(x + 5.0, k, 0.3), places=10)

    def test_scale_covariance(self):
        x = densities.sample(densities.mixture(), 400, 6)
        for name in ("gaussian", "epanechnikov"):
            k = KERNELS[name]
            for scale in (0.25, 3.0):
                with self.subTest(kernel=name, scale=scale):
                    base = estimators.t_n(x, k, 0.2)
                    self.assertAlmostEqual(estimators.t_n(scale * x, k, 0.2 * scale), base / scale,
                                           delta=1e-12 * base / scale)

    def test_nonnegative_for_nonnegative_kernels(self):
        rng = np.random.default_rng(12)
        for trial in range(20):
            k = KERNELS[list(KERNELS)[trial % 4]]
            x = rng.standard_cauchy(int(rng.integers(2, 200)))
            h = float(10 ** rng.uniform(-3, 0))
            with self.subTest(kernel=k.name, n=x.size, h=h):
                self.assertGreaterEqual(estimators.t_n(x, k, h), 0.0)

    def test_parallel_blocks_are_bit_identical(self):
        x = densities.sample(densities.laplace(), 3000, 11)
        k = KERNELS["gaussian"]
        self.assertEqual(estimators.t_n(x, k, 0.05, n_jobs=1), estimators.t_n(x, k, 0.05, n_jobs=4))

    def test_invalid_bandwidth(self):
        for h in (0.0, -1.0, float("nan"), float("inf")):
            with self.subTest(h=h):
                with self.assertRaises(InvalidBandwidthError):
                    estimators.t_n([0.0, 1.0], KERNELS["box"], h)

    def test_monte_carlo_mean_matches_exact_expectation(self):
        d = densities.gaussian()
        k = KERNELS["gaussian"]
        values = [estimators.t_n(densities.sample(d, 400, seed), k, 0.3) for seed in range(200)]
        se = np.std(values, ddof=1) / math.sqrt(len(values))
        self.assertLess(abs(np.mean(values) - expected_tn_exact(d, k, 0.3)), 4.0 * se)


class TestTbarAndCombinations(unittest.TestCase):

    def test_tbar_matches_integrated_cross_terms(self):
        x = np.array([-0.8, -0.1, 0.05, 0.4, 1.3])
        h = 0.35
        n = x.size
        for name in ("gaussian", "box", "triangular"):
            k = KERNELS[name]
            with self.subTest(kernel=name):
                def integrand(t):
                    bumps = k.pdf_fn((t - x) / h) / h
                    return float(np.sum(bumps) ** 2 - np.sum(bumps ** 2))
                pts = sorted(set(np.concatenate([x - h, x, x + h]).tolist()))
                numeric = integrate.quad(integrand, -4.0, 4.0, points=pts, limit=400)[0] / (n * (n - 1))
                self.assertAlmostEqual(estimators.t_bar_n(x, k, h), numeric, delta=1e-6 * numeric)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(23)
        x = densities.sample(densities.laplace(), 500, 2)
        shuffled = rng.permutation(x)
        for name in ("gaussian", "triangular"):
            k = KERNELS[name]
            with self.subTest(kernel=name):
                self.assertAlmostEqual(estimators.t_bar_n(x, k, 0.15), estimators.t_bar_n(shuffled, k, 0.15), places=13)
                self.assertAlmostEqual(estimators.tau_sq_hat(x, k, 0.15), estimators.tau_sq_hat(shuffled, k, 0.15),
                                       places=13)

    def test_bickel_ritov_combination(self):
        x = densities.sample(densities.mixture(), 200, 5)
        k = KERNELS["triangular"]
        expected = 2.0 * estimators.t_n(x, k, 0.2) - estimators.t_bar_n(x, k, 0.2)
        self.assertAlmostEqual(estimators.bickel_ritov(x, k, 0.2), expected, places=12)


class TestVarianceAndIntervals(unittest.TestCase):

    def test_tau_sq_hat(self):
        self.assertAlmostEqual(estimators.tau_sq_hat([0.0, 0.0], KERNELS["gaussian"], 1.0), 0.0, places=12)
        x = densities.sample(densities.laplace(), 2000, 9)
        tau = estimators.tau_sq_hat(x, KERNELS["gaussian"], 0.1)
        self.assertGreater(tau, 0.0)
        self.assertLess(abs(tau - densities.tau_sq(densities.laplace())), 0.01)

    def test_confidence_interval(self):
        lo, hi = estimators.confidence_interval(0.3, 0.04, 100, 0.95)
        self.assertAlmostEqual(hi - 0.3, 1.959964 * 2 * 0.2 / 10.0, places=6)
        self.assertAlmostEqual(0.3 - lo, hi - 0.3, places=14)
        for level in (0.0, 1.0, 1.5):
            with self.subTest(level=level):
                with self.assertRaises(InvalidLevelError):
                    estimators.confidence_interval(0.3, 0.04, 100, level)

    def test_variance_budget_and_bandwidth_rule(self):
        self.assertAlmostEqual(estimators.fixed_bandwidth_rule(10000, 1.0), 10000 ** -0.4, places=14)
        k = KERNELS["box"]
        self.assertAlmostEqual(estimators.variance_budget(100, 0.01, 1.0, k, 0.5), 1.0 / (100 ** 2 * 0.01), places=12)
        with self.assertRaises(InvalidParameterError):
            estimators.fixed_bandwidth_rule(100, 0.0)


class TestEstimateFixed(unittest.TestCase):

    def test_result_shape(self):
        result = estimators.estimate_fixed([0.0, 1.0, 2.0], KERNELS["box"], 1.0)
        payload = result.to_dict()
        self.assertEqual(set(payload), {"theta_hat", "h", "tau_sq_hat", "ci", "n", "method", "level"})
        self.assertAlmostEqual(payload["theta_hat"], 1.0 / 3.0, places=12)
        self.assertLessEqual(payload["ci"][0], payload["theta_hat"])
        self.assertGreaterEqual(payload["ci"][1], payload["theta_hat"])

    def test_methods(self):
        x = densities.sample(densities.gaussian(), 300, 1)
        k = KERNELS["gaussian"]
        self.assertAlmostEqual(estimators.estimate_fixed(x, k, 0.2, "tbar").theta_hat,
                               estimators.t_bar_n(x, k, 0.2), places=12)
        with self.assertRaises(InvalidParameterError):
            estimators.estimate_fixed(x, k, 0.2, "median")


if __name__ == "__main__":
    unittest.main()
