import math

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from dist.families import Lattice, Pareto
from dist.services import standardize, tilt_truncate
from lattice.services import discretize, from_distribution, nfold, query, restricted_walk

from . import services
from .types import BlockStats, EstimatorMethod, EstimatorResult


def coin():
    return Lattice({0: 0.5, 1: 0.5})


class BlockStatsTests(SimpleTestCase):

    def test_merge_matches_whole(self):
        values = np.linspace(-3.0, 7.0, 101) ** 2
        merged = BlockStats(0, 0.0, 0.0)
        for part in np.array_split(values, 7):
            merged = merged.merge(BlockStats.of(part))
        whole = BlockStats.of(values)
        self.assertEqual(merged.count, 101)
        self.assertAlmostEqual(merged.mean, whole.mean, places=10)
        self.assertAlmostEqual(merged.m2, whole.m2, delta=1e-8 * whole.m2)
        self.assertAlmostEqual(merged.std_error, values.std(ddof=1) / math.sqrt(101), places=10)


class EstimatorResultTests(SimpleTestCase):

    def test_json_round_trip(self):
        result = EstimatorResult(0.25, 0.01, 400, 'plain', 7, {'n': 3, 'x': 1.5, 'T': math.inf})
        back = EstimatorResult.from_dict(result.as_dict())
        self.assertEqual(back, result)
        self.assertIn('"inf"', result.to_json())

    def test_rejects_negative_values(self):
        with self.assertRaises(ValueError):
            EstimatorResult(-0.1, 0.01, 400, 'plain', 7)
        with self.assertRaises(ValueError):
            EstimatorResult(0.1, -0.01, 400, 'plain', 7)
        with self.assertRaises(ValueError):
            EstimatorResult(0.1, 0.01, 400, 'unknown', 7)

    def test_plausibility(self):
        self.assertTrue(EstimatorResult(1.02, 0.01, 400, 'plain', 7).plausible_probability)
        self.assertFalse(EstimatorResult(1.2, 0.01, 400, 'plain', 7).plausible_probability)


class ArgumentTests(SimpleTestCase):

    def test_minimum_samples(self):
        with self.assertRaises(ValueError):
            services.plain_tail(coin(), 3, 1.0, samples=99, seed=1)

    def test_positive_n_and_window(self):
        with self.assertRaises(ValueError):
            services.big_jump_cmc(coin(), 0, 1.0, samples=200, seed=1)
        with self.assertRaises(ValueError):
            services.plain_tail(coin(), 3, 1.0, T=0.0, samples=200, seed=1)

    def test_tilt_needs_mass_below_h(self):
        with self.assertRaises(ValueError):
            services.tilted_restricted(Lattice({1: 0.5, 2: 0.5}), 0.5, 3, 1.0, samples=200, seed=1)

    def test_dispatch(self):
        result = services.estimate('plain', coin(), 2, 0.5, samples=200, seed=3)
        self.assertEqual(result.method, EstimatorMethod.PLAIN)
        with self.assertRaises(ValueError):
            services.estimate('tilted_restricted', coin(), 2, 0.5, samples=200, seed=3)


class ConditionalMonteCarloTests(SimpleTestCase):

    def test_tie_aware_values_are_exact(self):
        # with two coin flips the conditional values average to P{S_2 > 1/2} = 3/4
        values = services.cmc_values(coin(), np.array([[0.0], [1.0]]), 0.5)
        self.assertEqual(values.tolist(), [1.0, 0.5])
        self.assertEqual(values.mean(), 0.75)

    def test_continuous_reduces_to_largest_step(self):
        d = Pareto(2.5)
        others = np.array([[1.5, 4.0], [1.0, 1.2]])
        values = services.cmc_values(d, others, 6.0)
        expected = [3 * d.tail(max(4.0, 6.0 - 5.5)), 3 * d.tail(max(1.2, 6.0 - 2.2))]
        np.testing.assert_allclose(values, expected, rtol=1e-14)

    def test_single_step_has_no_variance(self):
        result = services.big_jump_cmc(Pareto(2.5), 1, 3.0, samples=500, seed=11)
        self.assertAlmostEqual(result.estimate, 3.0 ** -2.5, places=14)
        self.assertLess(result.std_error, 1e-12)

    def test_window_is_difference_of_tails(self):
        result = services.big_jump_cmc(coin(), 2, 0.5, T=1.0, samples=2000, seed=5)
        # P{0.5 < S_2 ≤ 1.5} = 1/2
        self.assertTrue(result.covers(0.5))

    def test_variance_reduction(self):
        d = standardize(Pareto(2.5))
        plain = services.plain_tail(d, 20, 25.0, samples=20_000, seed=21)
        cmc = services.big_jump_cmc(d, 20, 25.0, samples=20_000, seed=21)
        self.assertGreater(plain.estimate, 0.0)
        self.assertLessEqual(cmc.std_error, 0.2 * plain.std_error)


class TiltedTests(SimpleTestCase):

    def test_weight_identity_on_lattice(self):
        d = Lattice({0: 0.2, 1: 0.3, 2: 0.5})
        tilt = tilt_truncate(d, 1.5)
        weighted = sum(
            prob * tilt.phi * math.exp(-value / 1.5) for value, prob in tilt.pmf().items() if value > 0.5
        )
        self.assertAlmostEqual(weighted, 0.3, delta=1e-12)

    def test_bound_exponent(self):
        exponent = services.tilted_bound_exponent(coin(), 2.0, 5, 3.0)
        self.assertAlmostEqual(exponent, 5 * math.log(0.5 * (1 + math.exp(0.5))) - 1.5, places=12)
        self.assertLessEqual(math.log(6 / 32), exponent)


class CoverageTests(SimpleTestCase):
    """Estimates against exact lattice answers, accepted within 3.29 standard errors."""

    def misses(self, run, oracle, seeds):
        return sum(not run(seed).covers(oracle) for seed in range(seeds))

    def test_coin_plain(self):
        oracle = query(nfold(from_distribution(coin()), 5), 2.5)
        self.assertAlmostEqual(oracle, 0.5, places=12)
        misses = self.misses(lambda s: services.plain_tail(coin(), 5, 2.5, samples=1000, seed=s), oracle, 1000)
        self.assertLessEqual(misses, 10)

    def test_coin_cmc(self):
        oracle = query(nfold(from_distribution(coin()), 5), 2.5)
        misses = self.misses(lambda s: services.big_jump_cmc(coin(), 5, 2.5, samples=1000, seed=s), oracle, 1000)
        self.assertLessEqual(misses, 10)

    def test_coin_tilted(self):
        oracle = query(restricted_walk(from_distribution(coin()), 2.0, 5), 3.0)
        self.assertAlmostEqual(oracle, 6 / 32, places=12)
        misses = self.misses(
            lambda s: services.tilted_restricted(coin(), 2.0, 5, 3.0, samples=1000, seed=s), oracle, 1000,
        )
        self.assertLessEqual(misses, 10)

    def test_pareto(self):
        d = Pareto(2.5)
        p = discretize(d, 0.001, 1.0, 100.0)
        tail = query(nfold(p, 20, query_max=40.0), 40.0)
        restricted = query(restricted_walk(p, 10.0, 20, query_max=40.0), 40.0)
        self.assertLess(restricted, tail)
        plain = self.misses(lambda s: services.plain_tail(d, 20, 40.0, samples=2000, seed=s), tail, 200)
        cmc = self.misses(lambda s: services.big_jump_cmc(d, 20, 40.0, samples=2000, seed=s), tail, 200)
        tilted = self.misses(
            lambda s: services.tilted_restricted(d, 10.0, 20, 40.0, samples=2000, seed=s), restricted, 200,
        )
        self.assertLessEqual(plain, 2)
        self.assertLessEqual(cmc, 2)
        self.assertLessEqual(tilted, 2)


@override_settings(LAB={**settings.LAB, 'MC_CHUNK': 256})
class DeterminismTests(SimpleTestCase):

    def test_thread_count_does_not_matter(self):
        d = Pareto(2.5)
        for method in (services.plain_tail, services.big_jump_cmc):
            one = method(d, 10, 25.0, samples=2000, seed=9, threads=1)
            four = method(d, 10, 25.0, samples=2000, seed=9, threads=4)
            self.assertEqual(one, four)
        one = services.tilted_restricted(d, 5.0, 10, 25.0, samples=2000, seed=9, threads=1)
        four = services.tilted_restricted(d, 5.0, 10, 25.0, samples=2000, seed=9, threads=4)
        self.assertEqual(one, four)

    def test_seed_changes_result(self):
        a = services.plain_tail(Pareto(2.5), 10, 25.0, samples=2000, seed=1)
        b = services.plain_tail(Pareto(2.5), 10, 25.0, samples=2000, seed=2)
        self.assertNotEqual(a.estimate, b.estimate)
