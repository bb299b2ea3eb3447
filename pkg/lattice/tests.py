import math
import tempfile
from pathlib import Path

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, override_settings

from dist.families import Lattice, Pareto
from main.exceptions import GridOverflowError, SpillError

from . import cache
from . import services
from .pmf import Bracket, LatticePMF, Placement, SpillMode


def lab(**overrides):
    return override_settings(LAB={**settings.LAB, **overrides})


COIN = LatticePMF.from_atoms({0.0: 0.5, 1.0: 0.5}, 1.0)


class DiscretizeTests(SimpleTestCase):

    def test_first_pareto_cell_has_closed_form_mass(self):
        p = services.discretize(Pareto(2.5), 0.5, 1.0, 50.0)
        self.assertEqual(p.origin, 1.5)
        self.assertAlmostEqual(p.masses[0], 1 - 1.5 ** -2.5, places=12)
        self.assertAlmostEqual(p.masses[0], 0.6371132, places=7)

    def test_mass_is_conserved(self):
        p = services.discretize(Pareto(2.5), 0.5, 1.0, 50.0)
        self.assertAlmostEqual(p.total, 1.0, delta=1e-12)
        self.assertAlmostEqual(p.spill_high, 50.0 ** -2.5, places=15)
        self.assertEqual(p.spill_low, 0.0)

    def test_lower_placement_shifts_origin(self):
        p = services.discretize(Pareto(2.5), 0.5, 1.0, 50.0, placement=Placement.LOWER)
        self.assertEqual(p.origin, 1.0)

    def test_mean_placement_matches_first_moment(self):
        d = Pareto(2.5)
        p = services.discretize(d, 0.1, 1.0, 1000.0, placement=Placement.MEAN)
        self.assertLess(abs(p.origin - 1.05), 0.05)
        self.assertAlmostEqual(p.mean(), d.partial_moment(1, 1.0, 1000.0) / p.grid_mass, delta=1e-10)
        upper = services.discretize(d, 0.1, 1.0, 1000.0)
        self.assertAlmostEqual(upper.mean() - p.mean(), 0.05, delta=0.01)
        np.testing.assert_array_equal(upper.masses, p.masses)

    def test_mean_placement_keeps_walk_mean(self):
        p = services.discretize(Pareto(2.5), 0.1, 1.0, 1000.0, placement=Placement.MEAN)
        self.assertAlmostEqual(services.nfold(p, 4).mean(), 4 * p.mean(), delta=1e-9)

    def test_single_step_tail_is_exact_at_grid_points(self):
        d = Pareto(2.5)
        for delta in (0.1, 0.05):
            p = services.discretize(d, delta, 1.0, 50.0)
            lower, upper = p.tail_brackets(np.array([2.0, 5.0, 10.0]))
            np.testing.assert_allclose(lower, d.tail(np.array([2.0, 5.0, 10.0])), rtol=1e-12)
            np.testing.assert_array_equal(lower, upper)

    def test_two_step_error_halves_with_delta(self):
        d = Pareto(2.5)
        tails = []
        for delta in (0.1, 0.05, 0.025):
            p = services.discretize(d, delta, 1.0, 50.0)
            tails.append(services.convolve(p, p).bracket(10.0).lower)
        ratio = (tails[0] - tails[1]) / (tails[1] - tails[2])
        self.assertGreater(ratio, 1.7)
        self.assertLess(ratio, 2.3)

    def test_grid_overflow(self):
        with lab(MAX_CELLS=100):
            with self.assertRaises(GridOverflowError):
                services.discretize(Pareto(2.5), 0.01, 1.0, 50.0)


class ConvolveTests(SimpleTestCase):

    def test_coin_squared(self):
        out = services.convolve(COIN, COIN)
        self.assertEqual(out.origin, 0.0)
        np.testing.assert_allclose(out.masses, [0.25, 0.5, 0.25], atol=1e-15)

    def test_point_mass_at_zero_is_identity(self):
        p = services.discretize(Pareto(2.5), 0.5, 1.0, 20.0)
        out = services.convolve(p, LatticePMF.point_mass(0.0, 0.5))
        self.assertEqual(out.origin, p.origin)
        np.testing.assert_allclose(out.masses, p.masses, atol=1e-15)
        self.assertAlmostEqual(out.total, p.total, delta=1e-12)

    def test_associative_on_random_pmfs(self):
        rng = np.random.default_rng(7)
        laws = []
        for _ in range(3):
            masses = rng.random(64)
            laws.append(LatticePMF(origin=0.0, delta=1.0, masses=masses / masses.sum()))
        p, q, r = laws
        left = services.convolve(services.convolve(p, q), r)
        right = services.convolve(p, services.convolve(q, r))
        np.testing.assert_allclose(left.masses, right.masses, atol=1e-12)

    def test_mismatched_delta(self):
        with self.assertRaises(ValueError):
            services.convolve(COIN, LatticePMF.from_atoms({0.0: 0.5, 0.5: 0.5}, 0.5))

    def test_spill_is_conserved(self):
        p = services.discretize(Pareto(2.5), 0.5, 1.0, 10.0)
        out = services.convolve(p, p)
        self.assertAlmostEqual(out.total, 1.0, delta=1e-12)
        self.assertGreater(out.spill_high, 0.0)

    def test_clip_reports_total_mass(self):
        grid = np.array([0.5, -1e-17, 0.5, -2e-17])
        with self.assertLogs('lattice', 'DEBUG') as logs:
            out, clipped = services.clip_negative(grid)
        self.assertAlmostEqual(clipped, 3e-17, delta=1e-30)
        self.assertTrue(np.all(out >= 0.0))
        self.assertIn('over 2 cells', logs.output[0])

    def test_large_negative_cell_warns_with_total(self):
        with self.assertLogs('lattice', 'WARNING') as logs:
            _, clipped = services.clip_negative(np.array([-1e-10, 1.0, -1e-11]))
        self.assertAlmostEqual(clipped, 1.1e-10, delta=1e-22)
        self.assertIn('clipped in total', logs.output[0])

    def test_exact_grid_is_untouched(self):
        grid = np.array([0.25, 0.5, 0.25])
        out, clipped = services.clip_negative(grid)
        self.assertIs(out, grid)
        self.assertEqual(clipped, 0.0)


class NfoldTests(SimpleTestCase):

    def test_n_equal_one_returns_input(self):
        self.assertIs(services.nfold(COIN, 1), COIN)

    def test_binomial_coin(self):
        law = services.nfold(COIN, 10)
        self.assertAlmostEqual(law.mass_at(5.0), math.comb(10, 5) / 2 ** 10, places=14)
        self.assertAlmostEqual(law.mass_at(5.0), 0.2460938, places=7)

    def test_matches_sequential_convolution(self):
        p = services.discretize(Pareto(2.5), 0.5, 1.0, 60.0)
        direct = p
        for _ in range(7):
            direct = services.convolve(direct, p)
        fast = services.nfold(p, 8)
        xs = np.array([12.0, 15.0, 20.0, 40.0, 60.0])
        np.testing.assert_allclose(fast.tail_brackets(xs)[0], direct.tail_brackets(xs)[0], atol=1e-10)

    def test_mean_and_variance_add_up(self):
        d = Lattice({-1: 0.3, 0: 0.2, 2: 0.5})
        p = services.from_distribution(d)
        law = services.nfold(p, 9)
        self.assertAlmostEqual(law.mean(), 9 * p.mean(), delta=1e-9)
        self.assertAlmostEqual(law.variance(), 9 * p.variance(), delta=1e-9)

    def test_query_cap_keeps_low_queries_exact(self):
        p = services.discretize(Pareto(2.5), 0.5, 1.0, 60.0)
        full = services.nfold(p, 8)
        capped = services.nfold(p, 8, query_max=30.0)
        self.assertLess(capped.size, full.size)
        for x in (12.0, 20.0, 30.0):
            self.assertAlmostEqual(capped.bracket(x).lower, full.bracket(x).lower, delta=1e-12)
        self.assertAlmostEqual(capped.total, full.total, delta=1e-12)

    def test_cache_round_trip(self):
        with tempfile.TemporaryDirectory() as tmp:
            with lab(CACHE_DIR=Path(tmp), CACHE_ENABLED=True):
                key = cache.cache_key(family='coin', delta=1.0, n=10)
                first = services.nfold(COIN, 10, cache_key=key)
                self.assertTrue(any(Path(tmp).glob('*.bjlc')))
                second = services.nfold(COIN, 10, cache_key=key)
                np.testing.assert_array_equal(first.masses, second.masses)
                self.assertIsNone(cache.load(cache.cache_key(family='coin', delta=1.0, n=11)))

    def test_cache_rejects_foreign_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            with lab(CACHE_DIR=Path(tmp)):
                key = cache.cache_key(family='coin', n=3)
                (Path(tmp) / f"{key.hex()}.bjlc").write_bytes(b'not a cache file at all' * 4)
                with self.assertLogs('lattice', 'WARNING'):
                    self.assertIsNone(cache.load(key))


class RestrictedWalkTests(SimpleTestCase):

    def test_coin_restricted_to_zero(self):
        law = services.restricted_walk(COIN, 0.0, 3)
        self.assertAlmostEqual(law.mass_at(0.0), 0.125, places=15)
        self.assertAlmostEqual(law.total, 0.125, places=15)

    def test_high_level_is_no_op(self):
        np.testing.assert_array_equal(
            services.restricted_walk(COIN, 5.0, 6).masses, services.nfold(COIN, 6).masses,
        )

    def test_level_below_support_gives_zero_law(self):
        with self.assertLogs('lattice', 'WARNING'):
            law = services.restricted_walk(COIN, -1.0, 4)
        self.assertEqual(law.total, 0.0)

    def test_total_mass_is_power_of_kept_mass(self):
        p = services.from_distribution(Lattice({-1: 0.3, 0: 0.2, 2: 0.5}))
        law = services.restricted_walk(p, 0.0, 7)
        self.assertAlmostEqual(law.total, 0.5 ** 7, delta=1e-12)

    def test_two_sided_restriction(self):
        p = services.from_distribution(Lattice({-2: 0.25, 0: 0.5, 2: 0.25}))
        law = services.restricted_walk(p, 1.0, 3, two_sided=True)
        self.assertAlmostEqual(law.total, 0.125, places=15)
        self.assertAlmostEqual(law.mass_at(0.0), 0.125, places=15)

    def test_tail_nondecreasing_in_level(self):
        p = services.from_distribution(Lattice({-1: 0.3, 0: 0.2, 1: 0.3, 2: 0.2}))
        xs = np.arange(-3.0, 8.0)
        tails = [services.restricted_walk(p, h, 5).tail_brackets(xs)[0] for h in (0.0, 1.0, 2.0)]
        for smaller, larger in zip(tails, tails[1:]):
            self.assertTrue(np.all(larger >= smaller - 1e-15))

    def test_restricted_tail_decays_exponentially(self):
        p = services.from_distribution(Lattice({-1: 0.5, 1: 0.5}))
        n, b = 64, 8.0
        law = services.restricted_walk(p, b, n)
        xs = np.arange(40.0, 57.0, 2.0)
        slope = np.polyfit(xs, np.log(law.tail_brackets(xs)[0]), 1)[0]
        self.assertLessEqual(slope, -0.95 / b)


class EpsilonEtaTests(SimpleTestCase):

    def test_empty_event_gives_zero(self):
        self.assertEqual(services.epsilon_eta(COIN, 5.0, 0.0, 2), 0.0)

    def test_two_jump_pareto_value(self):
        p = services.discretize(Pareto(2.5), 0.05, 1.0, 1000.0)
        eps = services.epsilon_eta(p, 10.0, 0.0, 2)
        self.assertGreaterEqual(eps, 0.0178)
        self.assertLessEqual(eps, 0.03)

    def test_matches_double_sum_enumeration(self):
        p = services.discretize(Pareto(2.5), 0.05, 1.0, 100.0)
        h = 10.0
        xs, ratios = services.epsilon_eta_profile(p, h, 0.0, 2)

        step = services.above(p, h)
        keep = step.masses > 0
        points, masses = step.points[keep], step.masses[keep]
        sums = np.add.outer(points, points).ravel()
        weights = np.outer(masses, masses).ravel()
        order = np.argsort(sums)
        sums, suffix = sums[order], np.cumsum(weights[order][::-1])[::-1]
        spill = step.spill_high * (2 * step.grid_mass + step.spill_high)
        idx = np.searchsorted(sums, xs + 1e-9, side='left')
        grid_part = np.where(idx < sums.size, suffix[np.minimum(idx, sums.size - 1)], 0.0)
        brute = (grid_part + spill) / np.asarray(p.tail_brackets(xs)[0])

        np.testing.assert_allclose(ratios, brute, rtol=1e-8)
        self.assertAlmostEqual(services.epsilon_eta(p, h, 0.0, 2), float(np.max(brute)), delta=1e-10)

    def test_geometric_inequality(self):
        p = services.discretize(Pareto(2.5), 0.05, 1.0, 200.0)
        eps2 = services.epsilon_eta(p, 10.0, 0.0, 2)
        eps3 = services.epsilon_eta(p, 10.0, 0.0, 3)
        self.assertLessEqual(eps3, eps2 ** 2 * (1 + 1e-12))

    def test_eta_on_small_lattice(self):
        p = services.from_distribution(Lattice({-2: 0.2, 0: 0.2, 1: 0.2, 3: 0.2, 5: 0.2}))
        eta = services.epsilon_eta(p, 0.0, 1.0, 2, variant=services.Variant.ETA)
        self.assertAlmostEqual(eta, 0.08 / 0.6, places=12)

    def test_bad_arguments(self):
        with self.assertRaises(ValueError):
            services.epsilon_eta(COIN, 0.0, 0.0, 1)
        with self.assertRaises(ValueError):
            services.epsilon_eta(COIN, 0.0, 0.0, 2, T=0.5)
        with self.assertRaises(ValueError):
            services.epsilon_eta(COIN, 0.0, 0.0, 2, variant='zeta')


class ResolveTests(SimpleTestCase):

    def test_strict_mode_accepts_exact_brackets(self):
        self.assertEqual(services.resolve(Bracket(0.5, 0.5), SpillMode.STRICT), 0.5)

    def test_strict_mode_rejects_wide_brackets(self):
        with self.assertLogs('lattice', 'WARNING'):
            with self.assertRaises(SpillError) as ctx:
                services.resolve(Bracket(1e-6, 2e-6), SpillMode.STRICT)
        self.assertAlmostEqual(ctx.exception.ambiguous, 1e-6)

    def test_bound_mode_returns_bracket(self):
        out = services.resolve(Bracket(1e-6, 2e-6), SpillMode.BOUND)
        self.assertEqual(out, Bracket(1e-6, 2e-6))
        self.assertAlmostEqual(out.mid, 1.5e-6)

    def test_spill_queries_raise_in_strict_mode(self):
        p = services.discretize(Pareto(2.5), 0.5, 1.0, 10.0)
        law = services.nfold(p, 2)
        with self.assertLogs('lattice', 'WARNING'):
            with self.assertRaises(SpillError):
                services.query(law, 15.0, mode=SpillMode.STRICT)
