import math

from django.test import SimpleTestCase
from scipy.optimize import brentq
from scipy.special import gamma

from dist.families import (
    AffineWrapper, Exponential, Lattice, LightSubexponential, LognormalHazard, Pareto, TwoSidedPareto, WeibullHazard,
)
from dist.services import StandardizeMode, make_family, standardize
from lattice.pmf import Bracket, GridSpec, SpillMode
from main.exceptions import ConvergenceError, UnboundedBoundaryError

from . import services
from .types import BoundaryOptions, BoundarySet, Provenance, Regime

PARETO = {'name': 'pareto', 'params': {'alpha': 2.5}}
SYMMETRIC = {'name': 'pareto', 'params': {'alpha': 1.5, 'symmetric': True}}


def rademacher():
    return Lattice({-1: 0.5, 1: 0.5})


def coin():
    return Lattice({0: 0.5, 1: 0.5})


class RegimeTests(SimpleTestCase):

    def test_regimes(self):
        self.assertEqual(services.identify_regime(Pareto(2.5)), Regime.FINITE_VARIANCE)
        self.assertEqual(services.identify_regime(make_family(**SYMMETRIC)), Regime.BALANCED)
        self.assertEqual(services.identify_regime(TwoSidedPareto(1.5, 3.0)), Regime.STABLE_FINITE_MEAN)
        self.assertEqual(
            services.identify_regime(TwoSidedPareto(0.5, 2.0, w_left=1.0, w_right=0.0)), Regime.INFINITE_MEAN,
        )

    def test_unidentifiable(self):
        with self.assertRaises(ValueError):
            services.identify_regime(TwoSidedPareto(1.0, 3.0))


class NaturalScaleTests(SimpleTestCase):

    def test_standardized_finite_variance(self):
        d = standardize(Pareto(2.5))
        self.assertAlmostEqual(services.natural_scale(d, 100), 10.0, places=9)

    def test_infinite_mean_left_quantile(self):
        d = TwoSidedPareto(0.5, 2.0, w_left=1.0, w_right=0.0)
        b = services.natural_scale(d, 100)
        self.assertLess(abs(b / 1e4 - 1), 1e-12)
        self.assertLess(float(d.left_tail(b)), 0.01)

    def test_stable_finite_mean_root(self):
        d = TwoSidedPareto(1.5, 3.0)

        def mu2(b):
            return 1.5 * (math.sqrt(b) - 1) + 1.5 * (1 - 1 / b)

        expected = brentq(lambda b: gamma(1.5) * 1e3 * mu2(b) - 0.5 * b * b, 10.0, 1e4, xtol=1e-14, rtol=1e-14)
        self.assertLess(abs(services.natural_scale(d, 1000) / expected - 1), 1e-10)


class FindRootTests(SimpleTestCase):

    def test_root_to_a_few_ulps(self):
        root = services.find_root(lambda x: x * x - 2.0, 1.0, 2.0)
        self.assertLessEqual(abs(root - math.sqrt(2.0)), 8 * math.ulp(math.sqrt(2.0)))

    def test_end_point_root(self):
        self.assertEqual(services.find_root(lambda x: x - 3.0, 3.0, 8.0), 3.0)

    def test_no_sign_change(self):
        with self.assertRaises(ConvergenceError):
            services.find_root(lambda x: x * x + 1.0, -1.0, 1.0)


class ANTests(SimpleTestCase):

    def test_rademacher_closed_form(self):
        a = services.a_n(rademacher(), 400)
        self.assertAlmostEqual(a, 20.0, places=10)

    def test_symmetric_pareto(self):
        d = make_family(**SYMMETRIC)
        self.assertAlmostEqual(services.a_n(d, 1000), 243.9, delta=0.1)

    def test_residuals(self):
        d = make_family(**SYMMETRIC)
        for n in (100, 1000, 10_000):
            a = services.a_n(d, n)
            q = 3 * (math.sqrt(a) - 1) / a ** 2 + a ** -1.5
            self.assertLessEqual(abs(q - 1 / n), 1e-10 / n)

    def test_asymptote(self):
        d = make_family(**SYMMETRIC)
        self.assertLess(abs(services.a_n(d, 10_000) / 40_000 ** (2 / 3) - 1), 0.05)

    def test_no_root(self):
        with self.assertRaises(ConvergenceError):
            services.a_n(rademacher(), 1)


class InsensitivityTests(SimpleTestCase):

    def test_pareto_closed_form(self):
        r = 1.1 ** 0.4
        x = services.insensitivity_boundary(Pareto(2.5), 10.0, 0.1)
        self.assertAlmostEqual(x, 10 * r / (r - 1), delta=0.05)
        self.assertAlmostEqual(x, 267.33, delta=0.05)

    def test_defect_at_boundary(self):
        d = Pareto(2.5)
        x = services.insensitivity_boundary(d, 10.0, 0.1)
        self.assertLessEqual(services.insensitivity_defect(d, x, 10.0), 0.1)
        self.assertGreater(services.insensitivity_defect(d, x * 0.999, 10.0), 0.1)

    def test_exponential_unbounded(self):
        with self.assertRaises(UnboundedBoundaryError):
            services.insensitivity_boundary(Exponential(), 1.0, 0.1)

    def test_zero_shift(self):
        d = Pareto(2.5)
        self.assertEqual(services.insensitivity_defect(d, 50.0, 0.0), 0.0)
        self.assertEqual(services.insensitivity_boundary(d, 0.0, 0.1), d.domain_low)

    def test_nonincreasing_in_tol(self):
        d = Pareto(2.5)
        xs = [services.insensitivity_boundary(d, 10.0, tol) for tol in (0.02, 0.05, 0.1, 0.2)]
        self.assertEqual(xs, sorted(xs, reverse=True))

    def test_local_window(self):
        d = Pareto(2.5)
        x = services.insensitivity_boundary(d, 10.0, 0.1, T=1.0)
        self.assertLessEqual(services.insensitivity_defect(d, x, 10.0, T=1.0), 0.1)
        self.assertGreater(x, 267.0)

    def test_zero_window(self):
        with self.assertRaises(ValueError):
            services.insensitivity_defect(coin(), 5.0, 1.0)


class TruncationTests(SimpleTestCase):

    def test_empty_events(self):
        self.assertEqual(services.truncation_check(coin(), 2.0, 10, 1.0), (0.0, 0.0))

    def test_pareto_trace(self):
        d = Pareto(2.5)
        grid = GridSpec(0.01, 1.0, 200.0)
        rows = services.truncation_trace(
            d, [100, 1000, 10_000], lambda n: math.sqrt(n / math.log(n)), grid=grid,
        )
        n_eps = [row[2] for row in rows]
        tails = [row[4] for row in rows]
        self.assertTrue(all(a > b for a, b in zip(n_eps, n_eps[1:])))
        self.assertTrue(all(a > b for a, b in zip(tails, tails[1:])))
        # no mass below -b for a positive law
        self.assertTrue(all(row[3] == 0.0 for row in rows))


class SmallStepsTests(SimpleTestCase):

    def test_coin_beyond_reach(self):
        self.assertEqual(services.small_steps_defect(coin(), 1.0, 6.0, 5), 0.0)

    def test_restriction_below_support(self):
        with self.assertLogs('lattice', 'WARNING'):
            self.assertEqual(services.small_steps_defect(coin(), -1.0, 0.0, 5), 0.0)

    def test_standardized_pareto(self):
        d = standardize(Pareto(2.5))
        n = 50
        grid = GridSpec(0.01, d.domain_low, 200.0)
        h = math.sqrt(n / math.log(n))
        J = math.sqrt(2 * n * math.log(n))
        near = services.small_steps_defect(d, h, J, n, grid=grid, mode=SpillMode.STRICT)
        far = services.small_steps_defect(d, h, 2 * J, n, grid=grid, mode=SpillMode.STRICT)
        self.assertLess(near, 1.0)
        self.assertLessEqual(far, near)

    def test_bound_mode_bracket(self):
        atoms = {k: 2.0 ** -(k + 1) for k in range(20)}
        atoms[20] = 2.0 ** -20
        out = services.small_steps_defect(Lattice(atoms), 5.0, 3.0, 3, mode=SpillMode.BOUND)
        self.assertIsInstance(out, Bracket)
        self.assertAlmostEqual(out.lower, out.upper, places=12)
        self.assertGreater(out.lower, 0.0)


class BoundaryTests(SimpleTestCase):

    def boundary(self, spec, n, provenance, **options):
        d = services.boundary_law(spec, provenance)
        return services.boundary(d, n, provenance, options)

    def test_power_tail_golden(self):
        out = self.boundary(PARETO, 100, Provenance.POWER_TAIL, t=1)
        self.assertLess(abs(out.J_n / 21.460 - 1), 1e-3)
        self.assertAlmostEqual(out.b_n, 10.0, places=9)
        self.assertLessEqual(out.h_n, out.J_n)
        self.assertAlmostEqual(out.x_n, out.I_n + out.J_n)
        self.assertEqual(out.indices['declared'], (-2.5, -2.5))
        self.assertAlmostEqual(out.indices['estimated'][0], -2.5, delta=0.01)

    def test_lognormal_golden(self):
        spec = {'name': 'lognormal_hazard', 'params': {'c': 0.5, 'beta': 2.0}}
        out = self.boundary(spec, 100, Provenance.LOGNORMAL_HAZARD, t=0.5)
        self.assertLess(abs(out.J_n / 32.564 - 1), 1e-3)

    def test_light_subexp_golden(self):
        # constants already in working units
        out = services.boundary(LightSubexponential(1.0, 1.0), 16, Provenance.LIGHT_SUBEXP, {'eps': 0.5})
        self.assertLess(abs(out.J_n / 403.43 - 1), 1e-3)
        self.assertEqual(out.h_n, 4.0)
        self.assertAlmostEqual(out.x_theorem, math.exp(12.0), places=3)

    def test_balanced_golden(self):
        out = self.boundary(SYMMETRIC, 10_000, Provenance.BALANCED, gamma=3)
        self.assertLess(abs(out.h_n / 467.4 - 1), 1e-3)
        self.assertEqual(out.J_n, 5000.0)
        self.assertEqual(out.x_n, 10_000.0)
        self.assertEqual(out.b_n, out.h_n)
        self.assertEqual(out.notes['centering_ratio'], 0.0)

    def test_weibull_exponents(self):
        out = services.boundary(WeibullHazard(1.0, 0.5), 100, Provenance.WEIBULL_HAZARD)
        self.assertAlmostEqual(out.h_n, 100 ** (0.25 / 1.5))
        self.assertAlmostEqual(out.J_n, 100 ** (1.25 / 1.5))
        self.assertAlmostEqual(out.x_theorem, (3.0 * 10.0) ** 2.0)

    def test_weibull_constant_follows_scale(self):
        spec = {'name': 'weibull_hazard', 'params': {'c': 1.0, 'beta': 0.5}}
        d = services.boundary_law(spec, Provenance.WEIBULL_HAZARD)
        self.assertAlmostEqual(d.scale, math.sqrt(20.0), places=6)
        out = services.boundary(d, 100, Provenance.WEIBULL_HAZARD)
        # tail of xi / s is exp(-c s^beta y^beta)
        self.assertAlmostEqual(out.x_theorem, (d.scale ** 0.5 * 3.0 * 10.0) ** 2.0, places=6)
        self.assertAlmostEqual(out.J_n, 100 ** (1.25 / 1.5))

    def test_light_subexp_constant_follows_scale(self):
        d = AffineWrapper(LightSubexponential(1.0, 1.0), scale=2.0)
        out = services.boundary(d, 16, Provenance.LIGHT_SUBEXP, {'eps': 0.5})
        self.assertAlmostEqual(math.log(out.J_n), (2.0 + 0.5) * 4.0, places=9)

    def test_lognormal_constant_is_scale_free(self):
        law = LognormalHazard(0.5, 2.0)
        plain = services.boundary(law, 100, Provenance.LOGNORMAL_HAZARD, {'t': 0.3})
        scaled = services.boundary(AffineWrapper(law, scale=10.0), 100, Provenance.LOGNORMAL_HAZARD, {'t': 0.3})
        self.assertEqual(scaled.J_n, plain.J_n)
        with self.assertRaises(ValueError):
            services.boundary(AffineWrapper(law, scale=10.0), 100, Provenance.LOGNORMAL_HAZARD, {'t': 0.2})

    def test_stable_finite_mean(self):
        spec = {'name': 'two_sided_stable', 'params': {'alpha_left': 1.5, 'beta_right': 3.0}}
        out = self.boundary(spec, 1000, Provenance.STABLE_FINITE_MEAN, t=2)
        L = 3.0 * math.log(1000)
        self.assertAlmostEqual(out.J_n, 2 * L ** (1 / 3) * out.b_n)
        self.assertAlmostEqual(out.h_n, L ** (-2 / 3) * out.b_n)
        self.assertIn('left_tail_ratio', out.notes)

    def test_stable_needs_t_above_one(self):
        spec = {'name': 'two_sided_stable', 'params': {'alpha_left': 1.5, 'beta_right': 3.0}}
        with self.assertRaises(ValueError):
            self.boundary(spec, 1000, Provenance.STABLE_FINITE_MEAN, t=1)

    def test_infinite_mean(self):
        spec = {'name': 'two_sided_stable', 'params': {'alpha_left': 0.5, 'beta_right': 2.0}}
        out = self.boundary(spec, 100, Provenance.INFINITE_MEAN, eps=1.0)
        self.assertAlmostEqual(out.b_n, 2500.0, places=6)
        self.assertAlmostEqual(out.h_n, 10.0)
        self.assertAlmostEqual(out.J_n, 1000.0)

    def test_linear(self):
        out = self.boundary(PARETO, 100, Provenance.LINEAR, a=1, kappa=2)
        self.assertAlmostEqual(out.h_n, 10.0)
        self.assertEqual((out.I_n, out.J_n, out.x_n), (50.0, 50.0, 100.0))
        self.assertGreater(out.notes['root_shift_defect'], 0.0)

    def test_power_tail_inequality(self):
        with self.assertRaises(ValueError):
            self.boundary(PARETO, 100, Provenance.POWER_TAIL, t=0.4)

    def test_power_tail_local(self):
        out = self.boundary(PARETO, 100, Provenance.POWER_TAIL, t=0.6, T=1.0)
        self.assertEqual(out.indices['declared'], (-3.5, -3.5))

    def test_regime_mismatch(self):
        with self.assertRaises(ValueError):
            self.boundary(PARETO, 100, Provenance.LOGNORMAL_HAZARD, t=1)

    def test_spec_input_and_determinism(self):
        first = services.boundary(PARETO, 100, Provenance.POWER_TAIL, {'t': '1'})
        second = services.boundary(PARETO, 100, Provenance.POWER_TAIL, BoundaryOptions(t=1.0))
        self.assertEqual(first.to_json(), second.to_json())

    def test_json_round_trip(self):
        out = self.boundary(SYMMETRIC, 10_000, Provenance.BALANCED)
        again = BoundarySet.from_dict(out.as_dict())
        self.assertEqual(again.to_json(), out.to_json())
        self.assertEqual(out.options['T'], 'inf')


class BoundarySetTests(SimpleTestCase):

    def test_h_above_J_rejected(self):
        with self.assertRaises(ValueError):
            BoundarySet(n=10, b_n=1.0, h_n=5.0, J_n=4.0, x_n=4.0, provenance='prop_8_1')

    def test_nonpositive_rejected(self):
        with self.assertRaises(ValueError):
            BoundarySet(n=10, b_n=0.0, h_n=1.0, J_n=4.0, x_n=4.0, provenance='prop_8_1')

    def test_unknown_option(self):
        with self.assertRaises(ValueError):
            BoundaryOptions.from_mapping({'tee': 1})

    def test_option_parsing(self):
        opts = BoundaryOptions.from_mapping({'T': 'inf', 'irv': 'false', 'gamma': '4'})
        self.assertEqual(opts.T, math.inf)
        self.assertFalse(opts.irv)
        self.assertEqual(opts.gamma, 4.0)


class HeuristicTests(SimpleTestCase):

    def test_raw_pareto_fixed_point(self):
        J = services.heuristic_J(Pareto(2.5), 100)
        self.assertAlmostEqual(J, 26.94, delta=0.01)
        self.assertAlmostEqual(J * J, 200 * (2.5 * math.log(J) - math.log(100)), delta=1e-5)

    @staticmethod
    def asymptote(alpha, n):
        # (alpha - 2) n log n plus its log-log correction
        lead = (alpha - 2) * n * math.log(n)
        return math.sqrt(lead + alpha * n * math.log(lead / n))

    def test_asymptotic_trend(self):
        gaps = [
            abs(services.heuristic_J(Pareto(2.5), n) / self.asymptote(2.5, n) - 1)
            for n in (10 ** 4, 10 ** 8, 10 ** 16)
        ]
        self.assertEqual(gaps, sorted(gaps, reverse=True))
        self.assertLessEqual(gaps[1], 0.1)

    def test_leading_term_alone_is_slow(self):
        n = 10 ** 8
        ratio = services.heuristic_J(Pareto(2.5), n) / math.sqrt(0.5 * n * math.log(n))
        self.assertAlmostEqual(ratio, 1.325, delta=0.01)

    def test_no_fixed_point(self):
        with self.assertRaises(ConvergenceError):
            services.heuristic_J(Pareto(0.5), 100)

    def test_bounded_support(self):
        with self.assertRaises(ConvergenceError):
            services.heuristic_J(coin(), 100)


class SideConditionTests(SimpleTestCase):

    def test_tightness_trace_nonincreasing(self):
        d = standardize(Pareto(2.5))
        for n in (10, 100, 1000):
            values = [value for _, value in services.tightness_trace(d, n)]
            self.assertEqual(values, sorted(values, reverse=True))

    def test_root_shift_defect_decays(self):
        d = standardize(Pareto(2.5), StandardizeMode.CENTER)
        near = services.root_shift_defect(d, 1e4, 2.0)
        far = services.root_shift_defect(d, 1e6, 2.0)
        self.assertLess(far, near)
        self.assertLess(near, 0.05)

    def test_root_shift_defect_kappa_range(self):
        with self.assertRaises(ValueError):
            services.root_shift_defect(Pareto(2.5), 1e4, 2.5)
