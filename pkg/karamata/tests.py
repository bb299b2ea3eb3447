import math

import numpy as np
from django.test import SimpleTestCase

from dist.families import Exponential, Lattice, LightSubexponential, LognormalHazard, Pareto, WeibullHazard
from dist.services import make_family, standardize
from main.utils import geometric_grid

from . import services
from .types import SdFlag, SdVerdict, TailFunction


def root_exp():
    return TailFunction(lambda x: np.exp(-np.sqrt(x)), log_evaluator=lambda x: -np.sqrt(x), label='e^-sqrt(x)')


class MatuszewskaTests(SimpleTestCase):

    def test_pure_power(self):
        est = services.matuszewska(TailFunction.power(-2.5))
        self.assertAlmostEqual(est.upper, -2.5, places=10)
        self.assertAlmostEqual(est.lower, -2.5, places=10)
        self.assertAlmostEqual(est.decade[1], 1e9)

    def test_slowly_varying_factor(self):
        f = TailFunction(lambda x: x ** -2.0 * (1 + np.log(x)))
        est = services.matuszewska(f, geometric_grid(1e3, 1e9))
        self.assertLess(abs(est.upper + 2.0), 0.1)
        self.assertLess(abs(est.lower + 2.0), 0.1)
        self.assertGreaterEqual(est.upper, est.lower)

    def test_super_polynomial_decay_is_minus_infinity(self):
        est = services.matuszewska(root_exp())
        self.assertEqual(est.upper, -math.inf)
        self.assertEqual(est.lower, -math.inf)

    def test_scaling_invariance(self):
        plain = services.matuszewska(TailFunction(lambda x: x ** -1.7))
        scaled = services.matuszewska(TailFunction(lambda x: 37.0 * x ** -1.7))
        self.assertAlmostEqual(plain.upper, scaled.upper, places=10)
        self.assertAlmostEqual(plain.lower, scaled.lower, places=10)

    def test_positive_power(self):
        est = services.matuszewska(TailFunction.power(0.75))
        self.assertAlmostEqual(est.upper, 0.75, places=10)
        self.assertAlmostEqual(est.lower, 0.75, places=10)

    def test_short_grid_rejected(self):
        with self.assertRaises(ValueError):
            services.matuszewska(TailFunction.power(-2.0), geometric_grid(10, 1000))

    def test_nonpositive_function_rejected(self):
        with self.assertRaises(ValueError):
            services.matuszewska(TailFunction(lambda x: np.zeros_like(x)))


class LongTailTests(SimpleTestCase):

    def test_pareto(self):
        self.assertAlmostEqual(services.long_tail_defect(Pareto(2.5), 100.0, 1.0), 0.0254466, places=7)

    def test_exponential_is_not_long_tailed(self):
        for x in (10.0, 100.0, 500.0):
            self.assertAlmostEqual(services.long_tail_defect(Exponential(), x, 1.0), math.e - 1, places=9)

    def test_weibull(self):
        d = WeibullHazard(c=1.0, beta=0.5)
        expected = math.expm1(100.0 - math.sqrt(9999.0))
        self.assertAlmostEqual(services.long_tail_defect(d, 1e4, 1.0), expected, places=12)
        self.assertAlmostEqual(services.long_tail_defect(d, 1e4, 1.0), 0.0050126, places=7)

    def test_zero_shift(self):
        d = Pareto(2.5)
        for T in (math.inf, 1.0):
            self.assertEqual(services.long_tail_defect(d, 50.0, 0.0, T), 0.0)

    def test_local_window(self):
        d = Pareto(2.5)
        expected = (d.tail(99.0) - d.tail(100.0)) / (d.tail(100.0) - d.tail(101.0)) - 1
        self.assertAlmostEqual(services.long_tail_defect(d, 100.0, 1.0, 1.0), expected, places=12)

    def test_zero_denominator(self):
        with self.assertRaises(ValueError):
            services.long_tail_defect(Lattice({0: 0.5, 1: 0.5}), 5.0, 1.0, 1.0)

    def test_trace_shrinks(self):
        rows = services.long_tail_trace(Pareto(2.5), [10.0, 100.0, 1000.0])
        defects = [value for _, value in rows]
        self.assertEqual(defects, sorted(defects, reverse=True))


class IrvTests(SimpleTestCase):

    def test_power(self):
        out = services.irv_defect(TailFunction.power(-2.5), 1.01, 1e6)
        self.assertAlmostEqual(out.sup_ratio, 1.01 ** -2.5, places=12)
        self.assertAlmostEqual(out.inf_ratio, 0.9754598, places=7)

    def test_root_exponential_fails(self):
        out = services.irv_defect(root_exp(), 1.1, 1e6)
        self.assertAlmostEqual(out.inf_ratio / math.exp(1000 * (1 - math.sqrt(1.1))), 1.0, places=6)
        self.assertLess(out.sup_ratio, 1e-6)

    def test_identity_at_one(self):
        out = services.irv_defect(root_exp(), 1.0, 1e4)
        self.assertEqual(out, (1.0, 1.0))

    def test_trace_approaches_one(self):
        rows = services.irv_trace(TailFunction.power(-2.0), [2.0, 1.5, 1.1, 1.01], 1e5)
        gaps = [1 - inf for _, _, inf in rows]
        self.assertEqual(gaps, sorted(gaps, reverse=True))

    def test_y_out_of_range(self):
        with self.assertRaises(ValueError):
            services.irv_defect(root_exp(), 3.0, 1e4)


class SdRatioTests(SimpleTestCase):

    def test_root_exponential(self):
        far = services.sd_ratio(root_exp(), 1600.0)
        near = services.sd_ratio(root_exp(), 400.0)
        self.assertEqual(far.flag, SdFlag.OK)
        self.assertAlmostEqual(far.integral, 2.0, places=7)
        self.assertLessEqual(abs(far.ratio - 2.0), 0.2)
        self.assertLess(abs(far.ratio - 2.0), abs(near.ratio - 2.0))

    def test_power_trends_to_integral(self):
        H = TailFunction.power(-2.5, domain_low=1.0)
        rows = [services.sd_ratio(H, x) for x in (1e2, 1e3, 1e4)]
        self.assertAlmostEqual(rows[0].integral, 2 / 3, places=7)
        gaps = [abs(r.ratio - 2 / 3) for r in rows]
        self.assertEqual(gaps, sorted(gaps, reverse=True))

    def test_compact_support_flagged(self):
        H = TailFunction.from_distribution(Lattice({0: 0.5, 4: 0.5}))
        with self.assertLogs('karamata', 'WARNING'):
            out = services.sd_ratio(H, 10.0)
        self.assertEqual(out.flag, SdFlag.DIVERGENT)

    def test_divergent_integral_flagged(self):
        H = TailFunction.power(-0.5, domain_low=1.0)
        with self.assertLogs('karamata', 'WARNING'):
            out = services.sd_ratio(H, 100.0)
        self.assertEqual(out.flag, SdFlag.DIVERGENT)


class SdSufficientTests(SimpleTestCase):

    def test_lognormal_hazard(self):
        cert = services.sd_sufficient(LognormalHazard(c=0.5, beta=2.0))
        self.assertEqual(cert.verdict, SdVerdict.PASS_B1)

    def test_weibull_hazard(self):
        cert = services.sd_sufficient(WeibullHazard(c=1.0, beta=0.5))
        self.assertEqual(cert.verdict, SdVerdict.PASS_B1)

    def test_light_subexponential(self):
        cert = services.sd_sufficient(LightSubexponential(c=1.0, beta=1.0))
        self.assertEqual(cert.verdict, SdVerdict.PASS_B2)

    def test_exponential_fails_both(self):
        cert = services.sd_sufficient(Exponential())
        self.assertEqual(cert.verdict, SdVerdict.FAIL)
        self.assertIn('z index < 1=no', cert.text)

    def test_standardized_law_is_unwrapped(self):
        d = standardize(make_family('lognormal_hazard', {'c': 0.5, 'beta': 2.0}))
        self.assertEqual(services.sd_sufficient(d).verdict, SdVerdict.PASS_B1)

    def test_power_law_not_applicable(self):
        self.assertEqual(services.sd_sufficient(Pareto(2.5)).verdict, SdVerdict.NOT_APPLICABLE)
