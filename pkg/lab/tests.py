import json
import math
import tempfile
from io import StringIO
from pathlib import Path

from django.conf import settings
from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from . import services
from .config import load_config, parse_config, read_config_values
from .types import ExperimentMethod, ExperimentReport, PSource

PARETO_SWEEP = """
# standardized pareto(2.5), three walk lengths, seven multiples of x_n
family.name = pareto
family.alpha = 2.5
boundary.provenance = prop_8_1
options.t = 1
options.tol_I = 0.05
experiment.n_grid = 5, 10, 20
experiment.x_grid = 0.25, 0.5, 1, 2, 3, 5, 10
grid.delta = 0.1
grid.lo = -0.5
grid.hi = 3000
"""

MIXED_SWEEP = """
family.name = pareto
family.alpha = 2.5
boundary.provenance = corollary_2_1
options.a = 1
options.kappa = 2
experiment.n_grid = 8, 16
experiment.x_grid = 1, 2
experiment.method = both
grid.delta = 0.05
grid.lo = -1
grid.hi = 200
mc.samples = 400
mc.seed = 17
"""


def config_from(text, **changes):
    values = read_config_values(text=text)
    values.update(changes)
    return parse_config(values, name='sweep')


class ConfigTests(SimpleTestCase):

    def test_parses_sweep(self):
        config = config_from(PARETO_SWEEP)
        self.assertEqual(config.n_grid, (5, 10, 20))
        self.assertEqual(len(config.x_grid), 7)
        self.assertEqual(config.method, ExperimentMethod.ORACLE)
        self.assertEqual(config.grid.delta, 0.1)
        self.assertEqual(config.options.t, 1.0)
        self.assertTrue(math.isinf(config.T))
        self.assertEqual(config.family, {'name': 'pareto', 'params': {'alpha': '2.5'}})

    def test_unknown_family_names_the_field(self):
        with self.assertRaises(ValidationError) as ctx:
            config_from(PARETO_SWEEP, **{'family.name': 'paretoo'})
        self.assertIn('family.name', ctx.exception.message_dict)

    def test_errors_are_keyed_by_field(self):
        with self.assertRaises(ValidationError) as ctx:
            config_from(PARETO_SWEEP, **{
                'experiment.n_grid': '10, 5', 'experiment.T': '0.33', 'mc.samples': '10', 'grid.colour': 'red',
            })
        errors = ctx.exception.message_dict
        for key in ('experiment.n_grid', 'experiment.T', 'mc.samples', 'grid.colour'):
            self.assertIn(key, errors)

    def test_oracle_needs_grid_for_continuous_laws(self):
        values = read_config_values(text=PARETO_SWEEP)
        for key in ('grid.delta', 'grid.lo', 'grid.hi'):
            values.pop(key)
        with self.assertRaises(ValidationError) as ctx:
            parse_config(values)
        self.assertIn('grid.delta', ctx.exception.message_dict)

    def test_seed_override_enters_echo_and_hash(self):
        a = config_from(MIXED_SWEEP)
        b = parse_config(read_config_values(text=MIXED_SWEEP), name='sweep', seed=99)
        self.assertEqual(a.seed, 17)
        self.assertEqual(b.echo()['mc.seed'], '99')
        self.assertNotEqual(services.config_hash(a), services.config_hash(b))
        self.assertEqual(services.config_hash(a), services.config_hash(config_from(MIXED_SWEEP)))

    def test_shipped_experiments_parse(self):
        paths = sorted((Path(settings.BASE_DIR) / 'docs' / 'experiments').glob('*.env'))
        self.assertTrue(paths)
        for path in paths:
            with self.subTest(config=path.name):
                config = load_config(path)
                self.assertEqual(config.name, path.stem)
                self.assertTrue(config.checks)


class ExperimentTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.report = services.run_experiment(config_from(PARETO_SWEEP), threads=2)

    def test_one_row_per_cell(self):
        self.assertEqual(len(self.report.rows), 21)
        keys = [(row.n, row.x) for row in self.report.rows]
        self.assertEqual(keys, sorted(keys))
        self.assertEqual({row.p_source for row in self.report.rows}, {PSource.ORACLE})

    def test_ratio_comes_from_row_fields(self):
        for row in self.report.rows:
            self.assertEqual(row.ratio, row.p_value / row.n_window_mass)
            self.assertIsNone(row.std_error)

    def test_below_boundary_rows_are_kept(self):
        self.assertEqual(sum(row.x_over_boundary < 1 for row in self.report.rows), 6)

    def test_summary_is_recomputable(self):
        for summary in self.report.summary:
            devs = [
                abs(row.ratio - 1) for row in self.report.rows
                if row.n == summary.n and row.x_over_boundary >= 1 - 1e-9
            ]
            self.assertEqual(summary.sup_deviation, max(devs))
            self.assertEqual(summary.rows, 5)

    def test_csv_layout(self):
        lines = services.report_csv(self.report).splitlines()
        self.assertEqual(len(lines), 22)
        self.assertEqual(lines[0], 'n,x,x_over_boundary,p_value,p_source,n_window_mass,ratio,std_error')
        fields = lines[1].split(',')
        self.assertEqual(len(fields), 8)
        self.assertEqual(fields[4], 'oracle')
        self.assertEqual(fields[7], '')

    def test_json_round_trip(self):
        back = ExperimentReport.from_dict(json.loads(self.report.to_json()))
        self.assertEqual(back, self.report)

    def test_thread_count_leaves_output_unchanged(self):
        again = services.run_experiment(config_from(PARETO_SWEEP), threads=1)
        self.assertEqual(services.report_csv(again), services.report_csv(self.report))
        self.assertEqual(again.to_json(), self.report.to_json())

    def test_emit_writes_files(self):
        with tempfile.TemporaryDirectory() as tmp:
            csv_path = services.emit(self.report, 'csv', tmp)
            json_path = services.emit(self.report, 'json', tmp)
            self.assertEqual(csv_path.name, 'sweep.csv')
            self.assertEqual(len(csv_path.read_text().splitlines()), 22)
            self.assertEqual(json.loads(json_path.read_text())['config_hash'], self.report.config_hash)
            with self.assertRaises(ValueError):
                services.emit(self.report, 'xml', tmp)

    def test_checks(self):
        checked = services.with_checks(
            self.report, {'sup_max': 10.0, 'ratio_at': 3.0, 'ratio_low': 0.5, 'ratio_high': 1.5},
        )
        self.assertTrue(checked.passed)
        failing = services.with_checks(self.report, {'sup_max': 0.0, 'deviation_x': 1.0})
        self.assertFalse(failing.passed)
        self.assertEqual([c.name for c in failing.checks], ['sup_max', 'min_deviation'])


class GoldenRatioTests(SimpleTestCase):

    def test_ratio_at_three_boundaries(self):
        config = config_from(PARETO_SWEEP, **{
            'experiment.n_grid': '100', 'experiment.x_grid': '3', 'grid.hi': '2500',
        })
        report = services.run_experiment(config, threads=1)
        (row,) = report.rows
        self.assertAlmostEqual(row.x_over_boundary, 3.0, places=12)
        self.assertGreaterEqual(row.ratio, 0.8)
        self.assertLessEqual(row.ratio, 1.2)


class BigJumpConvergenceTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        config = load_config(Path(settings.BASE_DIR) / 'docs' / 'experiments' / 'big_jump.env')
        cls.report = services.with_checks(services.run_experiment(config, threads=2), config.checks)

    def test_sup_falls_strictly_in_n(self):
        sups = {s.n: s.sup_deviation for s in services.summarize(self.report.rows, 1.0, 20.0)}
        self.assertGreater(sups[10], sups[30])
        self.assertGreater(sups[30], sups[100])
        self.assertLessEqual(sups[100], 0.2)

    def test_shipped_checks_pass(self):
        self.assertEqual([c.name for c in self.report.checks], ['sup_max', 'sup_decreasing'])
        self.assertTrue(self.report.passed)

    def test_sup_sits_at_the_boundary(self):
        for n in (10, 30, 100):
            rows = [row for row in self.report.rows if row.n == n and row.x_over_boundary >= 1 - 1e-9]
            self.assertEqual(max(rows, key=lambda row: abs(row.ratio - 1)).x_over_boundary, rows[0].x_over_boundary)
            self.assertGreater(rows[0].ratio, 1.0)


class MixedMethodTests(SimpleTestCase):

    def test_oracle_and_mc_rows(self):
        report = services.run_experiment(config_from(MIXED_SWEEP), threads=2)
        self.assertEqual(len(report.rows), 8)
        sources = [row.p_source for row in report.rows]
        self.assertEqual(sources[:2], [PSource.ORACLE, PSource.MC])
        for row in report.rows:
            if row.p_source == PSource.MC:
                self.assertIsNotNone(row.std_error)
        self.assertEqual(report.boundaries[0].x_n, 8.0)
        lines = services.report_csv(report).splitlines()
        self.assertTrue(lines[1].endswith(','))
        self.assertFalse(lines[2].endswith(','))


@override_settings(LAB={**settings.LAB, 'SPILL_MODE': 'strict'})
class OracleQueryTests(SimpleTestCase):

    def test_coin_exact(self):
        d = services.step_law({'name': 'lattice', 'params': {'atoms': '0:0.5, 1:0.5'}})
        result = services.oracle_query(d, 2, 0.5)
        self.assertAlmostEqual(result['p_value'], 0.75, places=12)
        self.assertAlmostEqual(result['ratio'], 0.75, places=12)


class DiagnoseTests(SimpleTestCase):

    def test_pareto(self):
        diagnosis = services.diagnose({'name': 'pareto', 'params': {'alpha': 2.5}})
        upper, lower = diagnosis.indices['estimated']
        self.assertAlmostEqual(upper, -2.5, delta=0.01)
        self.assertAlmostEqual(lower, -2.5, delta=0.01)
        self.assertLess(diagnosis.traces['long_tail'][1][-1][1], 1e-3)
        self.assertIn('tightness', diagnosis.traces)

    def test_exponential_is_not_long_tailed(self):
        diagnosis = services.diagnose({'name': 'exponential', 'params': {}})
        defects = [defect for _, defect in diagnosis.traces['long_tail'][1]]
        for defect in defects:
            self.assertAlmostEqual(defect, math.e - 1, places=6)
        self.assertTrue(any(v.startswith('not long-tailed') for v in diagnosis.verdicts))

    def test_lognormal_hazard_passes_first_criterion(self):
        diagnosis = services.diagnose({'name': 'lognormal_hazard', 'params': {'beta': 2, 'c': 0.5}})
        self.assertTrue(any('pass_B1' in v for v in diagnosis.verdicts))


class CommandTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)

    def write_config(self, text, name='sweep'):
        path = self.out / f'{name}.env'
        path.write_text(text)
        return str(path)

    def test_boundary(self):
        out = StringIO()
        call_command('boundary', family='pareto', param=['alpha=2.5'], n=100, provenance='prop_8_1', stdout=out)
        data = json.loads(out.getvalue())
        self.assertLess(abs(data['J_n'] / 21.460 - 1), 1e-3)

    def test_bad_provenance_exits_2(self):
        with self.assertRaises(CommandError) as ctx:
            call_command(
                'boundary', family='pareto', param=['alpha=2.5'], n=100, provenance='prop_1', stdout=StringIO(),
            )
        self.assertEqual(ctx.exception.returncode, 2)

    def test_verify_writes_reports(self):
        path = self.write_config(MIXED_SWEEP.replace('method = both', 'method = oracle'))
        out = StringIO()
        call_command('verify', config=path, out=str(self.out / 'reports'), stdout=out)
        csv_text = (self.out / 'reports' / 'sweep.csv').read_text()
        self.assertEqual(len(csv_text.splitlines()), 5)
        self.assertIn('config hash', out.getvalue())

    def test_verify_identical_outputs(self):
        path = self.write_config(MIXED_SWEEP)
        call_command('verify', config=path, out=str(self.out / 'a'), threads=1, stdout=StringIO())
        call_command('verify', config=path, out=str(self.out / 'b'), threads=3, stdout=StringIO())
        for name in ('sweep.csv', 'sweep.json'):
            self.assertEqual((self.out / 'a' / name).read_bytes(), (self.out / 'b' / name).read_bytes())

    def test_failed_check_exits_4(self):
        path = self.write_config(MIXED_SWEEP + "check.sup_max = 0\n")
        with self.assertRaises(CommandError) as ctx:
            call_command('verify', config=path, out=str(self.out), check=True, stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 4)
        self.assertTrue((self.out / 'sweep.json').exists())

    def test_invalid_config_exits_2(self):
        path = self.write_config(MIXED_SWEEP.replace('family.name = pareto', 'family.name = nope'))
        with self.assertRaises(CommandError) as ctx:
            call_command('verify', config=path, out=str(self.out), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 2)
        self.assertIn('family.name', str(ctx.exception))

    def test_spill_exits_3(self):
        path = self.write_config(PARETO_SWEEP.replace('grid.hi = 3000', 'grid.hi = 50'))
        with self.assertRaises(CommandError) as ctx:
            call_command('verify', config=path, out=str(self.out), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 3)

    def test_oracle(self):
        out = StringIO()
        call_command('oracle', family='lattice', param=['atoms=0:0.5, 1:0.5'], n=2, x='0.5', stdout=out)
        self.assertAlmostEqual(json.loads(out.getvalue())['p_value'], 0.75, places=12)

    def test_mc(self):
        out = StringIO()
        call_command('mc', family='pareto', param=['alpha=2.5'], n=1, x='3', samples=200, seed=5, stdout=out)
        data = json.loads(out.getvalue())
        self.assertAlmostEqual(data['estimate'], 3.0 ** -2.5, places=12)
        self.assertEqual(data['method'], 'big_jump_cmc')

    def test_diagnose(self):
        out = StringIO()
        call_command('diagnose', family='exponential', out=str(self.out), stdout=out)
        self.assertIn('not long-tailed', out.getvalue())
        self.assertTrue((self.out / 'diagnose_exponential_long_tail.csv').exists())
