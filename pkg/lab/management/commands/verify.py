from lab import services
from lab.config import load_config
from lab.management.base import LabCommand


class Command(LabCommand):
    help = "Run a verification sweep from a config file and write CSV and JSON reports"

    def add_lab_arguments(self, parser):
        parser.add_argument("--config", required=True, help="Path to the experiment config file")

    def run(self, **options):
        config = load_config(options['config'], seed=options['seed'])
        self.stdout.write(f"Running {config.name} ({config.method}, {len(config.n_grid)} values of n) …")
        report = services.run_experiment(config, threads=options['threads'])
        if options['check']:
            report = services.with_checks(report, config.checks)

        for fmt in ('csv', 'json'):
            path = services.emit(report, fmt, options['out'])
            self.stdout.write(f"  wrote {path}")
        for row in report.summary:
            self.stdout.write(
                f"  n={row.n} {row.p_source}: sup |ratio - 1| = {row.sup_deviation:.6g} over {row.rows} rows"
            )

        if not options['check']:
            self.stdout.write(self.style.SUCCESS(f"{len(report.rows)} rows, config hash {report.config_hash[:12]}"))
            return
        for check in report.checks:
            style = self.style.SUCCESS if check.passed else self.style.ERROR
            self.stdout.write(style(f"  [{'pass' if check.passed else 'FAIL'}] {check.name}: {check.detail}"))
        failed = [check.name for check in report.checks if not check.passed]
        if failed:
            self.fail_check(f"checks failed: {', '.join(failed)}")
        self.stdout.write(self.style.SUCCESS("All checks passed."))
