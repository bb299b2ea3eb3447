"""
Shared base for the lab management commands.

Global flags: --seed, --threads, --out, --check. Errors leave the process
with the documented exit codes:
    2  configuration or parameter error
    3  numerical guard tripped (spill, overflow, failed quadrature)
    4  --check assertion failed
"""

import logging

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from main.exceptions import NumericalGuardError, UnboundedBoundaryError
from main.utils import lab_setting, parse_float

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4


def key_value(text):
    """``key=value`` command-line pairs."""
    key, sep, value = str(text).partition('=')
    if not sep or not key.strip():
        raise ValueError(f"expected key=value, got '{text}'")
    return key.strip(), value.strip()


def format_validation_error(exc):
    if hasattr(exc, 'message_dict'):
        return '; '.join(f"{key}: {' '.join(messages)}" for key, messages in sorted(exc.message_dict.items()))
    return ' '.join(exc.messages)


class LabCommand(BaseCommand):
    # per-command flags go in add_lab_arguments(); the work goes in run()

    def add_arguments(self, parser):
        parser.add_argument("--seed", type=int, default=None, help="Master seed (default LAB['SEED'])")
        parser.add_argument("--threads", type=int, default=None, help="Worker threads (default LAB['THREADS'])")
        parser.add_argument("--out", default=None, help="Output directory (default LAB['OUT_DIR'])")
        parser.add_argument("--check", action="store_true", help="Evaluate acceptance checks; exit 4 on failure")
        self.add_lab_arguments(parser)

    def add_lab_arguments(self, parser):
        pass

    def add_family_arguments(self, parser):
        parser.add_argument("--family", required=True, help="Family name, e.g. pareto")
        parser.add_argument(
            "--param", action="append", default=[], metavar="KEY=VALUE", help="Family parameter (repeatable)",
        )

    def family_spec(self, options):
        try:
            params = dict(key_value(item) for item in options['param'])
        except ValueError as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG)
        return {'name': options['family'], 'params': params}

    def seed(self, options):
        return lab_setting('SEED') if options.get('seed') is None else int(options['seed'])

    def window(self, options):
        return parse_float(options.get('T') or 'inf')

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except CommandError:
            raise
        except ValidationError as exc:
            logger.warning("configuration rejected: %s", format_validation_error(exc))
            raise CommandError(format_validation_error(exc), returncode=EXIT_CONFIG)
        except (NumericalGuardError, UnboundedBoundaryError) as exc:
            logger.warning("numerical guard: %s", exc)
            raise CommandError(f"numerical guard: {exc}", returncode=EXIT_NUMERICAL)
        except ValueError as exc:
            raise CommandError(str(exc), returncode=EXIT_CONFIG)

    def run(self, **options):
        raise NotImplementedError

    def fail_check(self, message):
        self.stdout.write(self.style.ERROR(message))
        raise CommandError(message, returncode=EXIT_CHECK)
