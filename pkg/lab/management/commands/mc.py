from dist.services import StandardizeMode
from lab import services
from lab.management.base import LabCommand
from main.utils import parse_float
from mc import services as mc
from mc.types import EstimatorMethod


class Command(LabCommand):
    help = "One-off Monte Carlo estimate of P{S_n in x + Δ} (or of the restricted walk for the tilted method)"

    def add_lab_arguments(self, parser):
        self.add_family_arguments(parser)
        parser.add_argument("--n", type=int, required=True)
        parser.add_argument("--x", required=True)
        parser.add_argument("--T", default="inf")
        parser.add_argument(
            "--method", default=EstimatorMethod.BIG_JUMP_CMC, help="plain, big_jump_cmc or tilted_restricted",
        )
        parser.add_argument("--h", default=None, help="Truncation level for tilted_restricted")
        parser.add_argument("--samples", type=int, default=10_000)
        parser.add_argument("--standardize", default=StandardizeMode.RAW, help="unit, center or raw")

    def run(self, **options):
        d = services.step_law(self.family_spec(options), StandardizeMode(options['standardize']))
        h = None if options['h'] is None else parse_float(options['h'])
        result = mc.estimate(
            options['method'], d, options['n'], parse_float(options['x']), self.window(options),
            options['samples'], self.seed(options), options['threads'], h=h,
        )
        self.stdout.write(result.to_json())
        if options['check'] and not result.plausible_probability:
            self.fail_check(f"estimate {result.estimate!r} exceeds 1 by more than 3 standard errors")
