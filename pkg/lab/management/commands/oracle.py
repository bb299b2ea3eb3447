import json

from dist.services import StandardizeMode
from lab import services
from lab.management.base import LabCommand
from lattice.pmf import GridSpec, Placement
from main.utils import parse_float


class Command(LabCommand):
    help = "Exact lattice value of P{S_n in x + Δ} next to n·F(x + Δ)"

    def add_lab_arguments(self, parser):
        self.add_family_arguments(parser)
        parser.add_argument("--n", type=int, required=True)
        parser.add_argument("--x", required=True)
        parser.add_argument("--T", default="inf", help="Window length (default inf: the plain tail)")
        parser.add_argument("--standardize", default=StandardizeMode.RAW, help="unit, center or raw")
        parser.add_argument("--delta", default=None, help="Grid step; omit for exact lattice laws")
        parser.add_argument("--lo", default=None)
        parser.add_argument("--hi", default=None)
        parser.add_argument("--placement", default=Placement.UPPER)
        parser.add_argument("--spill-mode", default=None, help="strict or bound")

    def run(self, **options):
        d = services.step_law(self.family_spec(options), StandardizeMode(options['standardize']))
        grid = None
        if options['delta'] is not None:
            if options['lo'] is None or options['hi'] is None:
                raise ValueError("--delta needs --lo and --hi")
            grid = GridSpec(
                parse_float(options['delta']), parse_float(options['lo']), parse_float(options['hi']),
                Placement(options['placement']),
            )
        result = services.oracle_query(
            d, options['n'], parse_float(options['x']), self.window(options), grid, options['spill_mode'],
        )
        self.stdout.write(json.dumps(result, indent=2, sort_keys=True))
