from lab.management.base import LabCommand, key_value
from seqs import services as seqs
from seqs.types import BoundaryOptions


class Command(LabCommand):
    help = "Print the boundary sequences (b_n, h_n, J_n, I_n, x_n) of a family as JSON"

    def add_lab_arguments(self, parser):
        self.add_family_arguments(parser)
        parser.add_argument("--n", type=int, required=True, help="Number of steps")
        parser.add_argument("--provenance", required=True, help="Construction, e.g. prop_8_1")
        parser.add_argument(
            "--option", action="append", default=[], metavar="KEY=VALUE",
            help="Boundary option such as t=1 or tol_I=0.05 (repeatable)",
        )

    def run(self, **options):
        opts = BoundaryOptions.from_mapping(dict(key_value(item) for item in options['option']))
        result = seqs.boundary(self.family_spec(options), options['n'], options['provenance'], opts)
        self.stdout.write(result.to_json())
        for flag in result.flags:
            self.stderr.write(self.style.WARNING(f"flag: {flag}"))
