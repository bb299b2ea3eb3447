from lab import services
from lab.management.base import LabCommand


class Command(LabCommand):
    help = "Regular-variation, long-tail, S_d and truncation diagnostics for a family"

    def add_lab_arguments(self, parser):
        self.add_family_arguments(parser)

    def run(self, **options):
        diagnosis = services.diagnose(self.family_spec(options))
        for line in diagnosis.verdicts:
            self.stdout.write(line)
        for note in diagnosis.notes:
            self.stdout.write(self.style.WARNING(note))
        for path in services.emit_diagnosis(diagnosis, options['out']):
            self.stdout.write(f"  wrote {path}")
