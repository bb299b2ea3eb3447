"""
Experiment configuration and report types.
"""

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from django.db import models

from lattice.pmf import GridSpec, SpillMode
from main.utils import from_json_float, json_float
from mc.types import EstimatorMethod
from seqs.types import BoundaryOptions, BoundarySet

CSV_COLUMNS = ('n', 'x', 'x_over_boundary', 'p_value', 'p_source', 'n_window_mass', 'ratio', 'std_error')


class ExperimentMethod(models.TextChoices):
    ORACLE = 'oracle', 'Exact lattice probabilities'
    MC = 'mc', 'Monte Carlo estimates'
    BOTH = 'both', 'Lattice and Monte Carlo side by side'


class XMode(models.TextChoices):
    MULTIPLE = 'multiple', 'Multiples of the boundary x_n'
    ABSOLUTE = 'absolute', 'Absolute levels'


class PSource(models.TextChoices):
    ORACLE = 'oracle', 'Lattice value (strict spill mode)'
    ORACLE_BOUND = 'oracle_bound', 'Midpoint of a lattice bracket'
    MC = 'mc', 'Monte Carlo estimate'


@dataclass(frozen=True)
class ExperimentConfig:
    family: dict
    provenance: str
    n_grid: tuple
    x_grid: tuple
    x_mode: str = XMode.MULTIPLE
    x_extra: tuple = ()
    T: float = math.inf
    method: str = ExperimentMethod.ORACLE
    grid: GridSpec = None
    spill_mode: str = SpillMode.STRICT
    samples: int = 10_000
    seed: int = 0
    estimator: str = EstimatorMethod.BIG_JUMP_CMC
    options: BoundaryOptions = field(default_factory=BoundaryOptions)
    checks: dict = field(default_factory=dict)
    # the key/value pairs as read, echoed into every report
    source: dict = field(default_factory=dict)
    name: str = 'experiment'

    @property
    def uses_oracle(self):
        return self.method in (ExperimentMethod.ORACLE, ExperimentMethod.BOTH)

    @property
    def uses_mc(self):
        return self.method in (ExperimentMethod.MC, ExperimentMethod.BOTH)

    def echo(self):
        """Everything that determines the report, as plain text values."""
        return {**self.source, 'mc.seed': str(self.seed)}


class ReportRow(NamedTuple):
    n: int
    x: float
    x_over_boundary: float
    p_value: float
    p_source: str
    n_window_mass: float
    ratio: float
    std_error: float = None
    p_lower: float = None
    p_upper: float = None

    def csv_fields(self):
        def text(value):
            return '' if value is None else repr(float(value))

        return [
            str(self.n), text(self.x), text(self.x_over_boundary), text(self.p_value), str(self.p_source),
            text(self.n_window_mass), text(self.ratio), text(self.std_error),
        ]

    def ratio_range(self):
        """Ratio bracket implied by the probability bracket, or the point ratio."""
        if self.p_lower is None or not self.n_window_mass > 0:
            return self.ratio, self.ratio
        return self.p_lower / self.n_window_mass, self.p_upper / self.n_window_mass

    def as_dict(self):
        out = {}
        for name, value in self._asdict().items():
            if name in ('n', 'p_source'):
                out[name] = int(value) if name == 'n' else str(value)
            else:
                out[name] = json_float(value)
        return out

    @classmethod
    def from_dict(cls, data):
        values = {k: from_json_float(v) for k, v in data.items() if k not in ('n', 'p_source')}
        return cls(n=int(data['n']), p_source=PSource(data['p_source']), **values)


class SummaryRow(NamedTuple):
    n: int
    p_source: str
    sup_deviation: float
    rows: int


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ExperimentReport:
    name: str
    rows: tuple
    summary: tuple
    boundaries: tuple
    config: dict
    config_hash: str
    checks: tuple = ()

    @property
    def passed(self):
        return all(check.passed for check in self.checks)

    def as_dict(self):
        return {
            'name': self.name,
            'rows': [row.as_dict() for row in self.rows],
            'summary': [
                {'n': s.n, 'p_source': str(s.p_source), 'sup_deviation': json_float(s.sup_deviation), 'rows': s.rows}
                for s in self.summary
            ],
            'boundaries': [b.as_dict() for b in self.boundaries],
            'config': dict(self.config),
            'config_hash': self.config_hash,
            'checks': [check._asdict() for check in self.checks],
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        return cls(
            name=data['name'],
            rows=tuple(ReportRow.from_dict(row) for row in data['rows']),
            summary=tuple(
                SummaryRow(int(s['n']), PSource(s['p_source']), from_json_float(s['sup_deviation']), int(s['rows']))
                for s in data['summary']
            ),
            boundaries=tuple(BoundarySet.from_dict(b) for b in data['boundaries']),
            config=dict(data['config']),
            config_hash=data['config_hash'],
            checks=tuple(CheckResult(**check) for check in data.get('checks', [])),
        )


@dataclass(frozen=True)
class Diagnosis:
    """Diagnostic traces for one family: name -> (header, rows), plus verdict lines."""

    family: dict
    traces: dict
    verdicts: tuple
    indices: dict = field(default_factory=dict)
    notes: tuple = ()

    def verdict_text(self):
        return '\n'.join([*self.verdicts, *self.notes]) + '\n'

