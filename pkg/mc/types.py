"""
Monte Carlo result types.
"""

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

from django.db import models

from main.utils import from_json_float, json_float


class EstimatorMethod(models.TextChoices):
    PLAIN = 'plain', 'Crude frequency'
    BIG_JUMP_CMC = 'big_jump_cmc', 'Conditional on the largest step'
    TILTED_RESTRICTED = 'tilted_restricted', 'Exponentially tilted restricted walk'


class BlockStats(NamedTuple):
    """count, mean and centred sum of squares of one block of samples."""

    count: int
    mean: float
    m2: float

    @classmethod
    def of(cls, values):
        count = int(values.size)
        if count == 0:
            return cls(0, 0.0, 0.0)
        mean = float(values.mean())
        return cls(count, mean, float(((values - mean) ** 2).sum()))

    def merge(self, other):
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        count = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / count
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / count
        return BlockStats(count, mean, m2)

    @property
    def std_error(self):
        if self.count < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.count - 1) / self.count)


@dataclass(frozen=True)
class EstimatorResult:
    estimate: float
    std_error: float
    samples: int
    method: str
    seed: int
    target: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.estimate >= 0:
            raise ValueError(f"estimate {self.estimate!r} must be nonnegative")
        if not self.std_error >= 0:
            raise ValueError(f"std_error {self.std_error!r} must be nonnegative")
        if int(self.samples) < 1:
            raise ValueError("samples must be positive")
        object.__setattr__(self, 'method', EstimatorMethod(self.method))

    @property
    def plausible_probability(self):
        return self.estimate <= 1.0 + 3.0 * self.std_error

    def covers(self, value, z=3.29):
        return abs(self.estimate - value) <= z * self.std_error

    def as_dict(self):
        return {
            'estimate': self.estimate,
            'std_error': self.std_error,
            'samples': int(self.samples),
            'method': str(self.method),
            'seed': int(self.seed),
            'target': {k: json_float(v) if isinstance(v, float) else v for k, v in self.target.items()},
        }

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        target = {
            k: from_json_float(v) if k in ('x', 'T', 'h') else v for k, v in data.get('target', {}).items()
        }
        return cls(
            estimate=float(data['estimate']), std_error=float(data['std_error']),
            samples=int(data['samples']), method=data['method'], seed=int(data['seed']), target=target,
        )
