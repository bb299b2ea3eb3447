"""
Value types for the boundary sequences.
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields

from django.db import models

from main.utils import from_json_float, json_float, parse_float


class Provenance(models.TextChoices):
    # values name the result each boundary comes from and appear in reports
    POWER_TAIL = 'prop_8_1', 'Power-law tail with finite variance'
    LOGNORMAL_HAZARD = 'prop_8_2', 'Lognormal-type hazard'
    WEIBULL_HAZARD = 'prop_8_3', 'Weibull-type hazard'
    LIGHT_SUBEXP = 'prop_8_4', 'Nearly exponential hazard'
    BALANCED = 'prop_9_1', 'Infinite variance, right tail not lighter'
    STABLE_FINITE_MEAN = 'prop_9_2', 'Finite mean, heavier left tail'
    INFINITE_MEAN = 'prop_9_3', 'Infinite mean, heavier left tail'
    HEURISTIC = 'heuristic_24', 'Fixed-point small-steps heuristic'
    LINEAR = 'corollary_2_1', 'Linear boundary x = a·n'


class Regime(models.TextChoices):
    FINITE_VARIANCE = 'finite_variance', 'Finite variance'
    BALANCED = 'balanced', 'Infinite variance, balanced tails'
    STABLE_FINITE_MEAN = 'stable_finite_mean', 'Stable domain, finite mean'
    INFINITE_MEAN = 'infinite_mean', 'Stable domain, infinite mean'


_OPTION_BOOLS = {'irv'}


@dataclass(frozen=True)
class BoundaryOptions:
    """Free parameters of the boundary constructions."""

    t: float = 1.0
    eps: float = None
    gamma: float = 3.0
    tol_I: float = 0.05
    T: float = math.inf
    multiplier: float = 3.0
    t_n: float = None
    t_n_power: float = 1.0
    a: float = None
    kappa: float = None
    irv: bool = True

    def __post_init__(self):
        if not self.tol_I > 0:
            raise ValueError("tol_I must be positive")
        if not self.multiplier > 0:
            raise ValueError("multiplier must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")

    @classmethod
    def from_mapping(cls, values):
        """Options from loosely typed text values (config files, command flags)."""
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in dict(values or {}).items():
            if key not in known:
                raise ValueError(f"unknown option '{key}'")
            if value is None or value == '':
                continue
            if key in _OPTION_BOOLS:
                kwargs[key] = value if isinstance(value, bool) else str(value).strip().lower() in ('true', '1', 'yes')
            else:
                kwargs[key] = parse_float(value)
        return cls(**kwargs)

    def as_dict(self):
        return {k: (json_float(v) if isinstance(v, float) else v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class BoundarySet:
    n: int
    b_n: float
    h_n: float
    J_n: float
    x_n: float
    provenance: str
    a_n: float = None
    I_n: float = None
    x_theorem: float = None
    flags: tuple = ()
    notes: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    indices: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n) < 1:
            raise ValueError("n must be a positive integer")
        for name in ('b_n', 'h_n', 'J_n', 'x_n', 'a_n', 'I_n', 'x_theorem'):
            value = getattr(self, name)
            if value is None:
                continue
            if not (value > 0):
                raise ValueError(f"{name}={value!r} must be positive")
        if self.h_n > self.J_n:
            raise ValueError(f"h_n={self.h_n!r} exceeds J_n={self.J_n!r}")
        object.__setattr__(self, 'provenance', Provenance(self.provenance))
        object.__setattr__(self, 'flags', tuple(self.flags))

    def as_dict(self):
        out = {
            'n': int(self.n),
            'provenance': str(self.provenance),
            'flags': list(self.flags),
            'notes': {k: json_float(v) if isinstance(v, float) else v for k, v in self.notes.items()},
            'options': dict(self.options),
            'indices': {
                k: [json_float(x) for x in v] if isinstance(v, (list, tuple)) else v
                for k, v in self.indices.items()
            },
        }
        for name in ('b_n', 'a_n', 'h_n', 'I_n', 'J_n', 'x_n', 'x_theorem'):
            out[name] = json_float(getattr(self, name))
        return out

    def to_json(self, indent=2):
        return json.dumps(self.as_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        for name in ('b_n', 'a_n', 'h_n', 'I_n', 'J_n', 'x_n', 'x_theorem'):
            data[name] = from_json_float(data.get(name))
        indices = {
            k: tuple(from_json_float(x) for x in v) if isinstance(v, list) else v
            for k, v in data.get('indices', {}).items()
        }
        return cls(
            n=int(data['n']), b_n=data['b_n'], h_n=data['h_n'], J_n=data['J_n'], x_n=data['x_n'],
            provenance=data['provenance'], a_n=data['a_n'], I_n=data['I_n'],
            x_theorem=data['x_theorem'], flags=tuple(data.get('flags', ())),
            notes=dict(data.get('notes', {})), options=dict(data.get('options', {})),
            indices=indices,
        )
