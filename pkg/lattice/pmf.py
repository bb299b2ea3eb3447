"""
Sub-probability mass vectors on uniform grids.

Mass that falls off the grid is never dropped. It is kept in three spill
buckets together with what is known about its location:

  spill_high   lies strictly above ``high_floor``
  spill_low    lies at or below ``low_ceiling``
  spill_mixed  location unknown

Queries return a Bracket: ``lower`` counts only mass that is surely inside
the event, ``upper`` adds every spill that might be.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from django.db import models

# snapping tolerance for grid coordinates, in cells
SNAP = 1e-9


class Placement(models.TextChoices):
    UPPER = 'upper', 'Cell mass at the right end point'
    LOWER = 'lower', 'Cell mass at the left end point'
    MEAN = 'mean', 'Cell mass near the midpoint, grid shifted to match the mean'


class SpillMode(models.TextChoices):
    STRICT = 'strict', 'Abort when spill makes a query ambiguous'
    BOUND = 'bound', 'Return [lower, upper] brackets'


class Bracket(NamedTuple):
    lower: float
    upper: float

    @property
    def width(self):
        return self.upper - self.lower

    @property
    def mid(self):
        return 0.5 * (self.lower + self.upper)


@dataclass(frozen=True)
class GridSpec:
    delta: float
    lo: float
    hi: float
    placement: str = Placement.UPPER

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("grid step delta must be positive")
        if not self.lo < self.hi:
            raise ValueError("grid needs lo < hi")

    @property
    def cells(self):
        return int(math.ceil((self.hi - self.lo) / self.delta - SNAP))

    def snap(self, x):
        """Nearest grid coordinate lo + k·delta."""
        return self.lo + round((x - self.lo) / self.delta) * self.delta

    def with_placement(self, placement):
        return GridSpec(self.delta, self.lo, self.hi, placement)

    def as_dict(self):
        return {'delta': self.delta, 'lo': self.lo, 'hi': self.hi, 'placement': str(self.placement)}


@dataclass(frozen=True)
class LatticePMF:
    origin: float
    delta: float
    masses: np.ndarray = field(repr=False)
    spill_low: float = 0.0
    spill_high: float = 0.0
    spill_mixed: float = 0.0
    low_ceiling: float = -math.inf
    high_floor: float = math.inf

    def __post_init__(self):
        masses = np.array(self.masses, dtype=float).ravel()
        if masses.size == 0:
            raise ValueError("a lattice pmf needs at least one cell")
        if not self.delta > 0:
            raise ValueError("grid step delta must be positive")
        if np.any(masses < 0):
            raise ValueError("lattice masses must be nonnegative")
        if min(self.spill_low, self.spill_high, self.spill_mixed) < 0:
            raise ValueError("spill masses must be nonnegative")
        masses.setflags(write=False)
        object.__setattr__(self, 'masses', masses)

    # ----- constructors ----- #
    @classmethod
    def point_mass(cls, x, delta, mass=1.0):
        return cls(origin=float(x), delta=float(delta), masses=[mass])

    @classmethod
    def from_atoms(cls, atoms, delta):
        """Grid law from {value: probability}; values must sit on one delta grid."""
        values = sorted(atoms)
        origin = values[0]
        offsets = [(v - origin) / delta for v in values]
        if any(abs(o - round(o)) > SNAP for o in offsets):
            raise ValueError("atoms do not lie on a common grid of step delta")
        masses = np.zeros(int(round(offsets[-1])) + 1)
        for v, o in zip(values, offsets):
            masses[int(round(o))] += atoms[v]
        return cls(origin=float(origin), delta=float(delta), masses=masses)

    # ----- shape ----- #
    @property
    def size(self):
        return self.masses.size

    @property
    def points(self):
        return self.origin + self.delta * np.arange(self.size)

    @property
    def last_point(self):
        return self.origin + self.delta * (self.size - 1)

    @cached_property
    def grid_mass(self):
        return float(np.sum(self.masses))

    @property
    def total(self):
        return self.grid_mass + self.spill_low + self.spill_high + self.spill_mixed

    @property
    def spill(self):
        return self.spill_low + self.spill_high + self.spill_mixed

    @cached_property
    def _suffix(self):
        # _suffix[k] = mass at grid indices >= k
        return np.concatenate([np.cumsum(self.masses[::-1])[::-1], [0.0]])

    def index_above(self, x):
        """Index of the first grid point strictly above x (vectorised)."""
        r = (np.asarray(x, dtype=float) - self.origin) / self.delta
        k = np.floor(r + SNAP).astype(np.int64) + 1
        return np.clip(k, 0, self.size)

    def index_at_or_above(self, x):
        r = (np.asarray(x, dtype=float) - self.origin) / self.delta
        k = np.ceil(r - SNAP).astype(np.int64)
        return np.clip(k, 0, self.size)

    # ----- moments ----- #
    def mean(self):
        return float(np.dot(self.points, self.masses) / self.grid_mass)

    def variance(self):
        centred = self.points - self.mean()
        return float(np.dot(centred ** 2, self.masses) / self.grid_mass)

    def as_dict(self, threshold=0.0):
        return {
            float(p): float(m) for p, m in zip(self.points, self.masses) if m > threshold
        }

    def mass_at(self, x):
        r = (x - self.origin) / self.delta
        k = int(round(r))
        if abs(r - k) > SNAP or not 0 <= k < self.size:
            return 0.0
        return float(self.masses[k])

    # ----- queries ----- #
    def tail_brackets(self, x):
        """Vectorised brackets for P{S > x}."""
        x = np.asarray(x, dtype=float)
        sure = self._suffix[self.index_above(x)]
        tol = SNAP * self.delta
        high_in = x <= self.high_floor + tol
        low_out = x >= self.low_ceiling - tol
        sure = sure + np.where(high_in, self.spill_high, 0.0)
        unsure = np.where(high_in, 0.0, self.spill_high) + np.where(low_out, 0.0, self.spill_low)
        return sure, sure + unsure + self.spill_mixed

    def window_brackets(self, x, T):
        """Vectorised brackets for P{x < S ≤ x + T}."""
        if math.isinf(T):
            return self.tail_brackets(x)
        x = np.asarray(x, dtype=float)
        sure = self._suffix[self.index_above(x)] - self._suffix[self.index_above(x + T)]
        sure = np.maximum(sure, 0.0)
        tol = SNAP * self.delta
        high_out = x + T <= self.high_floor + tol
        low_out = x >= self.low_ceiling - tol
        unsure = np.where(high_out, 0.0, self.spill_high) + np.where(low_out, 0.0, self.spill_low)
        return sure, sure + unsure + self.spill_mixed

    def bracket(self, x, T=math.inf):
        lower, upper = self.window_brackets(x, T)
        return Bracket(float(lower), float(upper))

    # ----- reshaping ----- #
    def truncate_above(self, cap):
        """Move grid mass at points > cap into spill_high with floor cap."""
        k = int(self.index_above(cap))
        if k >= self.size:
            return self
        k = max(k, 1)
        moved = float(np.sum(self.masses[k:]))
        return LatticePMF(
            origin=self.origin, delta=self.delta, masses=self.masses[:k],
            spill_low=self.spill_low, spill_high=self.spill_high + moved,
            spill_mixed=self.spill_mixed, low_ceiling=self.low_ceiling,
            high_floor=min(self.high_floor, cap) if moved > 0 or self.spill_high > 0 else self.high_floor,
        )
