"""
Value types for the regular-variation diagnostics.
"""

import math
from typing import NamedTuple

import numpy as np
from django.db import models


class SdFlag(models.TextChoices):
    OK = 'ok', 'Integral of H converges'
    DIVERGENT = 'divergent', 'Integral of H diverges or H has compact support'


class SdVerdict(models.TextChoices):
    PASS_B1 = 'pass_B1', 'Concave-majorant criterion holds'
    PASS_B2 = 'pass_B2', 'Hazard-derivative integrability criterion holds'
    NOT_APPLICABLE = 'not_applicable', 'No hazard decomposition'
    FAIL = 'fail', 'Hazard decomposition present, both criteria fail'


class IndexEstimate(NamedTuple):
    upper: float
    lower: float
    # (lo, hi) of the x-decade the estimate was read from
    decade: tuple


class IrvDefect(NamedTuple):
    sup_ratio: float
    inf_ratio: float


class SdRatio(NamedTuple):
    ratio: float
    integral: float
    flag: str


class SdCertificate(NamedTuple):
    verdict: str
    text: str


class TailFunction:
    """
    A positive function on [domain_low, ∞).

    ``log_evaluator`` is used whenever given, so functions such as e^(-√x)
    stay usable where they underflow.
    """

    def __init__(self, evaluator, domain_low=0.0, log_evaluator=None, compact_support=False, label=''):
        self.evaluator = evaluator
        self.domain_low = float(domain_low)
        self.log_evaluator = log_evaluator
        self.compact_support = bool(compact_support)
        self.label = label

    def __repr__(self):
        return f"TailFunction({self.label or self.evaluator!r}, domain_low={self.domain_low!r})"

    def __call__(self, x):
        if self.log_evaluator is not None:
            value = np.exp(self.log_evaluator(np.asarray(x, dtype=float)))
        else:
            value = np.asarray(self.evaluator(np.asarray(x, dtype=float)), dtype=float)
        return float(value) if np.ndim(x) == 0 else value

    def log(self, x):
        arr = np.asarray(x, dtype=float)
        if self.log_evaluator is not None:
            value = np.asarray(self.log_evaluator(arr), dtype=float)
        else:
            with np.errstate(divide='ignore'):
                value = np.log(np.asarray(self.evaluator(arr), dtype=float))
        return float(value) if np.ndim(x) == 0 else value

    @classmethod
    def from_distribution(cls, d, T=math.inf):
        """x ↦ F(x + Δ) for a step distribution."""
        log_eval = d.log_tail if math.isinf(T) else None
        return cls(
            lambda x: d.window_mass(x, T),
            domain_low=max(d.domain_low, 0.0) if math.isfinite(d.domain_low) else 0.0,
            log_evaluator=log_eval,
            compact_support=math.isfinite(d.support_high),
            label=f"{d.family}(T={T!r})",
        )

    @classmethod
    def power(cls, rho, domain_low=1.0):
        return cls(
            lambda x: x ** rho, domain_low=domain_low,
            log_evaluator=lambda x: rho * np.log(x), label=f"x^{rho!r}",
        )
