"""
Shared numeric helpers for the lab apps.
"""

import hashlib
import json
import logging
import math

import numpy as np
from django.conf import settings
from scipy import integrate

from .exceptions import ConvergenceError, QuadratureError

logger = logging.getLogger(__name__)


def lab_setting(name):
    """Read one key of ``settings.LAB`` at call time."""
    return settings.LAB[name]


# ------------------------------------------------------------------ #
#  bracketing
# ------------------------------------------------------------------ #
def expand_upward(fn, start, stop_sign, factor=2.0, max_steps=2000, limit=1e300):
    """
    Multiply ``start`` by ``factor`` until ``fn`` has sign ``stop_sign``.

    Returns (previous point, first point with the wanted sign).
    """
    prev, x = start, start
    for _ in range(max_steps):
        value = fn(x)
        if (value > 0) == (stop_sign > 0) or value == 0:
            return prev, x
        prev = x
        x = x * factor if x > 0 else (x + 1.0) * factor
        if x > limit:
            break
    raise ConvergenceError(f"no bracket found above {start!r}")


# ------------------------------------------------------------------ #
#  quadrature
# ------------------------------------------------------------------ #
def integrate_segments(fn, edges, epsrel=None):
    """
    Integrate ``fn`` over consecutive segments of ``edges``.

    The last edge may be ``inf``. Raises QuadratureError when the summed
    error estimate is far outside the requested tolerance.
    """
    if epsrel is None:
        epsrel = lab_setting('QUAD_EPSREL')
    limit = lab_setting('QUAD_LIMIT')

    total, abserr = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if not b > a:
            continue
        out = integrate.quad(fn, a, b, epsabs=0.0, epsrel=epsrel, limit=limit, full_output=1)
        value, err = out[0], out[1]
        if len(out) > 3:
            logger.debug("quad warning on [%r, %r]: %s", a, b, out[3])
        total += value
        abserr += err

    if not math.isfinite(total):
        raise QuadratureError("integral is not finite", abserr=abserr)
    if abserr > max(math.sqrt(epsrel) * abs(total), 1e-300):
        logger.warning("quadrature error %.3g against value %.6g", abserr, total)
        raise QuadratureError(
            f"quadrature missed tolerance: value {total!r}, error bound {abserr!r}",
            abserr=abserr,
        )
    return total


def breakpoints(lo, hi, per_decade=1):
    """Geometric break points from ``lo`` to ``hi`` (``hi`` may be inf)."""
    if lo <= 0:
        raise ValueError("breakpoints need a positive start")
    top = hi if math.isfinite(hi) else lo * 1e12
    count = max(1, int(math.ceil(per_decade * math.log10(top / lo))))
    edges = list(np.geomspace(lo, top, count + 1))
    edges[0], edges[-1] = lo, top
    if not math.isfinite(hi):
        edges.append(math.inf)
    return edges


# ------------------------------------------------------------------ #
#  grids, hashing
# ------------------------------------------------------------------ #
def geometric_grid(lo, hi, per_decade=16):
    """Geometric grid with ``per_decade`` points per factor ten."""
    if not 0 < lo < hi:
        raise ValueError("geometric grid needs 0 < lo < hi")
    count = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    return np.geomspace(lo, hi, count)


def parse_float(value):
    """Float parser that accepts ``inf``, ``∞`` and ``e`` powers."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip().lower()
    if text in ('inf', '+inf', 'infinity', '∞'):
        return math.inf
    return float(text)


def canonical_json(payload):
    """Deterministic JSON text for hashing and file output."""
    return json.dumps(payload, sort_keys=True, separators=(',', ':'), default=_json_default)


def stable_hash(payload):
    """sha256 hex digest of the canonical JSON form of ``payload``."""
    return hashlib.sha256(canonical_json(payload).encode('utf-8')).hexdigest()


def _json_default(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def json_float(value):
    """JSON-safe float: non-finite values become strings."""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else repr(value)


def from_json_float(value):
    if value is None:
        return None
    return float(value)
