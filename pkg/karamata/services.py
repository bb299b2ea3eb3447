"""
Regular-variation and subexponential-density diagnostics.

All estimates are finite-grid readings reported with the grid they came
from. Nothing is extrapolated; pass/fail judgments belong to the caller.
"""

import logging
import math

import numpy as np

from dist.families import AffineWrapper, HazardFamily, LognormalHazard, WeibullHazard
from main.exceptions import QuadratureError
from main.utils import geometric_grid, integrate_segments, lab_setting

from .types import IndexEstimate, IrvDefect, SdCertificate, SdFlag, SdRatio, SdVerdict, TailFunction

logger = logging.getLogger(__name__)

DEFAULT_Y_GRID = np.geomspace(1.01, 10.0, 24)
# far end of the grids used for integrals and hazard checks
FAR = 1e12


# ------------------------------------------------------------------ #
#  Matuszewska indices
# ------------------------------------------------------------------ #
def matuszewska(f, x_grid=None, y_grid=None):
    """
    Upper and lower index estimates of ``f`` read from the largest x-decade.

    For each y the estimate is log(f(xy)/f(x)) / log y; the upper index is
    the max over the decade and over y, the lower one the min. Values below
    the configured DECAY_FLOOR are reported as -inf.
    """
    if not isinstance(f, TailFunction):
        f = TailFunction(f)
    xs = np.asarray(geometric_grid(1e3, 1e9) if x_grid is None else x_grid, dtype=float)
    ys = np.asarray(DEFAULT_Y_GRID if y_grid is None else y_grid, dtype=float)
    if xs.size < 2 or ys.size < 1:
        raise ValueError("matuszewska needs nonempty x and y grids")
    if np.any(ys <= 1.0):
        raise ValueError("y grid must lie in (1, Y]")
    x_lo, x_hi = float(xs.min()), float(xs.max())
    if x_hi / x_lo < 1e3 * (1 - 1e-12):
        raise ValueError("x grid must span at least 3 decades")

    log_f = f.log(xs)
    if not np.all(np.isfinite(log_f)):
        raise ValueError(f"{f!r} is not positive on the x grid")

    top = xs[xs >= x_hi / 10.0 * (1 - 1e-12)]
    base = f.log(top)[:, None]
    shifted = f.log(np.outer(top, ys))
    with np.errstate(invalid='ignore'):
        est = (shifted - base) / np.log(ys)[None, :]
    est = np.where(np.isnan(est), -np.inf, est)

    floor = lab_setting('DECAY_FLOOR')
    upper, lower = float(np.max(est)), float(np.min(est))
    upper = -math.inf if upper < floor else upper
    lower = -math.inf if lower < floor else lower
    return IndexEstimate(upper, lower, (float(top.min()), float(top.max())))


# ------------------------------------------------------------------ #
#  long tails and intermediate regular variation
# ------------------------------------------------------------------ #
def long_tail_defect(d, x, y, T=math.inf):
    """|F(x - y + Δ) / F(x + Δ) - 1|."""
    if y == 0:
        return 0.0
    if math.isinf(T):
        log_den = float(d.log_tail(x))
        if not math.isfinite(log_den):
            raise ValueError(f"zero tail at x={x!r}")
        return abs(math.expm1(float(d.log_tail(x - y)) - log_den))
    den = float(d.window_mass(x, T))
    if not den > 0:
        raise ValueError(f"zero window mass at x={x!r}")
    return abs(float(d.window_mass(x - y, T)) / den - 1.0)


def long_tail_trace(d, xs, y=1.0, T=math.inf):
    """Rows (x, defect) for a CSV trace."""
    return [(float(x), long_tail_defect(d, float(x), y, T)) for x in xs]


def irv_defect(f, y, x_max, per_decade=16):
    """Max and min of f(xy)/f(x) over the decade [x_max/10, x_max]."""
    if not 1.0 <= y <= 2.0:
        raise ValueError("y must lie in [1, 2]")
    if not isinstance(f, TailFunction):
        f = TailFunction(f)
    xs = geometric_grid(x_max / 10.0, x_max, per_decade)
    ratios = np.exp(f.log(xs * y) - f.log(xs))
    return IrvDefect(float(np.max(ratios)), float(np.min(ratios)))


def irv_trace(f, ys, x_max):
    """Rows (y, sup_ratio, inf_ratio) showing the approach to 1 as y ↓ 1."""
    return [(float(y), *irv_defect(f, float(y), x_max)) for y in ys]


# ------------------------------------------------------------------ #
#  subexponential densities
# ------------------------------------------------------------------ #
def _segment_edges(a, b, per_decade=4):
    start = max(a, 1.0)
    points = {a, b}
    if b > start * 10:
        count = int(math.ceil(per_decade * math.log10(b / start))) + 1
        points.update(float(p) for p in np.geomspace(start, b, count))
    return sorted(p for p in points if a <= p <= b)


def _total_integral(H, a):
    """∫_a^∞ H, or None when the far decades do not settle."""
    edges = _segment_edges(a, FAR)
    try:
        head = integrate_segments(H, edges[:-1]) if len(edges) > 2 else 0.0
        far = integrate_segments(H, edges[-2:] + [math.inf])
    except QuadratureError:
        return None
    total = head + far
    if not math.isfinite(total) or not total > 0:
        return None
    if far > 1e-6 * total:
        return None
    return total


def sd_ratio(H, x, split=math.sqrt, epsrel=1e-10):
    """
    r(x) = ∫_0^{x/2} H(y) H(x - y) dy / H(x) with the companion ∫_0^∞ H.

    The integral is split at ``split(x)`` (default √x) so the long-tail head
    is integrated separately from the bulk.
    """
    if not isinstance(H, TailFunction):
        H = TailFunction(H)
    if H.compact_support:
        logger.warning("sd_ratio on compact-support %r: class does not apply", H)
        return SdRatio(math.nan, math.nan, SdFlag.DIVERGENT)

    a = max(H.domain_low, 0.0)
    if not x / 2 > a:
        raise ValueError(f"x={x!r} is too small for a function starting at {a!r}")
    integral = _total_integral(H, a)
    if integral is None:
        logger.warning("integral of %r does not converge", H)
        return SdRatio(math.nan, math.inf, SdFlag.DIVERGENT)

    log_hx = H.log(x)

    def integrand(y):
        return math.exp(H.log(y) + H.log(x - y) - log_hx)

    cut = min(max(split(x), a), x / 2)
    edges = sorted(set(_segment_edges(a, cut) + [x / 2]))
    ratio = integrate_segments(integrand, edges, epsrel=epsrel)
    logger.debug("sd ratio of %r at %r: %.10g (integral %.10g)", H, x, ratio, integral)
    return SdRatio(ratio, integral, SdFlag.OK)


def sd_trace(H, xs):
    """Rows (x, r(x))."""
    return [(float(x), sd_ratio(H, float(x)).ratio) for x in xs]


def _nonincreasing(values, rel=1e-9):
    values = np.asarray(values, dtype=float)
    scale = np.max(np.abs(values)) if values.size else 0.0
    return bool(np.all(np.diff(values) <= rel * scale))


def _concave_majorant(law):
    """(z, z', index of z) used for the concave-majorant criterion."""
    if isinstance(law, LognormalHazard):
        return law.R, law.R_prime, law.hazard_index
    if isinstance(law, WeibullHazard):
        a = (law.beta + 1.0) / 2.0
        return (lambda x: np.asarray(x) ** a), (lambda x: a * np.asarray(x) ** (a - 1.0)), a
    return law.R, law.R_prime, law.hazard_index


def _criterion_b1(law, xs):
    z, z_prime, z_index = _concave_majorant(law)
    zs, rs = np.asarray(z(xs), dtype=float), np.asarray(law.R(xs), dtype=float)
    elasticity = xs * np.asarray(z_prime(xs)) / zs
    top = elasticity[xs >= xs[-1] / 10.0]
    slopes = np.diff(zs) / np.diff(xs)
    growth = rs / np.log(xs)

    checks = {
        'z index < 1': z_index < 1.0,
        'x z\'/z < 1 on top decade': bool(np.max(top) < 1.0),
        'z concave': _nonincreasing(slopes),
        'R/z nonincreasing': _nonincreasing(rs / zs),
        'R >> log x': bool(np.all(np.diff(growth) >= 0) and growth[-1] >= 2.0 * growth[0]),
    }
    text = (
        f"concave-majorant check with z index {z_index:.6g}, max x z'/z {np.max(top):.6g}: "
        + ', '.join(f"{k}={'yes' if v else 'no'}" for k, v in checks.items())
    )
    return all(checks.values()), text


def _criterion_b2(law, xs):
    rp = np.asarray(law.R_prime(xs), dtype=float)
    decreasing = _nonincreasing(rp)

    def integrand(y):
        return math.exp(y * float(law.R_prime(y)) + float(law.log_tail(y)))

    edges = [float(x) for x in xs[:: max(1, len(xs) // 12)]]
    if edges[-1] < xs[-1]:
        edges.append(float(xs[-1]))
    pieces = []
    try:
        for a, b in zip(edges[:-1], edges[1:]):
            pieces.append(integrate_segments(integrand, [a, b]))
    except (QuadratureError, OverflowError):
        pieces.append(math.inf)
    total = sum(pieces)
    settled = math.isfinite(total) and total > 0 and pieces[-1] <= 1e-6 * total
    text = (
        f"hazard-derivative check: R' nonincreasing={'yes' if decreasing else 'no'}, "
        f"integral up to {edges[-1]:.3g} = {total:.6g}, last piece {pieces[-1]:.3g}"
    )
    return decreasing and settled, text


def sd_sufficient(d):
    """Which sufficient criterion certifies that x ↦ F(x + Δ) is a subexponential density."""
    law = d.unwrap() if isinstance(d, AffineWrapper) else d
    if not isinstance(law, HazardFamily):
        return SdCertificate(SdVerdict.NOT_APPLICABLE, f"{d.family} has no hazard decomposition")

    xs = geometric_grid(max(100.0, 10.0 * law.x_min), FAR, 8)
    ok_b1, text_b1 = _criterion_b1(law, xs)
    if ok_b1:
        return SdCertificate(SdVerdict.PASS_B1, text_b1)
    ok_b2, text_b2 = _criterion_b2(law, xs)
    if ok_b2:
        return SdCertificate(SdVerdict.PASS_B2, f"{text_b1}; {text_b2}")
    return SdCertificate(SdVerdict.FAIL, f"{text_b1}; {text_b2}")
