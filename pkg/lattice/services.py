"""
Exact lattice arithmetic: the ground-truth oracle for P{S_n ∈ x + Δ}.

1. discretize() puts the mass of each cell (a, a + δ] on one grid point and
   keeps what lies outside [lo, hi] as spill
2. convolve() / nfold() build the law of S_n by FFT convolution, carrying
   the spill buckets along conservatively
3. restricted_walk() and epsilon_eta() work with walks whose steps are
   confined to a level set
4. resolve() turns a query Bracket into a value (strict mode) or keeps it
   (bound mode)
"""

import logging
import math

import numpy as np
from scipy import signal

from main.exceptions import GridOverflowError, SpillError
from main.utils import lab_setting

from . import cache
from .pmf import SNAP, GridSpec, LatticePMF, Placement, SpillMode

logger = logging.getLogger(__name__)


class Variant:
    EPSILON = 'epsilon'
    ETA = 'eta'


def _check_cells(cells):
    limit = lab_setting('MAX_CELLS')
    if cells > limit:
        raise GridOverflowError(f"lattice needs {cells} cells, more than MAX_CELLS={limit}")


def check_window(T, delta):
    if math.isinf(T):
        return
    if not T > 0:
        raise ValueError("window length T must be positive")
    ratio = T / delta
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"T={T!r} is not a multiple of delta={delta!r}")


# ------------------------------------------------------------------ #
#  construction
# ------------------------------------------------------------------ #
def discretize(d, delta, lo, hi, placement=Placement.UPPER):
    """
    Lattice version of ``d`` on [lo, hi] with step delta.

    Cell k covers (lo + kδ, lo + (k+1)δ] and carries exactly
    window_mass(lo + kδ, δ). Upper placement puts it at the right end point,
    lower placement at the left one; the two bracket ``d`` stochastically.
    Mean placement starts from the midpoints and shifts the whole grid so the
    grid mass has the same first moment as ``d`` on (lo, hi]; it brackets
    nothing but keeps S_n free of the n·δ/2 drift of the end point rules.
    """
    grid = GridSpec(float(delta), float(lo), float(hi), Placement(placement))
    cells = grid.cells
    _check_cells(cells)

    left = grid.lo + grid.delta * np.arange(cells)
    masses = np.asarray(d.window_mass(left, grid.delta), dtype=float)
    # window_mass clips at 0; recompute raw differences to catch broken laws
    raw = np.asarray(d.tail(left)) - np.asarray(d.tail(left + grid.delta))
    if np.min(raw, initial=0.0) < -1e-14:
        raise ValueError(f"negative cell mass {np.min(raw)!r}: broken distribution")

    top = grid.lo + grid.delta * cells
    if grid.placement == Placement.UPPER:
        origin = grid.lo + grid.delta
    elif grid.placement == Placement.LOWER:
        origin = grid.lo
    else:
        origin = _mean_matched_origin(d, masses, grid.lo, grid.delta, top)
    spill_high = float(d.tail(top))
    spill_low = float(d.cdf(grid.lo))
    return LatticePMF(
        origin=origin, delta=grid.delta, masses=masses,
        spill_low=spill_low, spill_high=spill_high,
        low_ceiling=grid.lo, high_floor=top,
    )


def _mean_matched_origin(d, masses, lo, delta, top):
    mass = float(np.sum(masses))
    mid = lo + delta / 2.0
    if not mass > 0:
        return mid
    grid_moment = float(np.dot(masses, mid + delta * np.arange(masses.size)))
    shift = (d.partial_moment(1, lo, top) - grid_moment) / mass
    if abs(shift) > delta / 2.0:
        logger.warning("mean-matched grid shift %.3g exceeds half a cell", shift)
    logger.debug("mean-matched grid: shift %.3g on delta %.3g", shift, delta)
    return mid + shift


def from_distribution(d, delta=None):
    """Exact grid law of a lattice StepDistribution."""
    atoms = d.atoms()
    if delta is None:
        values = sorted(atoms)
        gaps = np.diff(values)
        delta = float(np.min(gaps)) if gaps.size else 1.0
    return LatticePMF.from_atoms(atoms, delta)


def lattice_law(d, grid=None):
    """Grid law of ``d``: exact for lattice laws without a grid, discretized on ``grid`` otherwise."""
    if grid is None:
        if not d.is_lattice:
            raise ValueError(f"{d.family} needs a lattice grid (delta, lo, hi)")
        return from_distribution(d)
    return discretize(d, grid.delta, grid.lo, grid.hi, grid.placement)


# ------------------------------------------------------------------ #
#  convolution
# ------------------------------------------------------------------ #
def clip_negative(grid):
    """Zero the negative round-off cells of an FFT product; returns (grid, clipped mass)."""
    negative = grid < 0
    if not np.any(negative):
        return grid, 0.0
    clipped = float(-np.sum(grid[negative]))
    low = float(np.min(grid))
    if low < -1e-13:
        logger.warning("convolution produced negative cell mass %.3g, %.3g clipped in total", low, clipped)
    else:
        logger.debug("clipped %.3g negative mass over %d cells", clipped, int(np.count_nonzero(negative)))
    return np.maximum(grid, 0.0), clipped


def convolve(p, q):
    """Exact discrete convolution with conservative spill propagation."""
    return _convolve(p, q)[0]


def _convolve(p, q):
    if abs(p.delta - q.delta) > 1e-12 * p.delta:
        raise ValueError(f"mismatched delta: {p.delta!r} vs {q.delta!r}")
    offset = (p.origin - q.origin) / p.delta
    if abs(offset - round(offset)) > 1e-6:
        raise ValueError("incompatible origins: difference is not a multiple of delta")

    _check_cells(p.size + q.size - 1)
    grid, clipped = clip_negative(signal.convolve(p.masses, q.masses, method='auto'))

    P, Q = p.grid_mass, q.grid_mass
    ph, qh, pl, ql = p.spill_high, q.spill_high, p.spill_low, q.spill_low
    spill_high = ph * (Q + qh) + qh * P
    spill_low = pl * (Q + ql) + ql * P
    spill_mixed = (
        p.spill_mixed * q.total + q.spill_mixed * (p.total - p.spill_mixed)
        + ph * ql + pl * qh
    )

    floors = []
    if ph > 0:
        floors.append(p.high_floor + (q.origin if Q > 0 else q.high_floor))
        if qh > 0:
            floors.append(p.high_floor + q.high_floor)
    if qh > 0 and P > 0:
        floors.append(q.high_floor + p.origin)
    ceilings = []
    if pl > 0:
        ceilings.append(p.low_ceiling + (q.last_point if Q > 0 else q.low_ceiling))
        if ql > 0:
            ceilings.append(p.low_ceiling + q.low_ceiling)
    if ql > 0 and P > 0:
        ceilings.append(q.low_ceiling + p.last_point)

    pmf = LatticePMF(
        origin=p.origin + q.origin, delta=p.delta, masses=grid,
        spill_low=spill_low, spill_high=spill_high, spill_mixed=spill_mixed,
        low_ceiling=max(ceilings) if ceilings else -math.inf,
        high_floor=min(floors) if floors else math.inf,
    )
    return pmf, clipped


def nfold(p, n, query_max=None, cache_key=None):
    """
    Law of S_n by binary exponentiation of convolve().

    With ``query_max`` the intermediate laws are cut above a level chosen so
    that every tail or window query at x ≤ query_max stays exact.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")
    if cache_key is not None and lab_setting('CACHE_ENABLED'):
        hit = cache.load(cache_key)
        if hit is not None:
            return hit

    cap = None
    cells = n * (p.size - 1) + 1
    if query_max is not None:
        cap = query_max + n * max(0.0, -p.origin) + p.delta
        cells = min(cells, int((cap - n * p.origin) / p.delta) + 2)
    _check_cells(cells)

    result, power, k = None, p, n
    clipped = 0.0
    while k:
        if k & 1:
            if result is None:
                result = power
            else:
                result, lost = _convolve(result, power)
                clipped += lost
            if cap is not None:
                result = result.truncate_above(cap)
        k >>= 1
        if k:
            power, lost = _convolve(power, power)
            clipped += lost
            if cap is not None:
                power = power.truncate_above(cap)

    if clipped > 0:
        logger.debug("%d-fold law: %.3g negative round-off mass clipped in total", n, clipped)

    if cache_key is not None and lab_setting('CACHE_ENABLED'):
        cache.store(cache_key, result)
    return result


# ------------------------------------------------------------------ #
#  restrictions
# ------------------------------------------------------------------ #
IN, OUT, MAYBE = 'in', 'out', 'maybe'


def _restrict(p, mask, low, high):
    """Keep grid cells under ``mask``; spill that may or may not qualify becomes mixed."""
    masses = np.where(mask, p.masses, 0.0)
    mixed = p.spill_mixed
    mixed += p.spill_low if low == MAYBE else 0.0
    mixed += p.spill_high if high == MAYBE else 0.0
    return LatticePMF(
        origin=p.origin, delta=p.delta, masses=masses,
        spill_low=p.spill_low if low == IN else 0.0,
        spill_high=p.spill_high if high == IN else 0.0,
        spill_mixed=mixed,
        low_ceiling=p.low_ceiling, high_floor=p.high_floor,
    )


def at_most(p, level):
    """Sub-law on {ξ ≤ level}."""
    tol = SNAP * p.delta
    mask = np.arange(p.size) < p.index_above(level)
    return _restrict(
        p, mask,
        low=IN if p.low_ceiling <= level + tol else MAYBE,
        high=OUT if p.high_floor >= level - tol else MAYBE,
    )


def at_least(p, level):
    """Sub-law on {ξ ≥ level}."""
    tol = SNAP * p.delta
    mask = np.arange(p.size) >= p.index_at_or_above(level)
    return _restrict(
        p, mask,
        low=OUT if p.low_ceiling < level - tol else MAYBE,
        high=IN if p.high_floor >= level - tol else MAYBE,
    )


def above(p, level):
    """Sub-law on {ξ > level}."""
    tol = SNAP * p.delta
    mask = np.arange(p.size) >= p.index_above(level)
    return _restrict(
        p, mask,
        low=OUT if p.low_ceiling <= level + tol else MAYBE,
        high=IN if p.high_floor >= level - tol else MAYBE,
    )


def below(p, level):
    """Sub-law on {ξ < level}."""
    tol = SNAP * p.delta
    mask = np.arange(p.size) < p.index_at_or_above(level)
    return _restrict(
        p, mask,
        low=IN if p.low_ceiling < level - tol else MAYBE,
        high=OUT if p.high_floor >= level - tol else MAYBE,
    )


def zero_law(origin, delta):
    return LatticePMF(origin=origin, delta=delta, masses=[0.0])


def restricted_walk(p, h, n, two_sided=False, query_max=None, cache_key=None):
    """
    Sub-probability law of S_n on {ξ_1 ≤ h, ..., ξ_n ≤ h}
    (with two_sided, on {|ξ_i| ≤ h}).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    q = at_most(p, h).truncate_above(h)
    if two_sided:
        q = at_least(q, -h)
    if q.total <= 0:
        logger.warning("restriction at h=%r removes all mass; returning the zero law", h)
        return zero_law(n * p.origin, p.delta)
    return nfold(q, n, query_max=query_max, cache_key=cache_key)


# ------------------------------------------------------------------ #
#  queries
# ------------------------------------------------------------------ #
def resolve(bracket, mode=None, tol=None):
    """Value of a query bracket: checked lower end (strict) or the bracket (bound)."""
    mode = SpillMode(mode or lab_setting('SPILL_MODE'))
    if mode == SpillMode.BOUND:
        return bracket
    tol = lab_setting('SPILL_TOL') if tol is None else tol
    if bracket.width > tol * bracket.lower:
        logger.warning("spill ambiguity %.3g against value %.3g", bracket.width, bracket.lower)
        raise SpillError(
            f"off-grid mass {bracket.width!r} is too large against {bracket.lower!r}; "
            "widen the grid",
            ambiguous=bracket.width, value=bracket.lower,
        )
    return bracket.lower


def query(pmf, x, T=math.inf, mode=None):
    return resolve(pmf.bracket(x, T), mode)


def _admissible_ratios(law, p, h, T, tol):
    """Ratio law(x + Δ) / p(x + Δ) at grid points x ≥ h where both are exact."""
    xs = p.points[p.points >= h - SNAP * p.delta]
    if xs.size == 0:
        return xs, xs
    num_lo, num_hi = law.window_brackets(xs, T)
    den_lo, den_hi = p.window_brackets(xs, T)
    ok = (den_lo > 0) & (den_hi - den_lo <= tol * den_lo) & (num_hi - num_lo <= tol * np.maximum(num_lo, 1e-300))
    return xs[ok], num_lo[ok] / den_lo[ok]


def epsilon_eta(p, h, K_level, k, T=math.inf, variant=Variant.EPSILON, tol=None):
    """
    Two-jump quantities of the truncation argument, k ≥ 2:

      epsilon: sup_{x ≥ h} P{S_k ∈ x+Δ, ξ_1 > h, ..., ξ_k > h} / F(x+Δ)
      eta:     sup_{x ≥ h} P{S_k ∈ x+Δ, ξ_2 < -K, ..., ξ_k < -K} / F(x+Δ)

    with K = K_level and F the law ``p`` itself.
    """
    xs, ratios = epsilon_eta_profile(p, h, K_level, k, T, variant, tol)
    if xs is None:
        return 0.0
    return float(np.max(ratios))


def epsilon_eta_profile(p, h, K_level, k, T=math.inf, variant=Variant.EPSILON, tol=None):
    """(x grid, ratio) arrays behind epsilon_eta; (None, None) for empty events."""
    if int(k) < 2:
        raise ValueError("k must be at least 2")
    check_window(T, p.delta)
    tol = lab_setting('SPILL_TOL') if tol is None else tol

    if variant == Variant.EPSILON:
        step = above(p, h)
        if step.total <= 0:
            return None, None
        law = nfold(step, k)
    elif variant == Variant.ETA:
        step = below(p, -K_level)
        if step.total <= 0:
            return None, None
        law = convolve(p, nfold(step, k - 1))
    else:
        raise ValueError(f"unknown variant '{variant}'")

    if law.total <= 0:
        return None, None
    xs, ratios = _admissible_ratios(law, p, h, T, tol)
    if xs.size == 0:
        raise ValueError("empty admissible x-range for the supremum")
    return xs, ratios
