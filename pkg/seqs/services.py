"""
Boundary sequences of the big-jump domain.

For a step law and a walk length n the building blocks are
  b_n  natural scale (typical size of S_n)
  h_n  truncation level
  I_n  insensitivity boundary (smallest x where shifts by b_n no longer matter)
  J_n  small-steps boundary
and the reported big-jump boundary x_n = I_n + J_n. boundary() assembles them
from the closed forms of the family constructions; the lattice-based checks
(truncation_check, small_steps_defect) give finite-n traces of the
defining conditions.
"""

import logging
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import gamma as gamma_fn

from dist.families import AffineWrapper, LightSubexponential, LognormalHazard, StepDistribution, WeibullHazard
from dist.services import StandardizeMode, from_spec, q_function, standardize, truncated_moments
from karamata.services import matuszewska
from karamata.types import TailFunction
from lattice import services as lattice
from lattice.pmf import SNAP, Bracket, SpillMode
from main.exceptions import ConvergenceError, NumericalGuardError, SpillError, UnboundedBoundaryError
from main.utils import expand_upward, geometric_grid, lab_setting

from .types import BoundaryOptions, BoundarySet, Provenance, Regime

logger = logging.getLogger(__name__)

# the unit in which each construction measures the steps
STANDARDIZATION = {
    Provenance.POWER_TAIL: StandardizeMode.UNIT,
    Provenance.LOGNORMAL_HAZARD: StandardizeMode.UNIT,
    Provenance.WEIBULL_HAZARD: StandardizeMode.UNIT,
    Provenance.LIGHT_SUBEXP: StandardizeMode.UNIT,
    Provenance.HEURISTIC: StandardizeMode.UNIT,
    Provenance.BALANCED: StandardizeMode.RAW,
    Provenance.STABLE_FINITE_MEAN: StandardizeMode.CENTER,
    Provenance.INFINITE_MEAN: StandardizeMode.RAW,
    Provenance.LINEAR: StandardizeMode.CENTER,
}

# largest argument of exp() that stays finite
EXP_LIMIT = 709.0

# brentq tolerances: the bracket shrinks to a few ulps of the root
ROOT_XTOL = 1e-300
ROOT_RTOL = 4.0 * np.finfo(float).eps


def find_root(fn, lo, hi):
    """Root of ``fn`` on [lo, hi] by scipy's brentq, to a few ulps."""
    f_lo, f_hi = fn(lo), fn(hi)
    if f_lo != 0 and f_hi != 0 and (f_lo > 0) == (f_hi > 0):
        raise ConvergenceError(f"no sign change on [{lo!r}, {hi!r}]")
    try:
        return float(brentq(fn, lo, hi, xtol=ROOT_XTOL, rtol=ROOT_RTOL, maxiter=500))
    except RuntimeError as exc:
        raise ConvergenceError(str(exc)) from exc


def boundary_law(spec, provenance):
    """The step law of ``spec`` in the units used by ``provenance``."""
    d = spec if isinstance(spec, StepDistribution) else from_spec(spec)
    return standardize(d, STANDARDIZATION[Provenance(provenance)])


# ------------------------------------------------------------------ #
#  natural scale and a_n
# ------------------------------------------------------------------ #
def identify_regime(d):
    if d.moment_exists(2):
        return Regime.FINITE_VARIANCE
    right = -d.tail_index if math.isfinite(d.tail_index) else math.inf
    left = math.inf if d.left_index is None else d.left_index
    if left < right:
        if 1.0 < left < 2.0:
            return Regime.STABLE_FINITE_MEAN
        if left < 1.0:
            return Regime.INFINITE_MEAN
        raise ValueError(f"left tail index {left!r} of {d.family} is not covered by any regime")
    if right < 2.0:
        return Regime.BALANCED
    raise ValueError(f"cannot identify a regime for {d!r}")


def stable_scale(d, n):
    """Largest root b of Γ(3 - α)·n·μ2(b) = (α - 1)·b² with α the left tail index."""
    alpha = d.left_index
    if alpha is None or not 1.0 < alpha < 2.0:
        raise ValueError("stable scale needs a left tail index in (1, 2)")
    weight = gamma_fn(3.0 - alpha) * n

    def excess(b):
        return weight * truncated_moments(d, b)[1] - (alpha - 1.0) * b * b

    # first grid point where the truncated second moment outweighs b²
    start = next((float(x) for x in geometric_grid(1e-3, 1e12, 4) if excess(float(x)) > 0), None)
    if start is None:
        raise ConvergenceError(f"stable scale equation has no root for n={n}")
    lo, hi = expand_upward(excess, start, stop_sign=-1)
    return find_root(excess, lo, hi)


def left_quantile_scale(d, n):
    """inf{x : F(-x) < 1/n}."""
    level = 1.0 / n

    def excess(x):
        return level - float(d.left_tail(x))

    if excess(0.0) > 0:
        return 0.0
    lo, hi = expand_upward(excess, 1.0, stop_sign=1)
    if lo == hi:
        lo = 0.0
    x = find_root(excess, lo, hi)
    # the infimum is the first point with F(-x) strictly below 1/n
    return x if excess(x) > 0 else float(np.nextafter(x, math.inf))


def natural_scale(d, n, options=None):
    """
    Natural-scale sequence b_n for the regime of ``d``.

    Finite variance gives √(n·Var ξ) (√n for standardized laws); the
    balanced infinite-variance regime uses the truncation level of the
    balanced construction.
    """
    n = _check_n(n)
    regime = identify_regime(d)
    if regime == Regime.FINITE_VARIANCE:
        return math.sqrt(n * d.variance())
    if regime == Regime.STABLE_FINITE_MEAN:
        return stable_scale(d, n)
    if regime == Regime.INFINITE_MEAN:
        return left_quantile_scale(d, n)
    return _balanced_parts(d, n, _options(options))['b']


def a_n(d, n, x_lo=1e-3, x_hi=1e12, per_decade=8):
    """
    Solution of Q(x) = 1/n on the ultimately decreasing part of Q.

    Q is evaluated on a geometric grid; the root is searched on the strictly
    decreasing suffix of those values.
    """
    n = _check_n(n)
    level = 1.0 / n
    xs = geometric_grid(x_lo, x_hi, per_decade)
    qs = np.array([q_function(d, float(x)) for x in xs])

    start = len(qs) - 1
    while start > 0 and qs[start - 1] > qs[start]:
        start -= 1
    if not qs[start] > level:
        raise ConvergenceError(f"Q is already below 1/n={level!r} where it starts to decrease")
    below = np.nonzero(qs[start:] <= level)[0]
    if below.size == 0:
        raise ConvergenceError(f"Q stays above 1/n={level!r} up to x={x_hi!r}")
    k = start + int(below[0])

    def excess(x):
        return q_function(d, x) - level

    root = find_root(excess, float(xs[k - 1]), float(xs[k]))
    residual = abs(excess(root))
    if residual > 1e-10 * level:
        logger.warning("a_n residual %.3g at n=%d", residual, n)
        raise ConvergenceError(f"a_n residual {residual!r} exceeds 1e-10/n")
    return root


# ------------------------------------------------------------------ #
#  insensitivity
# ------------------------------------------------------------------ #
def insensitivity_defect(d, x, b, T=math.inf):
    """sup over 0 ≤ t ≤ b of |F(x - t + Δ) / F(x + Δ) - 1|."""
    if b < 0:
        raise ValueError("shift bound b must be nonnegative")
    if b == 0:
        return 0.0
    shifts = np.array([b]) if d.shift_monotone else np.linspace(0.0, b, 64)
    if math.isinf(T):
        log_den = float(d.log_tail(x))
        if not math.isfinite(log_den):
            raise ValueError(f"zero window mass at x={x!r}")
        values = np.abs(np.expm1(np.asarray(d.log_tail(x - shifts), dtype=float) - log_den))
    else:
        den = float(d.window_mass(x, T))
        if not den > 0:
            raise ValueError(f"zero window mass at x={x!r}")
        values = np.abs(np.asarray(d.window_mass(x - shifts, T), dtype=float) / den - 1.0)
    return float(np.max(values))


def insensitivity_boundary(d, b, tol, T=math.inf):
    """Smallest x with insensitivity_defect(d, x, b, T) ≤ tol."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if b == 0:
        return d.domain_low
    limit = max(b, 1.0) * 1e12

    def excess(x):
        return insensitivity_defect(d, x, b, T) - tol

    x = max(d.domain_low, 0.0) + b
    prev = x
    while True:
        try:
            value = excess(x)
        except ValueError:
            raise UnboundedBoundaryError(f"window mass vanishes before the defect drops below {tol!r}")
        if value <= 0:
            break
        prev, x = x, 2.0 * x
        if x > limit:
            logger.warning("insensitivity defect stays above %r up to x=%.3g", tol, limit)
            raise UnboundedBoundaryError(
                f"insensitivity defect stays above {tol!r} up to x={limit!r}; the law is not long-tailed"
            )
    if x == prev:
        return x
    root = find_root(excess, prev, x)
    return root if excess(root) <= 0 else float(np.nextafter(root, math.inf))


# ------------------------------------------------------------------ #
#  lattice traces
# ------------------------------------------------------------------ #
def truncation_check(d, h, n, b, T=math.inf, grid=None, K=1.0):
    """(n·ε, n·η) of the two-jump truncation conditions, with the η level K·b."""
    n = _check_n(n)
    if float(d.tail(h)) == 0.0:
        return 0.0, 0.0
    p = lattice.lattice_law(d, grid)
    n_eps = n * lattice.epsilon_eta(p, h, K * b, 2, T, lattice.Variant.EPSILON)
    n_eta = n * lattice.epsilon_eta(p, h, K * b, 2, T, lattice.Variant.ETA)
    return n_eps, n_eta


def truncation_trace(d, ns, h_of, b_of=math.sqrt, T=math.inf, grid=None, K=1.0):
    """Rows (n, h, n·ε, n·η, n·F̄(h)) along an n-grid."""
    rows = []
    for n in ns:
        h = float(h_of(n))
        n_eps, n_eta = truncation_check(d, h, n, float(b_of(n)), T, grid, K)
        rows.append((int(n), h, n_eps, n_eta, n * float(d.tail(h))))
        logger.info("truncation trace n=%d h=%.6g: n_eps=%.6g n_eta=%.6g", n, h, n_eps, n_eta)
    return rows


def small_steps_defect(d, h, J, n, T=math.inf, grid=None, mode=None):
    """
    sup over x ≥ J, z ≥ x of P{S_n ∈ z + Δ, ξ_i ≤ h for all i} / (n·F(x + Δ)).

    Strict spill mode returns a float; bound mode returns a Bracket.
    """
    n = _check_n(n)
    mode = SpillMode(mode or lab_setting('SPILL_MODE'))
    p = lattice.lattice_law(d, grid)
    lattice.check_window(T, p.delta)
    walk = lattice.restricted_walk(p, h, n)
    if walk.total <= 0:
        return Bracket(0.0, 0.0) if mode == SpillMode.BOUND else 0.0

    tol = SNAP * p.delta
    reach = p.high_floor - (0.0 if math.isinf(T) else T)
    xs = np.union1d(p.points, walk.points)
    xs = xs[(xs >= J - tol) & (xs <= reach + tol)]
    if xs.size == 0:
        return Bracket(0.0, 0.0) if mode == SpillMode.BOUND else 0.0

    num_lo, num_hi = walk.window_brackets(xs, T)
    if not math.isinf(T):
        # inner supremum over z ≥ x: window masses at every later grid point
        zs = walk.points
        z_lo, z_hi = walk.window_brackets(zs, T)
        suffix_lo = np.concatenate([np.maximum.accumulate(z_lo[::-1])[::-1], [0.0]])
        suffix_hi = np.concatenate([np.maximum.accumulate(z_hi[::-1])[::-1], [0.0]])
        k = np.searchsorted(zs, xs - tol, side='left')
        num_lo = np.maximum(num_lo, suffix_lo[k])
        num_hi = np.maximum(num_hi, suffix_hi[k])
    den_lo, den_hi = p.window_brackets(xs, T)

    live = num_hi > 0
    if not np.any(live):
        return Bracket(0.0, 0.0) if mode == SpillMode.BOUND else 0.0
    num_lo, num_hi, den_lo, den_hi = num_lo[live], num_hi[live], den_lo[live], den_hi[live]
    if np.any(den_hi <= 0):
        logger.warning("restricted walk has mass where F(x + Δ) vanishes (h=%r, J=%r)", h, J)
        return Bracket(math.inf, math.inf) if mode == SpillMode.BOUND else math.inf

    if mode == SpillMode.BOUND:
        with np.errstate(divide='ignore'):
            upper = np.where(den_lo > 0, num_hi / (n * np.maximum(den_lo, 1e-300)), math.inf)
        return Bracket(float(np.max(num_lo / (n * den_hi))), float(np.max(upper)))

    spill_tol = lab_setting('SPILL_TOL')
    loose = (num_hi - num_lo > spill_tol * num_lo) | (den_hi - den_lo > spill_tol * den_lo)
    if np.any(loose):
        i = int(np.argmax(loose))
        logger.warning("small-steps defect: ambiguous spill at x=%r", float(xs[live][i]))
        raise SpillError(
            "off-grid mass makes the small-steps ratio ambiguous; widen the grid",
            ambiguous=float(max(num_hi[i] - num_lo[i], den_hi[i] - den_lo[i])), value=float(num_lo[i]),
        )
    return float(np.max(num_lo / (n * den_lo)))


# ------------------------------------------------------------------ #
#  heuristic and side conditions
# ------------------------------------------------------------------ #
def heuristic_J(d, n, damping=0.5, rtol=1e-9, max_iter=10_000):
    """
    Fixed point of J = √(-2n·log(n·F̄(J))) by damped iteration from √(2n log n).

    A heuristic small-steps level only; it is not certified.
    """
    n = _check_n(n)
    log_n = math.log(n)
    J = math.sqrt(2.0 * n * log_n)
    for _ in range(max_iter):
        log_g = log_n + float(d.log_tail(J))
        if not math.isfinite(log_g):
            raise ConvergenceError(f"F̄ vanishes at J={J!r}: no fixed point")
        if not log_g < 0:
            raise ConvergenceError(f"n·F̄(J) >= 1 at J={J!r}: no fixed point")
        target = math.sqrt(-2.0 * n * log_g)
        update = (1.0 - damping) * J + damping * target
        if abs(update - J) <= rtol * J:
            return update
        J = update
    raise ConvergenceError(f"heuristic J did not converge in {max_iter} iterations")


def tightness_trace(d, n, Ks=(1, 2, 4, 8, 16), b=None):
    """Rows (K, n·Ḡ(K·b_n)) for the tightness condition on the natural scale."""
    n = _check_n(n)
    b = natural_scale(d, n) if b is None else b
    return [(float(K), n * float(d.two_sided_tail(K * b))) for K in Ks]


def root_shift_defect(d, x, kappa, T=math.inf):
    """Insensitivity defect over shifts up to x^(1/κ)."""
    if not 1.0 < kappa <= 2.0:
        raise ValueError("kappa must lie in (1, 2]")
    return insensitivity_defect(d, x, x ** (1.0 / kappa), T)


# ------------------------------------------------------------------ #
#  boundary sets
# ------------------------------------------------------------------ #
def _check_n(n):
    if int(n) != n or int(n) < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return int(n)


def _options(options):
    if options is None:
        return BoundaryOptions()
    if isinstance(options, BoundaryOptions):
        return options
    return BoundaryOptions.from_mapping(options)


def _need_log(n, provenance):
    if n < 2:
        raise ValueError(f"{provenance} needs n >= 2")
    return math.log(n)


def _safe_exp(value, what):
    if value > EXP_LIMIT:
        logger.warning("%s overflows: exponent %.6g", what, value)
        raise NumericalGuardError(f"{what} overflows double precision (exponent {value!r})")
    return math.exp(value)


def _hazard_law(d, cls, provenance):
    law = d.unwrap() if hasattr(d, 'unwrap') else d
    if not isinstance(law, cls):
        raise ValueError(f"{provenance} needs a {cls.family} law, got {d.family}")
    return law


def _hazard_constant(d, law):
    """
    Constant c of the hazard R in the working units of ``d``.

    R(s·y) ~ s^k·R(y) with k the regular-variation index of R, so a law
    divided by s has constant c·s^k. The log-scale hazard (k = 0) keeps c.
    """
    scale = 1.0
    while isinstance(d, AffineWrapper):
        scale *= d.scale
        d = d.base
    return law.c * scale ** law.hazard_index


def _require_regime(d, regime, provenance):
    found = identify_regime(d)
    if found != regime:
        raise ValueError(f"{provenance} needs the {regime} regime, {d.family} is {found}")


def _estimated_indices(d, T):
    try:
        est = matuszewska(TailFunction.from_distribution(d, T))
    except (ValueError, NumericalGuardError):
        logger.info("no index estimate for %r", d)
        return None
    return est.upper, est.lower


def _power_tail_parts(d, n, opts):
    _require_regime(d, Regime.FINITE_VARIANCE, Provenance.POWER_TAIL)
    log_n = _need_log(n, Provenance.POWER_TAIL)
    upper, lower = d.matuszewska_indices(opts.T)
    edge = -2.0 if math.isinf(opts.T) else -3.0
    if not upper < edge:
        raise ValueError(f"prop_8_1 needs an upper index below {edge}, got {upper!r}")
    if not opts.t > -lower + edge:
        raise ValueError(f"prop_8_1 needs t > {-lower + edge!r}, got t={opts.t!r}")
    J = math.sqrt(opts.t * n * log_n)
    return {
        'b': natural_scale(d, n),
        'h': math.sqrt(n / (opts.t * log_n)),
        'J': J,
        'x_theorem': J,
        'indices': {'declared': (upper, lower), 'estimated': _estimated_indices(d, opts.T)},
    }


def _lognormal_parts(d, n, opts):
    _require_regime(d, Regime.FINITE_VARIANCE, Provenance.LOGNORMAL_HAZARD)
    law = _hazard_law(d, LognormalHazard, Provenance.LOGNORMAL_HAZARD)
    log_n = _need_log(n, Provenance.LOGNORMAL_HAZARD)
    floor = 2.0 ** (1.0 - law.beta) * _hazard_constant(d, law)
    if not opts.t > floor:
        raise ValueError(f"prop_8_2 needs t > 2^(1-beta)·c = {floor!r}, got t={opts.t!r}")
    scale = log_n ** law.beta
    J = math.sqrt(opts.t * n * scale)
    if law.beta >= 2.0:
        x_theorem = opts.multiplier * math.sqrt(n * log_n ** (2.0 * law.beta - 2.0))
    else:
        x_theorem = J
    return {
        'b': natural_scale(d, n),
        'h': math.sqrt(n / (opts.t * scale)),
        'J': J,
        'x_theorem': x_theorem,
    }


def _weibull_parts(d, n, opts):
    _require_regime(d, Regime.FINITE_VARIANCE, Provenance.WEIBULL_HAZARD)
    law = _hazard_law(d, WeibullHazard, Provenance.WEIBULL_HAZARD)
    c = _hazard_constant(d, law)
    beta = law.beta
    eps = (1.0 - beta) / 2.0 if opts.eps is None else opts.eps
    if not 0.0 < eps < 1.0 - beta:
        raise ValueError(f"prop_8_3 needs 0 < eps < 1 - beta = {1.0 - beta!r}, got eps={eps!r}")
    return {
        'b': natural_scale(d, n),
        'h': n ** ((1.0 - beta - eps) / (2.0 - beta)),
        'J': n ** ((1.0 + eps) / (2.0 - beta)),
        # x / R(x) = multiplier·√n with R(x) = c·x^β
        'x_theorem': (c * opts.multiplier * math.sqrt(n)) ** (1.0 / (1.0 - beta)),
        'notes': {'eps': eps},
    }


def _light_parts(d, n, opts):
    _require_regime(d, Regime.FINITE_VARIANCE, Provenance.LIGHT_SUBEXP)
    law = _hazard_law(d, LightSubexponential, Provenance.LIGHT_SUBEXP)
    c = _hazard_constant(d, law)
    eps = 0.5 if opts.eps is None else opts.eps
    if not eps > 0:
        raise ValueError(f"prop_8_4 needs eps > 0, got eps={eps!r}")
    growth = n ** (1.0 / (2.0 * law.beta))
    return {
        'b': natural_scale(d, n),
        'h': math.sqrt(n),
        'J': _safe_exp((c + eps) ** (1.0 / law.beta) * growth, 'J_n'),
        'x_theorem': _safe_exp(opts.multiplier * growth, 'x_theorem'),
        'notes': {'eps': eps},
    }


def _balanced_parts(d, n, opts):
    t_n = opts.t_n if opts.t_n is not None else float(n) ** opts.t_n_power
    if not t_n > 0:
        raise ValueError("t_n must be positive")
    full = n * float(d.two_sided_tail(t_n))
    half = n * float(d.two_sided_tail(t_n / 2.0))
    if not full < 1.0:
        raise ValueError(f"prop_9_1 needs n·G(t_n) < 1, got {full!r}")
    if not 0.0 < half < 1.0:
        raise ValueError(f"prop_9_1 needs 0 < n·G(t_n/2) < 1, got {half!r}")
    h = t_n / (-2.0 * opts.gamma * math.log(half))
    return {'b': h, 'h': h, 'J': t_n / 2.0, 't_n': t_n, 'tail_half': half}


def _balanced_boundary_parts(d, n, opts):
    _require_regime(d, Regime.BALANCED, Provenance.BALANCED)
    parts = _balanced_parts(d, n, opts)
    notes = {'t_n': parts.pop('t_n'), 'n_G_half_t_n': parts.pop('tail_half')}
    flags = []
    try:
        a = a_n(d, n)
        mu1, _ = truncated_moments(d, a)
        notes['centering_ratio'] = n * abs(mu1) / a
        parts['a'] = a
    except ConvergenceError:
        flags.append('a_n_unavailable')
    parts.update({
        'x_theorem': opts.multiplier * float(d.isf(1.0 / n)),
        'I': parts['J'] if opts.irv else None,
        'notes': notes,
        'flags': flags,
    })
    return parts


def _stable_parts(d, n, opts):
    _require_regime(d, Regime.STABLE_FINITE_MEAN, Provenance.STABLE_FINITE_MEAN)
    log_n = _need_log(n, Provenance.STABLE_FINITE_MEAN)
    alpha = d.left_index
    beta = -d.tail_index
    if not math.isfinite(beta):
        raise ValueError("prop_9_2 needs a regularly varying right tail")
    if not opts.t > 1.0:
        raise ValueError(f"prop_9_2 needs t > 1, got t={opts.t!r}")
    b = stable_scale(d, n)
    L = (beta - alpha) / (alpha - 1.0) * log_n
    J = opts.t * L ** ((alpha - 1.0) / alpha) * b
    deep = float(d.left_tail(b))
    shallow = float(d.left_tail(b / log_n ** (1.0 / alpha)))
    return {
        'b': b,
        'h': L ** (-1.0 / alpha) * b,
        'J': J,
        'x_theorem': J,
        'notes': {'L': L, 'left_tail_ratio': shallow / (log_n * deep) if deep > 0 else math.inf},
    }


def _infinite_mean_parts(d, n, opts):
    _require_regime(d, Regime.INFINITE_MEAN, Provenance.INFINITE_MEAN)
    beta = -d.tail_index
    if not math.isfinite(beta):
        raise ValueError("prop_9_3 needs a regularly varying right tail")
    eps = 0.5 if opts.eps is None else opts.eps
    if not eps > 0:
        raise ValueError(f"prop_9_3 needs eps > 0, got eps={eps!r}")
    b = left_quantile_scale(d, n)
    return {
        'b': b,
        'h': n ** (1.0 / beta),
        'J': n ** (1.0 / beta + eps),
        'x_theorem': opts.multiplier * b,
        'notes': {'eps': eps},
    }


def _heuristic_parts(d, n, opts):
    J = heuristic_J(d, n)
    return {'b': natural_scale(d, n), 'h': n / J, 'J': J, 'x_theorem': J, 'flags': ['heuristic']}


def _linear_parts(d, n, opts):
    if opts.a is None or not opts.a > 0:
        raise ValueError("corollary_2_1 needs a > 0")
    kappa = opts.kappa
    if kappa is None or not 1.0 < kappa <= 2.0:
        raise ValueError("corollary_2_1 needs kappa in (1, 2]")
    if not d.moment_exists(kappa):
        raise ValueError(f"corollary_2_1 needs a finite moment of order kappa={kappa!r}")
    scale = (n * opts.a) ** (1.0 / kappa)
    x = opts.a * n
    return {
        'b': scale,
        'h': scale,
        'J': x / 2.0,
        'I': x / 2.0,
        'x_theorem': x,
        'notes': {'root_shift_defect': root_shift_defect(d, x, kappa, opts.T)},
    }


_BUILDERS = {
    Provenance.POWER_TAIL: _power_tail_parts,
    Provenance.LOGNORMAL_HAZARD: _lognormal_parts,
    Provenance.WEIBULL_HAZARD: _weibull_parts,
    Provenance.LIGHT_SUBEXP: _light_parts,
    Provenance.BALANCED: _balanced_boundary_parts,
    Provenance.STABLE_FINITE_MEAN: _stable_parts,
    Provenance.INFINITE_MEAN: _infinite_mean_parts,
    Provenance.HEURISTIC: _heuristic_parts,
    Provenance.LINEAR: _linear_parts,
}


def boundary(d, n, provenance, options=None):
    """
    BoundarySet for the walk of ``d`` with n steps.

    ``d`` is a step law already in the units of ``provenance`` (see
    boundary_law()) or a family spec, which is converted here.
    """
    provenance = Provenance(provenance)
    opts = _options(options)
    n = _check_n(n)
    if not isinstance(d, StepDistribution):
        d = boundary_law(d, provenance)

    parts = _BUILDERS[provenance](d, n, opts)
    flags = list(parts.get('flags', []))
    I = parts.get('I')
    if I is None:
        try:
            I = insensitivity_boundary(d, parts['b'], opts.tol_I, opts.T)
        except UnboundedBoundaryError:
            logger.warning("%s n=%d: no insensitivity boundary at tol %r", provenance, n, opts.tol_I)
            flags.append('insensitivity_unbounded')
            I = None
    x_n = parts['J'] + I if I is not None else parts['J']

    out = BoundarySet(
        n=n, b_n=parts['b'], h_n=parts['h'], J_n=parts['J'], x_n=x_n,
        provenance=provenance, a_n=parts.get('a'), I_n=I,
        x_theorem=parts.get('x_theorem'), flags=tuple(flags),
        notes=dict(parts.get('notes', {})), options=opts.as_dict(),
        indices=parts.get('indices') or {'declared': d.matuszewska_indices(opts.T)},
    )
    logger.info(
        "boundary %s n=%d: b=%.6g h=%.6g J=%.6g x=%.6g", provenance, n, out.b_n, out.h_n, out.J_n, out.x_n,
    )
    return out
