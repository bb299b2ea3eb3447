"""
Monte Carlo estimators for tail and window probabilities of random walks.

Samples are produced in fixed blocks of ``LAB['MC_CHUNK']`` draws, each
block from its own counter-based generator, and the block statistics are
merged in block order. The result therefore depends on the seed only,
never on the number of worker threads.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from dist.services import tilt_truncate
from main.exceptions import NumericalGuardError
from main.streams import block_generator, block_sizes
from main.utils import lab_setting

from .types import BlockStats, EstimatorMethod, EstimatorResult

logger = logging.getLogger(__name__)

MIN_SAMPLES = 100
EXP_LIMIT = 709.0

# stream ids, one per estimator
PLAIN_STREAM = 1
CMC_STREAM = 2
TILTED_STREAM = 3


def _check_target(n, T, samples):
    if int(n) < 1:
        raise ValueError("n must be a positive integer")
    if not T > 0:
        raise ValueError("window length T must be positive")
    if int(samples) < MIN_SAMPLES:
        raise ValueError(f"at least {MIN_SAMPLES} samples are needed, got {samples}")


def _in_window(s, x, T):
    if math.isinf(T):
        return s > x
    return (s > x) & (s <= x + T)


def run_blocks(block_fn, samples, threads=None):
    """
    Apply ``block_fn(block, size)`` to every block and merge the returned
    BlockStats in block order.
    """
    sizes = block_sizes(samples, lab_setting('MC_CHUNK'))
    threads = int(threads or lab_setting('THREADS'))
    if threads <= 1 or len(sizes) == 1:
        stats = [block_fn(block, size) for block, size in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=min(threads, len(sizes))) as pool:
            stats = list(pool.map(block_fn, range(len(sizes)), sizes))
    total = BlockStats(0, 0.0, 0.0)
    for part in stats:
        total = total.merge(part)
    return total


def _target(n, x, T, **extra):
    return {'n': int(n), 'x': float(x), 'T': float(T), **extra}


# ------------------------------------------------------------------ #
#  crude
# ------------------------------------------------------------------ #
def plain_tail(d, n, x, T=math.inf, samples=10_000, seed=None, threads=None):
    """Frequency of {x < S_n ≤ x + T} over simulated walks, with the binomial standard error."""
    _check_target(n, T, samples)
    seed = lab_setting('SEED') if seed is None else int(seed)
    n = int(n)

    def block(index, size):
        rng = block_generator(seed, PLAIN_STREAM, index)
        walks = d.draw(rng, size * n).reshape(size, n).sum(axis=1)
        return BlockStats.of(_in_window(walks, x, T).astype(float))

    stats = run_blocks(block, samples, threads)
    p = stats.mean
    std_error = math.sqrt(max(p * (1.0 - p), 0.0) / stats.count)
    logger.debug("plain n=%d x=%.6g: %.6g ± %.3g", n, x, p, std_error)
    return EstimatorResult(p, std_error, stats.count, EstimatorMethod.PLAIN, seed, _target(n, x, T))


# ------------------------------------------------------------------ #
#  conditional Monte Carlo on the largest step
# ------------------------------------------------------------------ #
def cmc_values(d, others, x):
    """
    Conditional probabilities of {S_n > x} given the other n - 1 steps.

    ``others`` has one row per sample. Position i carries the maximum when
    it beats every step before it and ties or beats every step after it;
    summing over positions keeps the estimator unbiased when atoms can tie.
    For laws without atoms every term equals F̄(max(M, x - S)).
    """
    others = np.asarray(others, dtype=float)
    rows, m = others.shape
    rest = others.sum(axis=1)
    if not d.is_lattice:
        top = others.max(axis=1) if m else np.full(rows, -np.inf)
        return (m + 1) * np.asarray(d.tail(np.maximum(x - rest, top)), dtype=float)
    lows = np.full((rows, 1), -np.inf)
    before = np.concatenate([lows, np.maximum.accumulate(others, axis=1)], axis=1)
    after = np.concatenate([np.maximum.accumulate(others[:, ::-1], axis=1)[:, ::-1], lows], axis=1)
    need = np.maximum((x - rest)[:, None], before)
    strict = np.asarray(d.tail(need), dtype=float)
    with np.errstate(invalid='ignore'):
        closed = np.asarray(d.tail_closed(np.where(np.isfinite(after), after, 0.0)), dtype=float)
    return np.where(need >= after, strict, closed).sum(axis=1)


def big_jump_cmc(d, n, x, T=math.inf, samples=10_000, seed=None, threads=None):
    """
    Conditional Monte Carlo estimate of P{x < S_n ≤ x + T}.

    A finite window is the difference of the two tail estimators evaluated
    on the same draws of the other steps.
    """
    _check_target(n, T, samples)
    seed = lab_setting('SEED') if seed is None else int(seed)
    n = int(n)

    def block(index, size):
        rng = block_generator(seed, CMC_STREAM, index)
        others = d.draw(rng, size * (n - 1)).reshape(size, n - 1)
        values = cmc_values(d, others, x)
        if not math.isinf(T):
            values = values - cmc_values(d, others, x + T)
        return BlockStats.of(values)

    stats = run_blocks(block, samples, threads)
    logger.debug("cmc n=%d x=%.6g: %.6g ± %.3g", n, x, stats.mean, stats.std_error)
    return EstimatorResult(
        max(stats.mean, 0.0), stats.std_error, stats.count, EstimatorMethod.BIG_JUMP_CMC, seed, _target(n, x, T),
    )


# ------------------------------------------------------------------ #
#  tilted restricted walk
# ------------------------------------------------------------------ #
def tilted_bound_exponent(d, h, n, x):
    """log of the bound P{S_n > x, all steps ≤ h} ≤ e^(-x/h) φ^n."""
    return int(n) * tilt_truncate(d, h).log_phi - x / h


def tilted_restricted(d, h, n, x, T=math.inf, samples=10_000, seed=None, threads=None):
    """
    Importance-sampling estimate of P{x < S_n ≤ x + T, every step ≤ h}.

    Steps are drawn from the tilted truncated law and weighted by
    φ^n e^(-S_n/h).
    """
    _check_target(n, T, samples)
    if not h > 0:
        raise ValueError("truncation level h must be positive")
    seed = lab_setting('SEED') if seed is None else int(seed)
    n = int(n)
    tilt = tilt_truncate(d, h)
    log_phi_n = n * tilt.log_phi

    def block(index, size):
        rng = block_generator(seed, TILTED_STREAM, index)
        walks = tilt.draw(rng, size * n).reshape(size, n).sum(axis=1)
        log_w = log_phi_n - walks / h
        top = float(log_w.max())
        if top > EXP_LIMIT:
            logger.warning("tilted weight overflows: log weight %.6g (h=%r, n=%d)", top, h, n)
            raise NumericalGuardError(f"tilted importance weight e^{top:.6g} overflows")
        weights = np.where(_in_window(walks, x, T), np.exp(log_w), 0.0)
        return BlockStats.of(weights)

    stats = run_blocks(block, samples, threads)
    logger.debug("tilted n=%d h=%.6g x=%.6g: %.6g ± %.3g", n, h, x, stats.mean, stats.std_error)
    return EstimatorResult(
        stats.mean, stats.std_error, stats.count, EstimatorMethod.TILTED_RESTRICTED, seed,
        _target(n, x, T, h=float(h)),
    )


def estimate(method, d, n, x, T=math.inf, samples=10_000, seed=None, threads=None, h=None):
    """Dispatch to one of the estimators by name."""
    method = EstimatorMethod(method)
    if method == EstimatorMethod.PLAIN:
        return plain_tail(d, n, x, T, samples, seed, threads)
    if method == EstimatorMethod.BIG_JUMP_CMC:
        return big_jump_cmc(d, n, x, T, samples, seed, threads)
    if h is None:
        raise ValueError("the tilted estimator needs a truncation level h")
    return tilted_restricted(d, h, n, x, T, samples, seed, threads)
