"""
Experiment harness: boundaries from seqs, probabilities from the lattice
oracle and/or Monte Carlo, and reproducible CSV / JSON reports.
"""

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from dist.services import StandardizeMode, from_spec, standardize
from karamata import services as karamata
from karamata.types import TailFunction
from lattice import cache
from lattice import services as lattice
from lattice.pmf import GridSpec, SpillMode
from main.exceptions import NumericalGuardError
from main.utils import canonical_json, geometric_grid, json_float, lab_setting, stable_hash
from mc import services as mc
from seqs import services as seqs

from .types import (
    CSV_COLUMNS, CheckResult, Diagnosis, ExperimentReport, PSource, ReportRow, SummaryRow, XMode,
)

logger = logging.getLogger(__name__)

# |estimate - oracle| ≤ COVERAGE_Z · std_error counts as agreement
COVERAGE_Z = 3.29
MATCH_RTOL = 1e-9


# ------------------------------------------------------------------ #
#  running
# ------------------------------------------------------------------ #
def config_hash(config):
    return stable_hash(config.echo())


def _levels(config, boundary):
    if config.x_mode == XMode.MULTIPLE:
        xs = [m * boundary.x_n for m in config.x_grid]
    else:
        xs = list(config.x_grid)
    return sorted(set(xs) | set(config.x_extra))


def _walk_law(step_law, config, n, x_max):
    query_max = x_max if math.isinf(config.T) else x_max + config.T
    key = None
    if config.grid is not None:
        key = cache.cache_key(
            family=step_law.spec_hash, grid=config.grid.as_dict(), n=n, query_max=query_max, restriction='none',
        )
    return lattice.nfold(lattice.lattice_law(step_law, config.grid), n, query_max=query_max, cache_key=key)


def _ratio(p_value, n_window_mass):
    if n_window_mass > 0:
        return p_value / n_window_mass
    return math.nan if p_value == 0 else math.inf


def _oracle_row(config, d, walk, n, x, x_over):
    n_window_mass = n * float(d.window_mass(x, config.T))
    value = lattice.resolve(walk.bracket(x, config.T), config.spill_mode)
    if config.spill_mode == SpillMode.BOUND:
        return ReportRow(
            n, x, x_over, value.mid, PSource.ORACLE_BOUND, n_window_mass, _ratio(value.mid, n_window_mass),
            p_lower=value.lower, p_upper=value.upper,
        )
    return ReportRow(n, x, x_over, value, PSource.ORACLE, n_window_mass, _ratio(value, n_window_mass))


def _mc_row(config, d, n, x, x_over):
    n_window_mass = n * float(d.window_mass(x, config.T))
    result = mc.estimate(config.estimator, d, n, x, config.T, config.samples, config.seed, threads=1)
    return ReportRow(
        n, x, x_over, result.estimate, PSource.MC, n_window_mass, _ratio(result.estimate, n_window_mass),
        std_error=result.std_error,
    )


def summarize(rows, sup_from=1.0, sup_to=math.inf):
    """Per (n, source): sup of |ratio - 1| over rows with sup_from ≤ x/x_n ≤ sup_to."""
    groups = {}
    lo, hi = sup_from * (1.0 - MATCH_RTOL), sup_to * (1.0 + MATCH_RTOL)
    for row in rows:
        if lo <= row.x_over_boundary <= hi and not math.isnan(row.ratio):
            groups.setdefault((row.n, str(row.p_source)), []).append(abs(row.ratio - 1.0))
    return tuple(
        SummaryRow(n, PSource(source), max(devs), len(devs)) for (n, source), devs in sorted(groups.items())
    )


def run_experiment(config, threads=None):
    """Sweep the (n, x) cells of ``config``; the report depends on config and seed only."""
    threads = max(1, int(threads or lab_setting('THREADS')))
    d = seqs.boundary_law(config.family, config.provenance)
    logger.info("experiment %s: %s with %d n values", config.name, d, len(config.n_grid))

    with ThreadPoolExecutor(max_workers=threads) as pool:
        boundaries = list(pool.map(
            lambda n: seqs.boundary(d, n, config.provenance, config.options), config.n_grid,
        ))
        levels = {b.n: _levels(config, b) for b in boundaries}
        cells = [(b.n, x, x / b.x_n) for b in boundaries for x in levels[b.n]]

        walks = {}
        if config.uses_oracle:
            laws = pool.map(lambda n: _walk_law(d, config, n, max(levels[n])), config.n_grid)
            walks = dict(zip(config.n_grid, laws))
            rows = list(pool.map(lambda cell: _oracle_row(config, d, walks[cell[0]], *cell), cells))
        else:
            rows = []
        if config.uses_mc:
            rows += list(pool.map(lambda cell: _mc_row(config, d, *cell), cells))

    source_order = {PSource.ORACLE: 0, PSource.ORACLE_BOUND: 0, PSource.MC: 1}
    rows.sort(key=lambda row: (row.n, row.x, source_order[row.p_source]))
    report = ExperimentReport(
        name=config.name,
        rows=tuple(rows),
        summary=summarize(rows),
        boundaries=tuple(boundaries),
        config=config.echo(),
        config_hash=config_hash(config),
    )
    logger.info("experiment %s: %d rows", config.name, len(rows))
    return report


# ------------------------------------------------------------------ #
#  acceptance checks
# ------------------------------------------------------------------ #
def _primary_rows(rows):
    oracle = [row for row in rows if row.p_source != PSource.MC]
    return oracle or list(rows)


def _close(a, b):
    return abs(a - b) <= MATCH_RTOL * max(1.0, abs(b))


def evaluate_checks(report, checks):
    """CheckResults for the ``check.*`` keys of a config."""
    rows = _primary_rows(report.rows)
    ns = sorted({row.n for row in rows})
    results = []
    sups = {
        s.n: s.sup_deviation
        for s in summarize(rows, checks.get('sup_from', 1.0), checks.get('sup_to', math.inf))
    }

    if 'sup_max' in checks:
        last = ns[-1]
        value = sups.get(last, math.nan)
        results.append(CheckResult(
            'sup_max', value <= checks['sup_max'], f"sup |ratio - 1| at n={last} is {value!r}",
        ))
    if checks.get('sup_decreasing'):
        series = [sups.get(n, math.nan) for n in ns]
        ok = all(b < a for a, b in zip(series, series[1:]))
        results.append(CheckResult('sup_decreasing', ok, f"sup series {series!r}"))
    if 'ratio_at' in checks:
        low, high = checks.get('ratio_low', -math.inf), checks.get('ratio_high', math.inf)
        hits = [row for row in rows if _close(row.x_over_boundary, checks['ratio_at'])]
        ok = bool(hits)
        for row in hits:
            r_lo, r_hi = row.ratio_range()
            ok = ok and r_lo <= high and r_hi >= low
        detail = ', '.join(f"n={row.n}: {row.ratio_range()!r}" for row in hits) or "no row at that multiple"
        results.append(CheckResult('ratio_at', ok, detail))
    if 'deviation_x' in checks:
        last = ns[-1]
        hits = [row for row in rows if row.n == last and _close(row.x, checks['deviation_x'])]
        minimum = checks.get('min_deviation', 0.0)
        ok = bool(hits) and all(abs(row.ratio - 1.0) >= minimum for row in hits)
        detail = ', '.join(f"|ratio - 1| = {abs(row.ratio - 1.0)!r}" for row in hits) or "no row at that x"
        results.append(CheckResult('min_deviation', ok, f"n={last}: {detail}"))
    if 'max_bracket_width' in checks:
        widths = [
            (row.p_upper - row.p_lower) / row.p_value
            for row in rows if row.p_lower is not None and row.p_value > 0
        ]
        worst = max(widths, default=0.0)
        results.append(CheckResult(
            'max_bracket_width', worst <= checks['max_bracket_width'], f"widest relative bracket {worst!r}",
        ))
    if 'mc_coverage' in checks:
        oracle = {(row.n, row.x): row.p_value for row in report.rows if row.p_source != PSource.MC}
        pairs = [
            abs(row.p_value - oracle[(row.n, row.x)]) <= COVERAGE_Z * row.std_error
            for row in report.rows if row.p_source == PSource.MC and (row.n, row.x) in oracle
        ]
        share = sum(pairs) / len(pairs) if pairs else math.nan
        results.append(CheckResult(
            'mc_coverage', bool(pairs) and share >= checks['mc_coverage'], f"{sum(pairs)}/{len(pairs)} rows covered",
        ))
    if not results:
        results.append(CheckResult('configured', True, "no check.* keys in the config"))
    return tuple(results)


def with_checks(report, checks):
    return ExperimentReport(
        report.name, report.rows, report.summary, report.boundaries, report.config, report.config_hash,
        evaluate_checks(report, checks),
    )


# ------------------------------------------------------------------ #
#  output
# ------------------------------------------------------------------ #
def report_csv(report):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        writer.writerow(row.csv_fields())
    return buffer.getvalue()


def emit(report, fmt, out_dir=None):
    """Write the report as ``<name>.csv`` or ``<name>.json`` and return the path."""
    out_dir = Path(out_dir or lab_setting('OUT_DIR'))
    out_dir.mkdir(parents=True, exist_ok=True)
    if fmt == 'csv':
        text = report_csv(report)
    elif fmt == 'json':
        text = report.to_json() + '\n'
    else:
        raise ValueError(f"unknown report format '{fmt}'")
    path = out_dir / f"{report.name}.{fmt}"
    path.write_text(text, encoding='utf-8')
    logger.info("wrote %s", path)
    return path


# ------------------------------------------------------------------ #
#  one-off queries
# ------------------------------------------------------------------ #
def step_law(spec, mode=StandardizeMode.RAW):
    return standardize(from_spec(spec), mode)


def oracle_query(d, n, x, T=math.inf, grid=None, mode=None):
    """Exact P{S_n ∈ x + Δ} next to n·F(x + Δ)."""
    mode = SpillMode(mode or lab_setting('SPILL_MODE'))
    if grid is not None:
        lattice.check_window(T, grid.delta)
    walk = lattice.nfold(lattice.lattice_law(d, grid), n, query_max=x if math.isinf(T) else x + T)
    bracket = walk.bracket(x, T)
    value = lattice.resolve(bracket, mode)
    p_value = value.mid if mode == SpillMode.BOUND else value
    n_window_mass = n * float(d.window_mass(x, T))
    return {
        'n': int(n), 'x': x, 'T': json_float(T),
        'p_value': p_value, 'p_lower': bracket.lower, 'p_upper': bracket.upper,
        'n_window_mass': n_window_mass, 'ratio': json_float(_ratio(p_value, n_window_mass)),
    }


# ------------------------------------------------------------------ #
#  diagnostics
# ------------------------------------------------------------------ #
DIAGNOSE_NS = (10, 30, 100)
LONG_TAIL_LIMIT = 0.05


def _diagnostic_grid(d, delta=0.05, max_cells=2 ** 16):
    lo = float(d.isf(1.0 - 1e-9))
    lo = math.floor(max(lo, d.domain_low) / delta) * delta - delta
    hi = min(float(d.isf(1e-9)), lo + max_cells * delta)
    return GridSpec(delta, lo, max(hi, lo + 100 * delta))


def diagnose(spec):
    """Regular-variation and truncation diagnostics for one family."""
    d = from_spec(spec)
    traces, verdicts, notes = {}, [], []

    tail = TailFunction.from_distribution(d)
    if tail.compact_support:
        notes.append(f"{d.family} has bounded support; index estimates are -inf")
    estimate = karamata.matuszewska(tail)
    declared = d.matuszewska_indices(math.inf)
    indices = {'estimated': (estimate.upper, estimate.lower), 'declared': tuple(declared)}
    verdicts.append(f"matuszewska indices: estimated ({estimate.upper:.4g}, {estimate.lower:.4g}), "
                    f"declared ({declared[0]:.4g}, {declared[1]:.4g})")

    start = max(d.domain_low if math.isfinite(d.domain_low) else 0.0, 1.0) * 10.0
    xs = geometric_grid(start, start * 1e5, 4)
    try:
        rows = karamata.long_tail_trace(d, xs)
    except ValueError as exc:
        notes.append(f"long-tail trace stopped: {exc}")
    else:
        traces['long_tail'] = (('x', 'defect'), rows)
        last = rows[-1][1]
        verdicts.append(
            f"long-tailed (defect {last:.3g} at x={rows[-1][0]:.4g})" if last < LONG_TAIL_LIMIT
            else f"not long-tailed (defect {last:.4g} at x={rows[-1][0]:.4g})"
        )

    certificate = karamata.sd_sufficient(d)
    verdicts.append(f"sd_sufficient: {certificate.verdict} ({certificate.text})")

    if d.moment_exists(2):
        law = standardize(d, StandardizeMode.UNIT)
        grid = _diagnostic_grid(law)
        try:
            rows = seqs.truncation_trace(
                law, DIAGNOSE_NS, h_of=lambda n: math.sqrt(n * math.log(n)), grid=grid,
            )
        except (NumericalGuardError, ValueError) as exc:
            notes.append(f"truncation trace skipped: {exc}")
        else:
            traces['truncation'] = (('n', 'h', 'n_eps', 'n_eta', 'n_tail_h'), rows)
        try:
            traces['tightness'] = (('K', 'n_two_sided_tail'), seqs.tightness_trace(law, DIAGNOSE_NS[-1]))
        except ValueError as exc:
            notes.append(f"tightness trace skipped: {exc}")
    else:
        notes.append("infinite variance: truncation and tightness traces need a regime boundary")

    ys = np.linspace(2.0, 1.0, 11)[:-1]
    if not tail.compact_support:
        traces['irv'] = (('y', 'sup_ratio', 'inf_ratio'), karamata.irv_trace(tail, ys, 1e6))

    logger.info("diagnosed %s: %s", d, '; '.join(verdicts))
    return Diagnosis(family=dict(spec), traces=traces, verdicts=tuple(verdicts), indices=indices, notes=tuple(notes))


def emit_diagnosis(diagnosis, out_dir=None, stem=None):
    """CSV per trace, verdict text and a JSON index; returns the written paths."""
    out_dir = Path(out_dir or lab_setting('OUT_DIR'))
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or f"diagnose_{diagnosis.family['name']}"
    paths = []
    for name, (header, rows) in sorted(diagnosis.traces.items()):
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
        path = out_dir / f"{stem}_{name}.csv"
        path.write_text(buffer.getvalue(), encoding='utf-8')
        paths.append(path)
    verdict = out_dir / f"{stem}.txt"
    verdict.write_text(diagnosis.verdict_text(), encoding='utf-8')
    index = out_dir / f"{stem}.json"
    index.write_text(canonical_json({
        'family': diagnosis.family,
        'verdicts': list(diagnosis.verdicts),
        'notes': list(diagnosis.notes),
        'indices': {k: [json_float(v) for v in pair] for k, pair in diagnosis.indices.items()},
        'traces': sorted(diagnosis.traces),
    }) + '\n', encoding='utf-8')
    return [*paths, verdict, index]
