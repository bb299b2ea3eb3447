"""
Experiment configuration files.

A config file is flat ``key = value`` text with dotted sections, read with
python-dotenv (variable interpolation off). See docs/config.md for the
schema. Every problem is reported against the dotted key it came from.
"""

import math
from io import StringIO
from pathlib import Path

from django.core.exceptions import ValidationError
from dotenv import dotenv_values

from dist.services import make_family
from lattice.pmf import GridSpec, Placement, SpillMode
from lattice.services import check_window
from main.utils import lab_setting, parse_float
from mc.types import EstimatorMethod
from seqs.types import BoundaryOptions, Provenance

from .types import ExperimentConfig, ExperimentMethod, XMode

SECTION_KEYS = {
    'experiment': {'n_grid', 'x_grid', 'x_mode', 'x_extra', 'T', 'method'},
    'boundary': {'provenance'},
    'grid': {'delta', 'lo', 'hi', 'placement', 'spill_mode'},
    'mc': {'samples', 'seed', 'estimator'},
    'check': {
        'sup_max', 'sup_from', 'sup_to', 'sup_decreasing', 'ratio_at', 'ratio_low', 'ratio_high',
        'deviation_x', 'min_deviation', 'max_bracket_width', 'mc_coverage',
    },
}
# family.* and options.* keys are checked by the family factory and BoundaryOptions
OPEN_SECTIONS = ('family', 'options')

CHECK_BOOLS = {'sup_decreasing'}


def _split_list(text):
    return [item for item in str(text).replace(';', ',').split(',') if item.strip()]


def read_config_values(path=None, text=None):
    """Raw key/value pairs of a config file (or of config text)."""
    if text is not None:
        return dict(dotenv_values(stream=StringIO(text), interpolate=False))
    path = Path(path)
    if not path.is_file():
        raise ValidationError({'config': [f"config file {path} does not exist"]})
    return dict(dotenv_values(path, interpolate=False))


class _Errors:
    def __init__(self):
        self.by_key = {}

    def add(self, key, message):
        self.by_key.setdefault(key, []).append(str(message))

    def parse(self, key, parser, value, default=None):
        if value is None or str(value).strip() == '':
            return default
        try:
            return parser(value)
        except (TypeError, ValueError) as exc:
            self.add(key, exc)
            return default


def parse_config(values, name='experiment', seed=None):
    """ExperimentConfig from raw key/value pairs; raises ValidationError keyed by field."""
    errors = _Errors()
    values = {str(k).strip(): ('' if v is None else str(v).strip()) for k, v in dict(values).items()}
    sections = {}
    for key, value in values.items():
        section, _, field_name = key.partition('.')
        if not field_name:
            errors.add(key, "keys take the form section.field")
            continue
        if section in OPEN_SECTIONS or field_name in SECTION_KEYS.get(section, ()):
            sections.setdefault(section, {})[field_name] = value
        else:
            errors.add(key, "unknown config key")

    experiment = sections.get('experiment', {})
    grid_values = sections.get('grid', {})
    mc_values = sections.get('mc', {})

    family = dict(sections.get('family', {}))
    family_name = family.pop('name', '')
    if not family_name:
        errors.add('family.name', "this field is required")
    else:
        try:
            make_family(family_name, family)
        except ValueError as exc:
            errors.add('family.name', exc)
    family_spec = {'name': family_name, 'params': family}

    provenance = errors.parse('boundary.provenance', Provenance, sections.get('boundary', {}).get('provenance'))
    if provenance is None and 'boundary.provenance' not in errors.by_key:
        errors.add('boundary.provenance', "this field is required")

    n_grid = errors.parse('experiment.n_grid', _parse_n_grid, experiment.get('n_grid'), ())
    if not n_grid and 'experiment.n_grid' not in errors.by_key:
        errors.add('experiment.n_grid', "this field is required")
    x_grid = errors.parse('experiment.x_grid', _parse_positive_list, experiment.get('x_grid'), ())
    x_extra = errors.parse('experiment.x_extra', _parse_float_list, experiment.get('x_extra'), ())
    if not x_grid and not x_extra and 'experiment.x_grid' not in errors.by_key:
        errors.add('experiment.x_grid', "this field is required")
    x_mode = errors.parse('experiment.x_mode', XMode, experiment.get('x_mode'), XMode.MULTIPLE)
    T = errors.parse('experiment.T', _parse_window, experiment.get('T'), math.inf)
    method = errors.parse('experiment.method', ExperimentMethod, experiment.get('method'), ExperimentMethod.ORACLE)

    grid = None
    if grid_values.keys() & {'delta', 'lo', 'hi'}:
        delta = errors.parse('grid.delta', parse_float, grid_values.get('delta'))
        lo = errors.parse('grid.lo', parse_float, grid_values.get('lo'))
        hi = errors.parse('grid.hi', parse_float, grid_values.get('hi'))
        placement = errors.parse('grid.placement', Placement, grid_values.get('placement'), Placement.UPPER)
        for key, value in (('grid.delta', delta), ('grid.lo', lo), ('grid.hi', hi)):
            if value is None and key not in errors.by_key:
                errors.add(key, "delta, lo and hi are required together")
        if None not in (delta, lo, hi):
            try:
                grid = GridSpec(delta, lo, hi, placement)
            except ValueError as exc:
                errors.add('grid.delta', exc)
    spill_mode = errors.parse(
        'grid.spill_mode', SpillMode, grid_values.get('spill_mode'), SpillMode(lab_setting('SPILL_MODE')),
    )

    if grid is not None and T is not None:
        try:
            check_window(T, grid.delta)
        except ValueError as exc:
            errors.add('experiment.T', exc)
    if method in (ExperimentMethod.ORACLE, ExperimentMethod.BOTH) and grid is None and family_name:
        try:
            if not make_family(family_name, family).is_lattice:
                errors.add('grid.delta', f"the lattice oracle needs grid.delta, grid.lo and grid.hi for {family_name}")
        except ValueError:
            pass

    samples = errors.parse('mc.samples', _parse_samples, mc_values.get('samples'), 10_000)
    file_seed = errors.parse('mc.seed', int, mc_values.get('seed'))
    estimator = errors.parse('mc.estimator', EstimatorMethod, mc_values.get('estimator'), EstimatorMethod.BIG_JUMP_CMC)
    if estimator == EstimatorMethod.TILTED_RESTRICTED:
        errors.add('mc.estimator', "the tilted estimator targets the restricted walk; use plain or big_jump_cmc")

    option_values = dict(sections.get('options', {}))
    option_values.setdefault('T', '' if T is None else repr(T))
    try:
        options = BoundaryOptions.from_mapping(option_values)
    except ValueError as exc:
        errors.add('options', exc)
        options = None

    checks = {}
    for key, value in sections.get('check', {}).items():
        if key in CHECK_BOOLS:
            checks[key] = value.lower() in ('true', '1', 'yes')
        else:
            parsed = errors.parse(f'check.{key}', parse_float, value)
            if parsed is not None:
                checks[key] = parsed

    if errors.by_key:
        raise ValidationError(errors.by_key)

    if seed is None:
        seed = file_seed if file_seed is not None else lab_setting('SEED')
    return ExperimentConfig(
        family=family_spec, provenance=provenance, n_grid=n_grid, x_grid=x_grid, x_mode=x_mode,
        x_extra=x_extra, T=T, method=method, grid=grid, spill_mode=spill_mode, samples=samples,
        seed=int(seed), estimator=estimator, options=options, checks=checks,
        source=dict(sorted(values.items())), name=name,
    )


def load_config(path, seed=None):
    path = Path(path)
    return parse_config(read_config_values(path), name=path.stem, seed=seed)


def _parse_n_grid(text):
    ns = []
    for item in _split_list(text):
        value = float(item)
        if value != int(value) or value < 1:
            raise ValueError(f"n={item.strip()} is not a positive integer")
        ns.append(int(value))
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_grid must be strictly increasing")
    return tuple(ns)


def _parse_float_list(text):
    return tuple(parse_float(item) for item in _split_list(text))


def _parse_positive_list(text):
    values = _parse_float_list(text)
    if any(not (v > 0 and math.isfinite(v)) for v in values):
        raise ValueError("x_grid values must be positive and finite")
    return values


def _parse_window(text):
    T = parse_float(text)
    if not T > 0:
        raise ValueError("T must be positive or inf")
    return T


def _parse_samples(text):
    samples = int(float(text))
    if samples < 100:
        raise ValueError("at least 100 samples are needed")
    return samples
