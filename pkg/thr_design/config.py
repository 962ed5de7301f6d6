"""Run configuration: built-in defaults, presets, an optional JSON config
file and command-line flags, in increasing order of precedence."""
import json
import logging

from thr_design.errors import ValidationError

logger = logging.getLogger(__name__)

DEFAULTS = {
    'seed': 0,
    'threads': 1,
    'output_dir': '.',
    'format': 'csv',
    'constants_file': None,
    'cross_section': 0.01,
    'grid_start': 101.,
    'grid_step': 1.,
    'grid_count': 500,
    'threshold': 10.,
    # gen-data
    'band_width': 50.,
    'band_min': 100.,
    'band_max': 600.,
    'samples_per_group': 5000,
    'max_attempts_per_group': 200000,
    'chunk_size': 1024,
    # train
    'batch_size': 256,
    'max_epochs': 500,
    'patience': 20,
    'dropout': 0.1,
    'learning_rate': 1e-3,
    'hidden': [450, 250, 220],
    'val_fraction': 0.1,
    'test_fraction': 0.1,
    # design
    'candidates': 100,
    'spacing': 0.1,
    'span': 0.1,
    'map_size': 21,
    'top': 10,
    # optimize
    'population': 50,
    'generations': 50,
    'elite_candidates': None,
    'tournament_size': 3,
    'crossover_prob': 0.9,
    'mutation_prob': 0.1,
    'mutation_scale': 0.05,
    'elitism': 2,
    'penalty': 1000.,
    # check
    'samples': None,
}

PRESETS = {
    'desk': {
        'samples_per_group': 500,
        'max_attempts_per_group': 20000,
        'max_epochs': 200,
        'patience': 20,
    },
    'paper': {
        'samples_per_group': 5000,
        'max_attempts_per_group': 200000,
        'max_epochs': 500,
        'patience': 20,
    },
}


def load_config(path: str) -> dict:
    """JSON object whose keys are long flag names with dashes replaced by
    underscores."""
    if path is None:
        return {}
    try:
        with open(path, 'r') as file:
            values = json.load(file)
    except OSError as e:
        raise ValidationError(f"cannot read config file {path}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}:{e.lineno}: invalid JSON ({e.msg})")
    if not isinstance(values, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    unknown = set(values) - set(DEFAULTS) - {'preset'}
    if unknown:
        raise ValidationError(f"{path}: unknown key(s) {sorted(unknown)}")
    return values


def resolve(flags: dict, keys, config: dict = None, preset: str = None) -> dict:
    """Resolved value of every key: the flag when given (not None), else
    the config file, else the preset, else the built-in default."""
    config = config or {}
    preset = preset or config.get('preset')
    if preset is not None and preset not in PRESETS:
        raise ValidationError(f"unknown preset '{preset}', choose from {sorted(PRESETS)}")
    base = dict(DEFAULTS, **PRESETS.get(preset, {}))
    resolved = {}
    for key in keys:
        value = flags.get(key)
        if value is None:
            value = config.get(key, base[key])
        resolved[key] = value
    if preset is not None:
        resolved['preset'] = preset
    return resolved
