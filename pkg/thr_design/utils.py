import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from thr_design.errors import InputFileError, ValidationError


def mesh(x, y):
    """Grid of (x, y) pairs with x along the first axis."""
    x_grid, y_grid = np.meshgrid(x, y)
    return x_grid.T, y_grid.T


def scale_axis(span, n):
    """n evenly spaced relative scales in [1 - span, 1 + span]. n must be
    odd so the unperturbed value sits in the centre."""
    if n < 1 or n % 2 == 0:
        raise ValidationError(f"grid size must be a positive odd number, got {n}")
    return np.linspace(1. - span, 1. + span, n)


def child_rng(seed, counter):
    """Independent random stream number `counter` derived from `seed`."""
    return np.random.default_rng([int(seed), int(counter)])


def thread_map(func, items, threads=1):
    """Map func over items, results in input order. Uses a thread pool
    when threads > 1."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def read_keyvalue(path):
    """Read a key/value file into a top-level dict and an ordered list of
    sections.

    Format: '#' starts a comment, 'key = value' assigns a float,
    '[name]' opens a new section. Sections may repeat; their order is kept.

    Returns:
        top: dict[str, float]
        sections: list[tuple[str, dict[str, float], int]]
            (section name, values, line number of the header)
    """
    top = {}
    sections = []
    current = top
    try:
        with open(path, 'r') as file:
            lines = file.read().split('\n')
    except OSError as e:
        raise InputFileError(path, None, f"cannot read file ({e.strerror})")

    for lineno, raw in enumerate(lines, start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if line.startswith('['):
            if not line.endswith(']') or len(line) < 3:
                raise InputFileError(path, lineno, f"malformed section header '{raw.strip()}'")
            current = {}
            sections.append((line[1:-1].strip(), current, lineno))
            continue
        if '=' not in line:
            raise InputFileError(path, lineno, f"expected 'key = value', got '{raw.strip()}'")
        key, value = (s.strip() for s in line.split('=', 1))
        if not key:
            raise InputFileError(path, lineno, "missing key")
        if key in current:
            raise InputFileError(path, lineno, f"duplicate key '{key}'")
        try:
            current[key] = float(value)
        except ValueError:
            raise InputFileError(path, lineno, f"value of '{key}' is not a number: '{value}'")
    return top, sections


def jsonable(obj):
    """Convert numpy scalars/arrays and tuples into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None if np.isnan(obj) else ('inf' if obj > 0 else '-inf')
    return obj


def write_json(obj, path):
    """Write a report as indented, key-sorted JSON."""
    with open(path, 'w') as file:
        json.dump(jsonable(obj), file, indent=2, sort_keys=True)
        file.write('\n')


def write_table(df, path, fmt='csv'):
    """Write a table as CSV, or as JSON mapping each column to its values.
    Both carry the same shortest round-trip decimals."""
    if fmt == 'csv':
        df.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    elif fmt == 'json':
        write_json({str(c): df[c].tolist() for c in df.columns}, path)
    else:
        raise ValueError(f"unknown table format '{fmt}'")
