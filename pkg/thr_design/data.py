"""Training corpus of (STL spectrum -> circuit parameters) pairs.

Samples are drawn uniformly in the geometry ranges, filtered on EEP ranges
and on the STL at both resonances, and grouped by the frequency bands their
two resonances fall into so that the corpus covers the band evenly.
"""
import logging
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd
from tqdm import tqdm

from thr_design.acoustics import (
    DEFAULT_BAND,
    DEFAULT_CROSS_SECTION,
    FrequencyGrid,
    GeometricParams,
    ParamRanges,
    PhysicalConstants,
    ResonanceReport,
    StlSpectrum,
    gp_to_eep,
    resonant_frequencies,
    stl_spectrum,
)
from thr_design.errors import (
    NoFeasibleGroupsError,
    ResonanceOutOfBandError,
    ThrDesignError,
    ValidationError,
)
from thr_design.param_keys import EEP_ORDER, GP_ORDER, from_cli, to_cli
from thr_design.utils import child_rng, thread_map

logger = logging.getLogger(__name__)

DATASET_FORMAT = 'thr-design-dataset'
DATASET_VERSION = 1
STL_THRESHOLD = 10.
STD_EPSILON = 1e-8

GP_COLUMNS = [f"{k}_cm" for k in GP_ORDER]
RESONANCE_COLUMNS = ['f1', 'f2', 'stl_f1', 'stl_f2']


class RejectReason(str, Enum):
    EEP_OUT_OF_RANGE = 'eep-out-of-range'
    RESONANCE_OUT_OF_BAND = 'resonance-out-of-band'
    STL_BELOW_THRESHOLD = 'stl-below-threshold'


@dataclass(frozen=True)
class FilterResult:
    accepted: bool
    reason: RejectReason = None


@dataclass(frozen=True, eq=False)
class Sample:
    """One accepted resonator with its spectrum and resonances."""
    gp: GeometricParams
    eep: object
    spectrum: StlSpectrum
    resonances: ResonanceReport
    counter: int = -1

    @property
    def f_1(self):
        return self.resonances.frequencies[0]

    @property
    def f_2(self):
        return self.resonances.frequencies[1]

    @property
    def stl_at_f1(self):
        return self.resonances.stl[0]

    @property
    def stl_at_f2(self):
        return self.resonances.stl[1]


@dataclass(frozen=True)
class BinSpec:
    """Resonance-frequency groups. A group is an ordered pair of bands
    (f_1 band, f_2 band) with the f_1 band strictly below the f_2 band."""
    band_width: float = 50.
    band_range: tuple = (100., 600.)
    samples_per_group: int = 5000
    max_attempts_per_group: int = 200000

    def __post_init__(self):
        lo, hi = self.band_range
        if not self.band_width > 0:
            raise ValidationError(f"band width must be positive, got {self.band_width}")
        if not hi > lo:
            raise ValidationError(f"invalid band range {self.band_range}")
        if int(self.samples_per_group) < 1 or int(self.max_attempts_per_group) < 1:
            raise ValidationError("samples_per_group and max_attempts_per_group must be positive")

    @property
    def n_bands(self) -> int:
        lo, hi = self.band_range
        return int(np.ceil((hi - lo) / self.band_width - 1e-9))

    def band_edges(self, i: int) -> tuple:
        lo, hi = self.band_range
        return (lo + i * self.band_width, min(lo + (i + 1) * self.band_width, hi))

    def band_index(self, f: float):
        lo, hi = self.band_range
        if f < lo or f > hi:
            return None
        return min(int((f - lo) // self.band_width), self.n_bands - 1)

    def groups(self) -> list:
        return [(i, j) for i in range(self.n_bands) for j in range(i + 1, self.n_bands)]

    def group_of(self, f1: float, f2: float):
        i, j = self.band_index(f1), self.band_index(f2)
        if i is None or j is None or not i < j:
            return None
        return (i, j)

    def to_dict(self) -> dict:
        return {
            'band_width': self.band_width,
            'band_range': list(self.band_range),
            'samples_per_group': int(self.samples_per_group),
            'max_attempts_per_group': int(self.max_attempts_per_group),
        }


@dataclass(frozen=True)
class DatasetSplit:
    train: float = 0.8
    validation: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self):
        fractions = (self.train, self.validation, self.test)
        if any(f < 0 for f in fractions) or abs(sum(fractions) - 1.) > 1e-9:
            raise ValidationError(f"split fractions must be non-negative and sum to 1, got {fractions}")


def sample_gp(rng: np.random.Generator, ranges: ParamRanges = None) -> GeometricParams:
    """Uniform independent draw of a1, l1, h1, a2, l2, h2 within ranges;
    cavity radii are fixed."""
    ranges = ranges or ParamRanges()
    lo, hi = ranges.genome_bounds()
    return GeometricParams.from_genome(rng.uniform(lo, hi), ranges.cavity_radius)


def filter_sample(eep, report: ResonanceReport or None, ranges: ParamRanges = None,
                  threshold: float = STL_THRESHOLD, band=DEFAULT_BAND) -> FilterResult:
    """Accept iff the EEPs are in range, both resonances are in band and the
    STL at each resonance exceeds threshold. report is None when the
    resonance search found fewer than two resonances."""
    ranges = ranges or ParamRanges()
    if not ranges.eep_contains(eep):
        return FilterResult(False, RejectReason.EEP_OUT_OF_RANGE)
    if report is None or not all(band[0] <= f <= band[1] for f in report.frequencies):
        return FilterResult(False, RejectReason.RESONANCE_OUT_OF_BAND)
    if not all(t > threshold for t in report.stl):
        return FilterResult(False, RejectReason.STL_BELOW_THRESHOLD)
    return FilterResult(True)


def evaluate_candidate(gp, ranges=None, threshold=STL_THRESHOLD, cross_section=DEFAULT_CROSS_SECTION,
                       pc=None, band=DEFAULT_BAND, grid=None, counter=-1):
    """Forward-evaluate a drawn geometry and filter it.

    Returns:
        (FilterResult, Sample or None)
    """
    ranges = ranges or ParamRanges()
    eep = gp_to_eep(gp, pc)
    if not ranges.eep_contains(eep):
        return FilterResult(False, RejectReason.EEP_OUT_OF_RANGE), None
    try:
        report = resonant_frequencies(eep, cross_section, pc, band)
    except ResonanceOutOfBandError:
        report = None
    result = filter_sample(eep, report, ranges, threshold, band)
    if not result.accepted:
        return result, None
    spectrum = stl_spectrum(eep, cross_section, pc, grid)
    return result, Sample(gp=gp, eep=eep, spectrum=spectrum, resonances=report, counter=counter)


def spectrum_columns(grid: FrequencyGrid) -> list:
    return [f"t_{f:g}" for f in grid.frequencies]


def samples_to_frame(samples: list, grid: FrequencyGrid = None) -> pd.DataFrame:
    """One row per sample: geometry (cm), EEPs (SI), resonances, spectrum."""
    grid = grid or FrequencyGrid()
    columns = GP_COLUMNS + EEP_ORDER + RESONANCE_COLUMNS + spectrum_columns(grid)
    rows = []
    for s in samples:
        gp_cm = [to_cli(k, v) for k, v in zip(GP_ORDER, s.gp.genome())]
        rows.append(np.concatenate([gp_cm, s.eep.to_array(),
                                    [s.f_1, s.f_2, s.stl_at_f1, s.stl_at_f2],
                                    s.spectrum.values]))
    values = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    df = pd.DataFrame(values, columns=columns)
    df.attrs['grid'] = grid
    return df


def frame_geometry(df: pd.DataFrame, ranges: ParamRanges = None) -> list:
    """GeometricParams of every row."""
    ranges = ranges or ParamRanges()
    genomes = df[GP_COLUMNS].to_numpy()
    return [GeometricParams.from_genome([from_cli(k, v) for k, v in zip(GP_ORDER, g)],
                                        ranges.cavity_radius) for g in genomes]


def dataset_grid(df: pd.DataFrame) -> FrequencyGrid:
    grid = df.attrs.get('grid')
    if grid is None:
        freqs = np.array([float(c[2:]) for c in df.columns if c.startswith('t_')])
        step = float(freqs[1] - freqs[0]) if freqs.size > 1 else 1.
        grid = FrequencyGrid(float(freqs[0]), step, freqs.size)
    return grid


def dataset_arrays(df: pd.DataFrame) -> (np.ndarray, np.ndarray):
    """(spectra, eeps) arrays of shape (n, grid count) and (n, 6)."""
    grid = dataset_grid(df)
    return df[spectrum_columns(grid)].to_numpy(dtype=float), df[EEP_ORDER].to_numpy(dtype=float)


def generate_dataset(
        bins: BinSpec = None,
        seed: int = 0,
        ranges: ParamRanges = None,
        threshold: float = STL_THRESHOLD,
        cross_section: float = DEFAULT_CROSS_SECTION,
        pc: PhysicalConstants = None,
        grid: FrequencyGrid = None,
        band=DEFAULT_BAND,
        threads: int = 1,
        chunk_size: int = 1024,
    ) -> (pd.DataFrame, dict):
    """Rejection-sample until every group holds samples_per_group samples or
    the attempt budget (max_attempts_per_group x number of groups) is spent.

    Draw k uses its own random stream derived from (seed, k) and draws are
    consumed in counter order, so the result depends only on the seed and
    configuration, not on threads or chunk_size.

    Returns:
        df: pandas.DataFrame
            accepted samples, ordered by group then draw counter
        report: dict
            group fills, rejection histogram, acceptance rate, configuration
    """
    bins = bins or BinSpec()
    ranges = ranges or ParamRanges()
    grid = grid or FrequencyGrid()
    groups = bins.groups()
    if not groups:
        raise NoFeasibleGroupsError(f"binning {bins.to_dict()} defines no groups")
    cap = int(bins.samples_per_group)
    budget = int(bins.max_attempts_per_group) * len(groups)
    members = {g: [] for g in groups}
    histogram = Counter()
    n_full = 0
    attempts = 0

    def draw(k):
        gp = sample_gp(child_rng(seed, k), ranges)
        return evaluate_candidate(gp, ranges, threshold, cross_section, pc, band, grid, counter=k)

    with tqdm(total=cap * len(groups), desc='generating', disable=None) as bar:
        counter = 0
        while counter < budget and n_full < len(groups):
            chunk = range(counter, min(counter + chunk_size, budget))
            for k, (result, sample) in zip(chunk, thread_map(draw, chunk, threads)):
                attempts = k + 1
                if not result.accepted:
                    histogram[result.reason.value] += 1
                    continue
                g = bins.group_of(sample.f_1, sample.f_2)
                if g is None:
                    histogram['outside-groups'] += 1
                    continue
                if len(members[g]) >= cap:
                    histogram['group-full'] += 1
                    continue
                histogram['accepted'] += 1
                members[g].append(sample)
                bar.update(1)
                if len(members[g]) == cap:
                    n_full += 1
                    if n_full == len(groups):
                        break
            counter = chunk.stop

    group_report = []
    for g in groups:
        stl = [0.5 * (s.stl_at_f1 + s.stl_at_f2) for s in members[g]]
        group_report.append({
            'group': list(g),
            'f1_band': list(bins.band_edges(g[0])),
            'f2_band': list(bins.band_edges(g[1])),
            'count': len(members[g]),
            'infeasible': len(members[g]) < cap,
            'mean_stl': float(np.mean(stl)) if stl else None,
        })
    n_feasible = sum(not r['infeasible'] for r in group_report)
    samples = [s for g in groups for s in members[g]]
    report = {
        'format': DATASET_FORMAT,
        'version': DATASET_VERSION,
        'seed': int(seed),
        'bins': bins.to_dict(),
        'ranges': ranges.to_dict(),
        'grid': grid.to_dict(),
        'threshold': threshold,
        'cross_section': cross_section,
        'attempts': attempts,
        'total_samples': len(samples),
        'acceptance_rate': histogram['accepted'] / attempts if attempts else 0.,
        'rejections': dict(sorted(histogram.items())),
        'feasible_groups': n_feasible,
        'groups': group_report,
    }
    logger.info(f"generated {len(samples)} samples from {attempts} draws; "
                f"{n_feasible}/{len(groups)} groups filled")
    unfilled = [r['group'] for r in group_report if r['infeasible']]
    if unfilled:
        logger.warning(f"{len(unfilled)} group(s) not filled within the attempt budget: {unfilled}")
    if n_feasible == 0:
        raise NoFeasibleGroupsError(
            f"no group reached {cap} samples within {attempts} draws; "
            f"check the binning and ranges")
    return samples_to_frame(samples, grid), report


_HEADER = re.compile(r"^# (?P<format>[\w-]+) v(?P<version>\d+) grid=(?P<start>[^,]+),(?P<step>[^,]+),(?P<count>\d+)$")


def write_dataset(df: pd.DataFrame, path: str) -> None:
    """CSV with a versioned header line, full-precision decimals."""
    grid = dataset_grid(df)
    with open(path, 'w', newline='') as file:
        file.write(f"# {DATASET_FORMAT} v{DATASET_VERSION} grid={grid.start!r},{grid.step!r},{grid.count}\n")
        df.to_csv(file, index=False, float_format='%.17g', lineterminator='\n')


def read_dataset(path: str) -> pd.DataFrame:
    """Read a dataset written by write_dataset."""
    try:
        with open(path, 'r') as file:
            header = file.readline().rstrip('\n')
            match = _HEADER.match(header)
            if match is None or match['format'] != DATASET_FORMAT:
                raise ValidationError(f"{path}:1: not a {DATASET_FORMAT} file")
            if int(match['version']) != DATASET_VERSION:
                raise ValidationError(f"{path}:1: dataset version {match['version']} "
                                      f"is not supported (expected {DATASET_VERSION})")
            df = pd.read_csv(file, float_precision='round_trip')
    except OSError as e:
        raise ValidationError(f"cannot read dataset {path}: {e.strerror}")
    grid = FrequencyGrid(float(match['start']), float(match['step']), int(match['count']))
    missing = set(GP_COLUMNS + EEP_ORDER + RESONANCE_COLUMNS + spectrum_columns(grid)) - set(df.columns)
    if missing:
        raise ValidationError(f"{path}: missing column(s) {sorted(missing)[:5]}")
    df.attrs['grid'] = grid
    return df


def read_datasets(paths: list) -> pd.DataFrame:
    """Concatenate several dataset files sharing one grid."""
    frames = [read_dataset(p) for p in paths]
    grids = {dataset_grid(f) for f in frames}
    if len(grids) != 1:
        raise ValidationError(f"datasets use different frequency grids: {grids}")
    df = pd.concat(frames, ignore_index=True)
    df.attrs['grid'] = grids.pop()
    return df


def verify_dataset(df: pd.DataFrame, ranges: ParamRanges = None, threshold: float = STL_THRESHOLD,
                   cross_section: float = DEFAULT_CROSS_SECTION, pc: PhysicalConstants = None,
                   bins: BinSpec = None, rtol: float = 1e-6) -> list:
    """Re-verify every stored sample by independent forward evaluation.

    Returns:
        list of (row index, problem description); empty when all pass
    """
    ranges = ranges or ParamRanges()
    grid = dataset_grid(df)
    spectra, eeps = dataset_arrays(df)
    problems = []
    for idx, (gp, spectrum, eep_stored, row) in enumerate(
            zip(frame_geometry(df, ranges), spectra, eeps, df[RESONANCE_COLUMNS].to_numpy())):
        eep = gp_to_eep(gp, pc)
        if not np.allclose(eep.to_array(), eep_stored, rtol=rtol, atol=0):
            problems.append((idx, 'eep mismatch'))
            continue
        recomputed = stl_spectrum(eep, cross_section, pc, grid).values
        if not np.allclose(recomputed, spectrum, rtol=rtol, atol=1e-9):
            problems.append((idx, 'spectrum mismatch'))
            continue
        try:
            report = resonant_frequencies(eep, cross_section, pc)
        except ThrDesignError:
            problems.append((idx, 'resonances out of band'))
            continue
        if not filter_sample(eep, report, ranges, threshold).accepted:
            problems.append((idx, 'fails the acceptance filter'))
        elif bins is not None and bins.group_of(row[0], row[1]) is None:
            problems.append((idx, 'outside every group'))
    return problems


def split_dataset(df: pd.DataFrame, split: DatasetSplit = None) -> (pd.DataFrame, pd.DataFrame, pd.DataFrame):
    """Seeded shuffle then contiguous partition. Validation and test sizes
    are floored, the remainder goes to training."""
    split = split or DatasetSplit()
    n = len(df)
    if n == 0:
        raise ValidationError("cannot split an empty dataset")
    n_val = int(np.floor(n * split.validation))
    n_test = int(np.floor(n * split.test))
    n_train = n - n_val - n_test
    perm = np.random.default_rng(split.seed).permutation(n)
    parts = (df.iloc[perm[:n_train]], df.iloc[perm[n_train:n_train + n_val]], df.iloc[perm[n_train + n_val:]])
    grid = df.attrs.get('grid')
    if grid is not None:
        for part in parts:
            part.attrs['grid'] = grid
    return parts


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    """z-score statistics of the spectra and range bounds of the EEPs."""
    input_mean: np.ndarray
    input_std: np.ndarray
    output_min: np.ndarray
    output_max: np.ndarray
    grid: FrequencyGrid = FrequencyGrid()

    def normalize_inputs(self, x):
        return (np.asarray(x, dtype=float) - self.input_mean) / self.input_std

    def normalize_outputs(self, y):
        return (np.asarray(y, dtype=float) - self.output_min) / (self.output_max - self.output_min)

    def denormalize_outputs(self, y):
        return self.output_min + np.asarray(y, dtype=float) * (self.output_max - self.output_min)

    def to_dict(self) -> dict:
        return {
            'input_mean': self.input_mean.tolist(),
            'input_std': self.input_std.tolist(),
            'output_min': self.output_min.tolist(),
            'output_max': self.output_max.tolist(),
            'grid': self.grid.to_dict(),
        }

    @classmethod
    def from_dict(cls, values: dict):
        return cls(input_mean=np.asarray(values['input_mean'], dtype=float),
                   input_std=np.asarray(values['input_std'], dtype=float),
                   output_min=np.asarray(values['output_min'], dtype=float),
                   output_max=np.asarray(values['output_max'], dtype=float),
                   grid=FrequencyGrid(**values['grid']))


def compute_normalization(train_part, ranges: ParamRanges = None, grid: FrequencyGrid = None) -> NormalizationStats:
    """Per-bin mean and standard deviation over the training spectra (std
    clamped to 1e-8), output bounds from the configured EEP ranges.

    Args:
        train_part: pandas.DataFrame or numpy.ndarray
            training samples, or their spectra as an (n, bins) array
    """
    ranges = ranges or ParamRanges()
    if isinstance(train_part, pd.DataFrame):
        grid = dataset_grid(train_part)
        spectra, _ = dataset_arrays(train_part)
    else:
        spectra = np.asarray(train_part, dtype=float)
        grid = grid or FrequencyGrid(count=spectra.shape[1])
    if spectra.shape[0] == 0:
        raise ValidationError("cannot normalize an empty training set")
    std = spectra.std(axis=0)
    lo, hi = ranges.eep_bounds()
    return NormalizationStats(input_mean=spectra.mean(axis=0),
                              input_std=np.maximum(std, STD_EPSILON),
                              output_min=lo, output_max=hi, grid=grid)
