"""Inverse design: from target resonant frequencies to a resonator geometry.

A group of candidate STL curves with peaks at the targets is synthesized,
each curve is mapped to circuit parameters by the surrogate, the circuit
parameters are inverted to a geometry and every geometry is evaluated again
with the physical model. The surrogate is never used to grade its own
designs.
"""
import logging
from dataclasses import dataclass

import numpy as np
import xarray as xr

from thr_design.acoustics import (
    DEFAULT_BAND,
    DEFAULT_CROSS_SECTION,
    EquivalentElectricalParams,
    FrequencyGrid,
    GeometricParams,
    ParamRanges,
    PhysicalConstants,
    StlSpectrum,
    aerf,
    eep_to_gp,
    gp_to_eep,
    resonant_frequencies,
    stl_side_branch,
)
from thr_design.errors import (
    DomainError,
    NoRealizableDesignError,
    ResonanceOutOfBandError,
    ValidationError,
)
from thr_design.nn import MLPModel, predict_batch
from thr_design.param_keys import GP_ORDER, to_cli
from thr_design.tmm import DuctNetwork, SideBranch, cascade, filter_network, stl_from_matrix
from thr_design.utils import mesh, scale_axis, thread_map

logger = logging.getLogger(__name__)

N_CANDIDATES = 100
MAX_PEAK_HEIGHT = 30.       # dB
HALF_WIDTH_RANGE = (2., 10.)  # Hz


@dataclass(frozen=True)
class DesignTarget:
    f1: float
    f2: float
    threshold: float = 10.
    band: tuple = DEFAULT_BAND

    def __post_init__(self):
        lo, hi = self.band
        for f in (self.f1, self.f2):
            if not lo <= f <= hi:
                raise ValidationError(f"target frequency {f} Hz outside [{lo:g}, {hi:g}] Hz")
        if not self.f1 < self.f2:
            raise ValidationError(f"targets must satisfy f1 < f2, got {self.f1} and {self.f2}")
        if not self.threshold > 0:
            raise ValidationError(f"STL threshold must be positive, got {self.threshold}")

    @property
    def frequencies(self) -> tuple:
        return (self.f1, self.f2)

    def to_dict(self) -> dict:
        return {'f1': self.f1, 'f2': self.f2, 'threshold': self.threshold, 'band': list(self.band)}


@dataclass(frozen=True, eq=False)
class CandidateSpectrum:
    spectrum: StlSpectrum
    heights: tuple
    half_widths: tuple
    index: int = 0

    def to_dict(self) -> dict:
        return {'index': self.index, 'heights': list(self.heights), 'half_widths': list(self.half_widths)}


def lorentzian_pair(f, targets, heights, half_widths):
    """Sum of two Lorentzian lines A w^2 / ((f - f_t)^2 + w^2)."""
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    for ft, a, w in zip(targets, heights, half_widths):
        out += a * w**2 / ((f - ft)**2 + w**2)
    return out


def synthesize_targets(target: DesignTarget, count: int = N_CANDIDATES, grid: FrequencyGrid = None,
                       seed: int = 0, max_height: float = MAX_PEAK_HEIGHT,
                       half_width_range=HALF_WIDTH_RANGE) -> list:
    """Candidate spectra peaking at the targets. Peak heights are uniform in
    [threshold, max_height] dB, half-widths uniform in half_width_range Hz."""
    if int(count) < 1:
        raise ValidationError(f"candidate count must be at least 1, got {count}")
    grid = grid or FrequencyGrid()
    rng = np.random.default_rng(seed)
    high = max(target.threshold, max_height)
    candidates = []
    for k in range(int(count)):
        heights = tuple(rng.uniform(target.threshold, high, size=2))
        widths = tuple(rng.uniform(*half_width_range, size=2))
        values = lorentzian_pair(grid.frequencies, target.frequencies, heights, widths)
        candidates.append(CandidateSpectrum(StlSpectrum(values, grid.start, grid.step), heights, widths, k))
    return candidates


@dataclass(frozen=True, eq=False)
class DesignResult:
    """A candidate carried through inversion and physical re-evaluation."""
    index: int
    candidate: CandidateSpectrum
    predicted_eep: EquivalentElectricalParams
    gp: GeometricParams
    eep: EquivalentElectricalParams
    realized: tuple
    stl_at_targets: tuple
    aerf: float
    feasible: bool
    in_range: bool
    tmm_stl_at_targets: tuple = None

    @property
    def mean_target_stl(self) -> float:
        return float(np.mean(self.stl_at_targets))

    def rank_key(self) -> tuple:
        return (not (self.feasible and self.in_range), not self.feasible, self.aerf,
                -self.mean_target_stl, self.index)

    def to_dict(self) -> dict:
        out = {
            'index': self.index,
            'candidate': self.candidate.to_dict() if self.candidate is not None else None,
            'predicted_eep': self.predicted_eep.to_dict() if self.predicted_eep is not None else None,
            'gp_cm': {k: to_cli(k, v) for k, v in zip(GP_ORDER, self.gp.genome())},
            'eep': self.eep.to_dict(),
            'realized_f1': self.realized[0] if self.realized else None,
            'realized_f2': self.realized[1] if self.realized else None,
            'stl_at_targets': list(self.stl_at_targets),
            'mean_target_stl': self.mean_target_stl,
            'aerf': self.aerf,
            'feasible': self.feasible,
            'in_range': self.in_range,
        }
        if self.tmm_stl_at_targets is not None:
            out['tmm_stl_at_targets'] = list(self.tmm_stl_at_targets)
        return out


class RankedDesigns(list):
    """Design results, best first, with the inversion failures by
    candidate index."""

    def __init__(self, results=(), failures: dict = None) -> None:
        super().__init__(results)
        self.failures = dict(failures or {})

    @property
    def best(self) -> DesignResult:
        return self[0]


def evaluate_design(gp: GeometricParams, target: DesignTarget, cross_section: float = DEFAULT_CROSS_SECTION,
                    pc: PhysicalConstants = None, ranges: ParamRanges = None, index: int = 0,
                    candidate: CandidateSpectrum = None, predicted_eep=None, use_tmm: bool = False) -> DesignResult:
    """Forward evaluation of a geometry against a target."""
    ranges = ranges or ParamRanges()
    eep = gp_to_eep(gp, pc)
    stl = tuple(float(t) for t in stl_side_branch(eep, np.array(target.frequencies), cross_section, pc))
    try:
        realized = resonant_frequencies(eep, cross_section, pc, target.band).frequencies
        error = 0.5 * (abs(realized[0] - target.f1) + abs(realized[1] - target.f2))
    except ResonanceOutOfBandError:
        realized, error = None, np.inf
    tmm_stl = None
    if use_tmm:
        network = DuctNetwork(cross_section, [SideBranch(eep=eep, gp=gp)])
        T = cascade(network, np.array(target.frequencies), pc)
        tmm_stl = tuple(float(t) for t in stl_from_matrix(T, cross_section, pc))
    feasible = bool(np.isfinite(error) and min(stl) >= target.threshold)
    return DesignResult(index=index, candidate=candidate, predicted_eep=predicted_eep, gp=gp, eep=eep,
                        realized=realized, stl_at_targets=stl, aerf=float(error), feasible=feasible,
                        in_range=ranges.gp_contains(gp), tmm_stl_at_targets=tmm_stl)


def design(
        target: DesignTarget,
        model: MLPModel,
        count: int = N_CANDIDATES,
        cross_section: float = DEFAULT_CROSS_SECTION,
        pc: PhysicalConstants = None,
        seed: int = 0,
        ranges: ParamRanges = None,
        use_tmm: bool = False,
        threads: int = 1,
    ) -> RankedDesigns:
    """Run the design pipeline and rank the realizable candidates.

    Ranking: feasible in-range designs first, then feasible out-of-range
    ones, then the rest; within each class by ascending AERF, descending
    mean STL at the targets and candidate index.

    Every predicted EEP set is reproduced by up to four geometries with the
    same spectrum. The one reported is the eep_to_gp choice: per order the
    smaller in-range neck radius, or the smaller admissible one when
    neither root is in range.

    Raises:
        NoRealizableDesignError if no candidate can be inverted to a geometry
    """
    if model.norm_stats is None:
        raise ValidationError("model has no normalization statistics")
    ranges = ranges or ParamRanges()
    candidates = synthesize_targets(target, count, model.norm_stats.grid, seed)
    eeps = predict_batch(model, np.stack([c.spectrum.values for c in candidates]))

    def run(item):
        candidate, values = item
        predicted = EquivalentElectricalParams.from_array(values)
        try:
            gp = eep_to_gp(predicted, ranges.cavity_radius, pc, ranges, allow_out_of_range=True)
            return evaluate_design(gp, target, cross_section, pc, ranges, candidate.index,
                                   candidate, predicted, use_tmm)
        except DomainError as e:
            return str(e)

    results, failures = [], {}
    for candidate, outcome in zip(candidates, thread_map(run, zip(candidates, eeps), threads)):
        if isinstance(outcome, str):
            logger.debug(f"candidate {candidate.index} not realizable: {outcome}")
            failures[candidate.index] = outcome
        else:
            results.append(outcome)
    if not results:
        raise NoRealizableDesignError(failures)
    ranked = RankedDesigns(sorted(results, key=DesignResult.rank_key), failures)
    best = ranked.best
    logger.info(f"{len(results)}/{len(candidates)} candidates realizable, "
                f"{sum(r.feasible for r in results)} feasible; best AERF {best.aerf:.3g} Hz, "
                f"mean target STL {best.mean_target_stl:.3g} dB")
    if not best.in_range:
        logger.warning("best design lies outside the configured geometry ranges")
    return ranked


def _perturbed_aerf(genome, target, r, cross_section, pc):
    try:
        gp = GeometricParams.from_genome(genome, r)
    except DomainError:
        return np.nan
    return aerf(gp, target.frequencies, cross_section, pc, target.band)


def sensitivity_map(
        gp: GeometricParams,
        target: DesignTarget,
        fields: tuple = ('a1', 'a2'),
        span: float = 0.1,
        n: int = 21,
        cross_section: float = DEFAULT_CROSS_SECTION,
        pc: PhysicalConstants = None,
        threads: int = 1,
    ) -> xr.DataArray:
    """AERF over a grid of relative perturbations of two geometric
    parameters, the others held fixed. Physically invalid cells are NaN.

    Args:
        fields: tuple[str]
            two of a1, l1, h1, a2, l2, h2
        span: float
            relative half-width of the grid, 0.1 is +-10 %
        n: int
            odd number of points per axis
    """
    if len(fields) != 2 or fields[0] == fields[1] or not set(fields) <= set(GP_ORDER):
        raise ValidationError(f"sensitivity map needs two distinct fields of {GP_ORDER}, got {fields}")
    scales = scale_axis(span, n)
    i, j = GP_ORDER.index(fields[0]), GP_ORDER.index(fields[1])
    base = gp.genome()
    x_grid, y_grid = mesh(scales, scales)

    def cell(scale_pair):
        genome = base.copy()
        genome[i] *= scale_pair[0]
        genome[j] *= scale_pair[1]
        return _perturbed_aerf(genome, target, gp.cavity_radius, cross_section, pc)

    values = thread_map(cell, zip(x_grid.ravel(), y_grid.ravel()), threads)
    dims = (f"{fields[0]}_scale", f"{fields[1]}_scale")
    return xr.DataArray(np.reshape(values, x_grid.shape), dims=dims,
                        coords={dims[0]: scales, dims[1]: scales}, name='aerf',
                        attrs={'units': 'Hz', 'long_name': 'average error of the resonant frequencies',
                               'f1': target.f1, 'f2': target.f2})


def sensitivity_profile(
        gp: GeometricParams,
        target: DesignTarget,
        span: float = 0.1,
        n: int = 21,
        cross_section: float = DEFAULT_CROSS_SECTION,
        pc: PhysicalConstants = None,
        threads: int = 1,
    ) -> xr.DataArray:
    """AERF when each geometric parameter alone is scaled over
    [1 - span, 1 + span]; dimensions (parameter, scale)."""
    scales = scale_axis(span, n)
    base = gp.genome()

    def cell(item):
        k, scale = item
        genome = base.copy()
        genome[k] *= scale
        return _perturbed_aerf(genome, target, gp.cavity_radius, cross_section, pc)

    items = [(k, s) for k in range(len(GP_ORDER)) for s in scales]
    values = np.reshape(thread_map(cell, items, threads), (len(GP_ORDER), len(scales)))
    return xr.DataArray(values, dims=('parameter', 'scale'), coords={'parameter': GP_ORDER, 'scale': scales},
                        name='aerf', attrs={'units': 'Hz', 'f1': target.f1, 'f2': target.f2})


def write_sensitivity(da: xr.DataArray, path: str) -> None:
    """Long-format CSV, one row per cell."""
    da.to_dataframe().reset_index().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


def design_filter(
        targets: list,
        model: MLPModel,
        count: int = N_CANDIDATES,
        spacing: float = 0.1,
        cross_section: float = DEFAULT_CROSS_SECTION,
        pc: PhysicalConstants = None,
        seed: int = 0,
        ranges: ParamRanges = None,
        threads: int = 1,
    ) -> (DuctNetwork, list):
    """One resonator per target pair, cascaded along a duct.

    Returns:
        network: DuctNetwork
            side branches in target order separated by `spacing` (m)
        designs: list[RankedDesigns]
            the ranked designs of every target pair
    """
    if not targets:
        raise ValidationError("a filter needs at least one target pair")
    designs = [design(t, model, count, cross_section, pc, seed + k, ranges, threads=threads)
               for k, t in enumerate(targets)]
    branches = [SideBranch(eep=d.best.eep, gp=d.best.gp) for d in designs]
    return filter_network(branches, spacing, cross_section), designs


def design_report(target: DesignTarget, ranked: RankedDesigns, top: int = None) -> dict:
    results = list(ranked) if top is None else list(ranked)[:top]
    return {
        'target': target.to_dict(),
        'n_realizable': len(ranked),
        'n_feasible': sum(r.feasible for r in ranked),
        'failures': {str(k): v for k, v in sorted(ranked.failures.items())},
        'results': [r.to_dict() for r in results],
    }
