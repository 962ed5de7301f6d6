"""Real-coded genetic algorithm maximizing the STL of a resonator at two
target frequencies, with optional surrogate-designed elite individuals in
the initial population.

The genome is the geometry (a1, l1, h1, a2, l2, h2) in metres. Fitness is
minimized:

    J = -[t(f1t) + t(f2t)]
    fitness = J + penalty * sum_i max(0, threshold - t(fit))
"""
import logging
from dataclasses import asdict, dataclass, replace

import numpy as np
import pandas as pd
from tqdm import trange

from thr_design.acoustics import (
    DEFAULT_CROSS_SECTION,
    GeometricParams,
    ParamRanges,
    PhysicalConstants,
    gp_to_eep,
    stl_side_branch,
)
from thr_design.design import DesignTarget, design, evaluate_design
from thr_design.errors import NoRealizableDesignError, ValidationError
from thr_design.utils import thread_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 50
    generations: int = 50
    elite_count: int = 0
    elite_candidates: int = None
    tournament_size: int = 3
    crossover_prob: float = 0.9
    mutation_prob: float = 0.1
    mutation_scale: float = 0.05
    elitism: int = 2
    penalty: float = 1000.
    seed: int = 0

    def __post_init__(self):
        if int(self.population_size) < 2:
            raise ValidationError(f"population size must be at least 2, got {self.population_size}")
        if int(self.generations) < 0:
            raise ValidationError(f"generations must be non-negative, got {self.generations}")
        if not 0 <= int(self.elite_count) <= int(self.population_size):
            raise ValidationError(f"elite count must be in [0, {self.population_size}], got {self.elite_count}")
        if not 0 <= int(self.elitism) < int(self.population_size):
            raise ValidationError(f"elitism must be in [0, {self.population_size}), got {self.elitism}")
        if int(self.tournament_size) < 1:
            raise ValidationError(f"tournament size must be at least 1, got {self.tournament_size}")
        for name in ('crossover_prob', 'mutation_prob'):
            if not 0. <= getattr(self, name) <= 1.:
                raise ValidationError(f"{name} must be in [0, 1], got {getattr(self, name)}")
        if self.mutation_scale < 0 or self.penalty < 0:
            raise ValidationError("mutation scale and penalty must be non-negative")

    @property
    def n_elite_candidates(self) -> int:
        return int(self.elite_candidates) if self.elite_candidates else 4 * int(self.elite_count)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ObjectiveSpec:
    f1: float
    f2: float
    threshold: float = 10.
    cross_section: float = DEFAULT_CROSS_SECTION

    def __post_init__(self):
        self.target()
        if not self.cross_section > 0:
            raise ValidationError(f"cross-section must be positive, got {self.cross_section}")

    def target(self) -> DesignTarget:
        return DesignTarget(self.f1, self.f2, self.threshold)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Individual:
    genome: np.ndarray
    j: float
    stl: tuple
    fitness: float
    origin: str = 'random'

    @property
    def mean_target_stl(self) -> float:
        return float(np.mean(self.stl))


def objective_j(gp: GeometricParams, spec: ObjectiveSpec, pc: PhysicalConstants = None) -> (float, tuple):
    """J and the STL at the two target frequencies."""
    stl = stl_side_branch(gp_to_eep(gp, pc), np.array([spec.f1, spec.f2]), spec.cross_section, pc)
    t1, t2 = float(stl[0]), float(stl[1])
    return -(t1 + t2), (t1, t2)


def penalized_fitness(j: float, stl: tuple, spec: ObjectiveSpec, penalty: float) -> float:
    return j + penalty * sum(max(0., spec.threshold - t) for t in stl)


def evaluate_genome(genome, spec: ObjectiveSpec, config: GAConfig, pc: PhysicalConstants = None,
                    ranges: ParamRanges = None, origin: str = 'random') -> Individual:
    ranges = ranges or ParamRanges()
    genome = np.asarray(genome, dtype=float)
    j, stl = objective_j(GeometricParams.from_genome(genome, ranges.cavity_radius), spec, pc)
    return Individual(genome=genome, j=j, stl=stl, fitness=penalized_fitness(j, stl, spec, config.penalty),
                      origin=origin)


def _random_genomes(rng, n, ranges):
    lo, hi = ranges.genome_bounds()
    return [rng.uniform(lo, hi) for _ in range(n)]


def surrogate_elites(config: GAConfig, spec: ObjectiveSpec, model, pc: PhysicalConstants = None,
                     ranges: ParamRanges = None, threads: int = 1) -> list:
    """Genomes of the best realizable surrogate designs by mean STL at the
    targets, clamped to the geometry ranges; at most elite_count of them."""
    ranges = ranges or ParamRanges()
    try:
        ranked = design(spec.target(), model, config.n_elite_candidates, spec.cross_section, pc,
                        seed=config.seed, ranges=ranges, threads=threads)
    except NoRealizableDesignError as e:
        logger.warning(f"no surrogate design realizable, seeding randomly: {e}")
        return []
    lo, hi = ranges.genome_bounds()
    best = sorted(ranked, key=lambda r: (-r.mean_target_stl, r.index))[:int(config.elite_count)]
    return [np.clip(r.gp.genome(), lo, hi) for r in best]


def init_population(config: GAConfig, spec: ObjectiveSpec, model=None, pc: PhysicalConstants = None,
                    ranges: ParamRanges = None, threads: int = 1) -> list:
    """Uniform random population; with elite_count > 0 the first
    elite_count individuals come from the surrogate design pipeline."""
    ranges = ranges or ParamRanges()
    n_elites = int(config.elite_count)
    if n_elites > 0 and model is None:
        raise ValidationError("elite seeding needs a trained model")
    rng = np.random.default_rng([int(config.seed), 0])
    elites = surrogate_elites(config, spec, model, pc, ranges, threads) if n_elites else []
    if len(elites) < n_elites:
        logger.warning(f"only {len(elites)} of {n_elites} elite individuals realizable, "
                       f"filling with random individuals")
    genomes = [(g, 'surrogate') for g in elites]
    genomes += [(g, 'random') for g in _random_genomes(rng, int(config.population_size) - len(elites), ranges)]
    return thread_map(lambda item: evaluate_genome(item[0], spec, config, pc, ranges, item[1]), genomes, threads)


def _order(population) -> np.ndarray:
    fitness = np.array([ind.fitness for ind in population])
    return np.lexsort((np.arange(len(population)), fitness))


def _tournament(rng, population, size) -> Individual:
    idx = rng.integers(0, len(population), size=size)
    return population[min(idx, key=lambda k: (population[k].fitness, k))]


def _trace_row(generation, population, spec) -> dict:
    best = population[_order(population)[0]]
    return {
        'generation': generation,
        'best_fitness': best.fitness,
        'best_j': best.j,
        'best_mean_stl': best.mean_target_stl,
        'feasible_fraction': float(np.mean([min(ind.stl) >= spec.threshold for ind in population])),
    }


def evolve(population: list, config: GAConfig, spec: ObjectiveSpec, pc: PhysicalConstants = None,
           ranges: ParamRanges = None, threads: int = 1) -> (list, pd.DataFrame):
    """Tournament selection, uniform crossover, Gaussian mutation with a
    range-relative scale, clamping to the ranges and elitism.

    Returns:
        population: list[Individual]
            final population
        trace: pandas.DataFrame
            generation, best_fitness, best_j, best_mean_stl and
            feasible_fraction; generation 0 is the initial population
    """
    ranges = ranges or ParamRanges()
    lo, hi = ranges.genome_bounds()
    sigma = config.mutation_scale * (hi - lo)
    rng = np.random.default_rng([int(config.seed), 1])
    n = len(population)
    trace = [_trace_row(0, population, spec)]
    for generation in trange(1, int(config.generations) + 1, desc='evolving', disable=None):
        order = _order(population)
        survivors = [population[k] for k in order[:int(config.elitism)]]
        children = []
        while len(children) < n - len(survivors):
            p1 = _tournament(rng, population, int(config.tournament_size)).genome
            p2 = _tournament(rng, population, int(config.tournament_size)).genome
            if rng.random() < config.crossover_prob:
                mask = rng.random(p1.size) < 0.5
                pair = (np.where(mask, p1, p2), np.where(mask, p2, p1))
            else:
                pair = (p1.copy(), p2.copy())
            for child in pair:
                mutate = rng.random(child.size) < config.mutation_prob
                child = np.clip(child + mutate * rng.normal(0., 1., child.size) * sigma, lo, hi)
                children.append(child)
        children = children[:n - len(survivors)]
        population = survivors + thread_map(
            lambda g: evaluate_genome(g, spec, config, pc, ranges, 'offspring'), children, threads)
        trace.append(_trace_row(generation, population, spec))
    best = population[_order(population)[0]]
    logger.info(f"GA finished: best J {best.j:.4g}, mean target STL {best.mean_target_stl:.4g} dB")
    return population, pd.DataFrame(trace)


def best_individual(population: list) -> Individual:
    return population[_order(population)[0]]


def optimize(config: GAConfig, spec: ObjectiveSpec, model=None, pc: PhysicalConstants = None,
             ranges: ParamRanges = None, threads: int = 1) -> (Individual, pd.DataFrame, list):
    """init_population followed by evolve; returns (best, trace, population)."""
    population = init_population(config, spec, model, pc, ranges, threads)
    population, trace = evolve(population, config, spec, pc, ranges, threads)
    return best_individual(population), trace, population


def ga_report(best: Individual, spec: ObjectiveSpec, config: GAConfig, pc: PhysicalConstants = None,
              ranges: ParamRanges = None) -> dict:
    """Best individual in the design report layout."""
    ranges = ranges or ParamRanges()
    gp = GeometricParams.from_genome(best.genome, ranges.cavity_radius)
    result = evaluate_design(gp, spec.target(), spec.cross_section, pc, ranges, index=0)
    return {
        'target': spec.target().to_dict(),
        'ga': config.to_dict(),
        'j': best.j,
        'fitness': best.fitness,
        'origin': best.origin,
        'results': [result.to_dict()],
    }


def paired_runs(n_pairs: int, config: GAConfig, spec: ObjectiveSpec, model, pc: PhysicalConstants = None,
                ranges: ParamRanges = None, threads: int = 1) -> dict:
    """Seeded and unseeded runs over n_pairs seeds (config.seed + k). Both
    runs of a pair share the seed, so their random individuals coincide.

    Returns:
        dict with the per-run traces, the per-generation median best
        fitness of each arm, whether the seeded median dominates at every
        generation and the number of pairs where the seeded final mean
        target STL exceeds the unseeded one
    """
    if int(n_pairs) < 1:
        raise ValidationError(f"need at least one pair, got {n_pairs}")
    n_elites = int(config.elite_count) or 5
    arms = {'seeded': [], 'unseeded': []}
    finals = {'seeded': [], 'unseeded': []}
    for k in range(int(n_pairs)):
        for arm, elites in (('unseeded', 0), ('seeded', n_elites)):
            run_config = replace(config, seed=int(config.seed) + k, elite_count=elites)
            best, trace, _ = optimize(run_config, spec, model if elites else None, pc, ranges, threads)
            trace.insert(0, 'pair', k)
            arms[arm].append(trace)
            finals[arm].append(best.mean_target_stl)
    median = {arm: np.median(np.stack([t['best_fitness'].to_numpy() for t in traces]), axis=0)
              for arm, traces in arms.items()}
    wins = int(sum(s > u for s, u in zip(finals['seeded'], finals['unseeded'])))
    dominates = bool(np.all(median['seeded'] <= median['unseeded']))
    logger.info(f"seeded runs dominate in the median: {dominates}; seeded final STL higher in "
                f"{wins}/{n_pairs} pairs")
    return {
        'n_pairs': int(n_pairs),
        'elite_count': n_elites,
        'traces': {arm: pd.concat(traces, ignore_index=True) for arm, traces in arms.items()},
        'median_best_fitness': {arm: m.tolist() for arm, m in median.items()},
        'dominates': dominates,
        'final_mean_stl': finals,
        'seeded_wins': wins,
    }
