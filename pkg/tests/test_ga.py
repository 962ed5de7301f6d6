import numpy as np
import pytest

from thr_design.acoustics import GeometricParams, ParamRanges, eep_to_gp, gp_to_eep, stl_side_branch
from thr_design.errors import ValidationError
from thr_design.ga import (
    GAConfig,
    ObjectiveSpec,
    best_individual,
    evolve,
    ga_report,
    init_population,
    objective_j,
    optimize,
    paired_runs,
    penalized_fitness,
)


@pytest.fixture
def spec(example_report):
    return ObjectiveSpec(*example_report.frequencies)


SMALL = GAConfig(population_size=12, generations=6, seed=2)


def test_objective_matches_stl(example_gp, spec):
    j, stl = objective_j(example_gp, spec)
    expected = stl_side_branch(gp_to_eep(example_gp), np.array([spec.f1, spec.f2]))
    assert stl == tuple(expected)
    assert j == -(expected[0] + expected[1])


def test_penalty():
    spec = ObjectiveSpec(150., 250.)
    assert penalized_fitness(-20., (10., 10.), spec, 1000.) == -20.
    assert penalized_fitness(-21., (9., 12.), spec, 1000.) == pytest.approx(-21. + 1000.)
    assert penalized_fitness(-10., (5., 5.), spec, 0.) == -10.


def test_config_validation():
    with pytest.raises(ValidationError):
        GAConfig(population_size=1)
    with pytest.raises(ValidationError):
        GAConfig(mutation_prob=1.5)
    with pytest.raises(ValidationError):
        GAConfig(population_size=10, elitism=10)
    with pytest.raises(ValidationError):
        ObjectiveSpec(300., 200.)
    assert GAConfig(elite_count=5).n_elite_candidates == 20
    assert GAConfig(elite_count=5, elite_candidates=7).n_elite_candidates == 7


def test_random_population_in_bounds(spec):
    population = init_population(SMALL, spec)
    lo, hi = ParamRanges().genome_bounds()
    assert len(population) == 12
    assert all(ind.origin == 'random' for ind in population)
    assert all(np.all(ind.genome >= lo) and np.all(ind.genome <= hi) for ind in population)


def test_elite_seeding(example_model, example_eep, spec):
    config = GAConfig(population_size=12, generations=6, seed=2, elite_count=3)
    seeded = init_population(config, spec, example_model)
    unseeded = init_population(SMALL, spec)
    assert [ind.origin for ind in seeded[:3]] == ['surrogate'] * 3
    np.testing.assert_allclose(seeded[0].genome, eep_to_gp(example_eep).genome(), rtol=1e-9)
    np.testing.assert_allclose(gp_to_eep(GeometricParams.from_genome(seeded[0].genome)).to_array(),
                               example_eep.to_array(), rtol=1e-9)
    for a, b in zip(seeded[3:], unseeded[:9]):
        np.testing.assert_array_equal(a.genome, b.genome)


def test_elite_seeding_needs_model(spec):
    with pytest.raises(ValidationError):
        init_population(GAConfig(population_size=12, elite_count=2), spec)


def test_zero_elites_ignore_model(example_model, spec):
    with_model = init_population(SMALL, spec, example_model)
    without = init_population(SMALL, spec)
    for a, b in zip(with_model, without):
        np.testing.assert_array_equal(a.genome, b.genome)


def test_evolve_trace_is_monotone(spec):
    population = init_population(SMALL, spec)
    final, trace = evolve(population, SMALL, spec)
    assert list(trace['generation']) == list(range(7))
    assert np.all(np.diff(trace['best_fitness']) <= 0.)
    lo, hi = ParamRanges().genome_bounds()
    assert all(np.all(ind.genome >= lo) and np.all(ind.genome <= hi) for ind in final)
    assert len(final) == 12


def test_evolve_without_variation_keeps_best(spec):
    config = GAConfig(population_size=12, generations=5, crossover_prob=0., mutation_prob=0., seed=4)
    population = init_population(config, spec)
    start = best_individual(population).fitness
    final, trace = evolve(population, config, spec)
    assert best_individual(final).fitness == start
    assert np.all(trace['best_fitness'] == start)


def test_optimize_is_deterministic(spec):
    best_a, trace_a, _ = optimize(SMALL, spec)
    best_b, trace_b, _ = optimize(SMALL, spec, threads=2)
    np.testing.assert_array_equal(best_a.genome, best_b.genome)
    np.testing.assert_array_equal(trace_a['best_fitness'], trace_b['best_fitness'])


def test_ga_report(spec):
    best, _, _ = optimize(SMALL, spec)
    report = ga_report(best, spec, SMALL)
    assert report['j'] == best.j
    assert len(report['results']) == 1
    assert report['results'][0]['stl_at_targets'] == pytest.approx(list(best.stl))


def test_paired_runs(example_model, spec):
    result = paired_runs(2, SMALL, spec, example_model)
    assert result['n_pairs'] == 2
    assert set(result['traces']) == {'seeded', 'unseeded'}
    assert len(result['median_best_fitness']['seeded']) == 7
    assert 0 <= result['seeded_wins'] <= 2
    assert set(result['traces']['seeded']['pair']) == {0, 1}
    with pytest.raises(ValidationError):
        paired_runs(0, SMALL, spec, example_model)
