import numpy as np
import pandas as pd
import pytest

from thr_design.acoustics import (
    EquivalentElectricalParams,
    FrequencyGrid,
    GeometricParams,
    ParamRanges,
    aerf,
    eep_to_gp,
    gp_candidates,
    gp_to_eep,
)
from thr_design.design import (
    DesignTarget,
    design,
    design_filter,
    design_report,
    evaluate_design,
    lorentzian_pair,
    sensitivity_map,
    sensitivity_profile,
    synthesize_targets,
    write_sensitivity,
)
from thr_design.errors import NoRealizableDesignError, ValidationError
from thr_design.nn import TrainConfig, build_model
from thr_design.tmm import SideBranch, StraightSegment

from conftest import constant_model


@pytest.fixture
def target(example_report):
    return DesignTarget(*example_report.frequencies)


def test_target_validation():
    with pytest.raises(ValidationError):
        DesignTarget(90., 300.)
    with pytest.raises(ValidationError):
        DesignTarget(300., 200.)
    with pytest.raises(ValidationError):
        DesignTarget(150., 250., threshold=0.)


def test_lorentzian_pair_symmetry():
    f = np.arange(150., 351.)
    values = lorentzian_pair(f, (200., 300.), (20., 20.), (5., 5.))
    np.testing.assert_allclose(values, values[::-1])
    assert values[50] == pytest.approx(20. + 20. * 25. / (100.**2 + 25.))


def test_synthesized_peaks_sit_on_targets():
    target = DesignTarget(150., 250.)
    grid = FrequencyGrid()
    candidates = synthesize_targets(target, count=20, grid=grid, seed=5)
    assert [c.index for c in candidates] == list(range(20))
    for c in candidates:
        values = c.spectrum.values
        for ft in target.frequencies:
            k = int(ft - grid.start)
            assert values[k] > values[k - 1] and values[k] > values[k + 1]
        assert all(10. <= h <= 30. for h in c.heights)
        assert all(2. <= w <= 10. for w in c.half_widths)
    again = synthesize_targets(target, count=20, grid=grid, seed=5)
    np.testing.assert_array_equal(again[7].spectrum.values, candidates[7].spectrum.values)


def test_evaluate_design(example_gp, target):
    result = evaluate_design(example_gp, target, use_tmm=True)
    assert result.feasible and result.in_range
    assert result.aerf == pytest.approx(0., abs=1e-9)
    np.testing.assert_allclose(result.tmm_stl_at_targets, result.stl_at_targets, atol=1e-9)
    far = evaluate_design(example_gp, DesignTarget(450., 550.))
    assert not far.feasible
    assert far.aerf == pytest.approx(0.5 * (abs(result.realized[0] - 450.) + abs(result.realized[1] - 550.)))


def test_design_with_exact_surrogate(example_model, example_gp, target):
    ranked = design(target, example_model, count=5)
    assert len(ranked) == 5
    assert ranked.failures == {}
    assert [r.index for r in ranked] == list(range(5))
    best = ranked.best
    np.testing.assert_allclose(best.gp.genome(), eep_to_gp(best.predicted_eep).genome(), rtol=1e-12)
    np.testing.assert_allclose(best.eep.to_array(), gp_to_eep(example_gp).to_array(), rtol=1e-9)
    assert any(np.allclose(c.genome(), best.gp.genome(), rtol=1e-9, atol=0) for c in gp_candidates(best.eep))
    assert best.feasible and best.in_range
    assert best.aerf < 1e-3
    report = design_report(target, ranked, top=2)
    assert len(report['results']) == 2
    assert report['n_feasible'] == 5


def test_design_needs_normalization(target):
    model = build_model([500, 8, 6], TrainConfig(hidden=(8,), dropout=0.))
    with pytest.raises(ValidationError, match='normalization'):
        design(target, model, count=2)


def test_ranking_puts_feasible_first(example_gp, target):
    genomes = [example_gp.genome(), example_gp.genome() * [1.2, 1., 1., 1., 1., 1.],
               [0.002, 0.04, 0.01, 0.002, 0.04, 0.01]]
    results = [evaluate_design(GeometricParams.from_genome(g), target, index=k) for k, g in enumerate(genomes)]
    ranked = sorted(results, key=lambda r: r.rank_key())
    assert ranked[0].index == 0
    flags = [not (r.feasible and r.in_range) for r in ranked]
    assert flags == sorted(flags)


def test_no_realizable_design(target):
    bad = EquivalentElectricalParams(resistance=(170., 42.), inertance=(1., 137.), compliance=(3e-9, 3e-9))
    with pytest.raises(NoRealizableDesignError) as info:
        design(target, constant_model(bad), count=4)
    assert sorted(info.value.reasons) == [0, 1, 2, 3]


def test_sensitivity_map(example_gp, target):
    smap = sensitivity_map(example_gp, target, ('a1', 'a2'), span=0.1, n=3)
    assert smap.shape == (3, 3)
    assert smap.values[1, 1] == pytest.approx(aerf(example_gp, target.frequencies), abs=1e-12)
    genome = example_gp.genome()
    genome[0] *= 0.9
    genome[3] *= 1.1
    expected = aerf(GeometricParams.from_genome(genome), target.frequencies)
    assert smap.values[0, 2] == pytest.approx(expected)
    with pytest.raises(ValidationError):
        sensitivity_map(example_gp, target, ('a1', 'a1'))
    with pytest.raises(ValidationError):
        sensitivity_map(example_gp, target, n=4)


def test_sensitivity_map_invalid_cells_are_nan(target):
    gp = GeometricParams.from_genome([0.04, 0.02, 0.06, 0.005, 0.008, 0.06])
    smap = sensitivity_map(gp, target, ('a1', 'l1'), span=0.3, n=3)
    assert np.all(np.isnan(smap.values[2]))
    assert not np.any(np.isnan(smap.values[:2]))


def test_sensitivity_profile(tmp_path, example_gp, target):
    profile = sensitivity_profile(example_gp, target, span=0.05, n=5, threads=2)
    assert profile.shape == (6, 5)
    np.testing.assert_allclose(profile.values[:, 2], aerf(example_gp, target.frequencies), atol=1e-12)
    path = tmp_path / 'profile.csv'
    write_sensitivity(profile, str(path))
    df = pd.read_csv(path)
    assert list(df.columns) == ['parameter', 'scale', 'aerf']
    assert len(df) == 30


def test_design_filter(example_model, target):
    network, designs = design_filter([target, target], example_model, count=3, spacing=0.2)
    assert len(designs) == 2
    assert isinstance(network.elements[0], SideBranch)
    assert isinstance(network.elements[1], StraightSegment)
    assert len(network.side_branches()) == 2
    with pytest.raises(ValidationError):
        design_filter([], example_model)


def test_design_outside_ranges_still_ranked(target):
    gp = GeometricParams.from_genome([0.01, 0.02, 0.2, 0.005, 0.008, 0.06])
    result = evaluate_design(gp, target)
    assert not result.in_range
    assert result.rank_key()[0]
    assert ParamRanges().gp_contains(gp) is False
