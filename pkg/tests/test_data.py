from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from thr_design.acoustics import FrequencyGrid, ParamRanges, ResonanceReport
from thr_design.data import (
    EEP_ORDER,
    GP_COLUMNS,
    BinSpec,
    DatasetSplit,
    RejectReason,
    compute_normalization,
    dataset_arrays,
    evaluate_candidate,
    filter_sample,
    frame_geometry,
    generate_dataset,
    read_dataset,
    read_datasets,
    sample_gp,
    samples_to_frame,
    split_dataset,
    verify_dataset,
    write_dataset,
)
from thr_design.errors import NoFeasibleGroupsError, ValidationError


def test_sample_gp_is_uniform_in_ranges():
    ranges = ParamRanges()
    lo, hi = ranges.genome_bounds()
    rng = np.random.default_rng(0)
    genomes = np.array([sample_gp(rng, ranges).genome() for _ in range(100000)])
    assert np.all(genomes >= lo) and np.all(genomes <= hi)
    for k in range(6):
        result = stats.kstest(genomes[:, k], stats.uniform(lo[k], hi[k] - lo[k]).cdf)
        assert result.statistic < 0.02


def test_sample_gp_fixed_cavity_radius():
    gp = sample_gp(np.random.default_rng(1))
    assert gp.cavity_radius == (0.05, 0.05)


def _report(f, t):
    return ResonanceReport(frequencies=tuple(f), stl=tuple(t))


def test_filter_sample(example_eep):
    assert filter_sample(example_eep, _report((131., 317.), (17., 13.))).accepted
    below = filter_sample(example_eep, _report((131., 317.), (9.9, 20.)))
    assert below.reason is RejectReason.STL_BELOW_THRESHOLD
    out = filter_sample(example_eep, _report((131., 620.), (17., 13.)))
    assert out.reason is RejectReason.RESONANCE_OUT_OF_BAND
    assert filter_sample(example_eep, None).reason is RejectReason.RESONANCE_OUT_OF_BAND
    tight = ParamRanges(resistance=(1., 10.))
    assert filter_sample(example_eep, _report((131., 317.), (17., 13.)), tight).reason is RejectReason.EEP_OUT_OF_RANGE


def test_evaluate_candidate(example_gp, example_report):
    result, sample = evaluate_candidate(example_gp, counter=7)
    assert result.accepted
    assert sample.counter == 7
    assert (sample.f_1, sample.f_2) == example_report.frequencies
    assert len(sample.spectrum) == 500


def test_bins():
    bins = BinSpec()
    assert bins.n_bands == 10
    assert len(bins.groups()) == 45
    assert bins.group_of(131., 317.) == (0, 4)
    assert bins.group_of(317., 131.) is None
    assert bins.group_of(120., 130.) is None
    assert bins.band_index(600.) == 9
    assert bins.band_index(601.) is None
    assert bins.band_edges(9) == (550., 600.)
    with pytest.raises(ValidationError):
        BinSpec(band_width=0.)


def test_generate_dataset(small_dataset, small_bins):
    df, report = small_dataset
    cap = small_bins.samples_per_group
    assert report['attempts'] == sum(report['rejections'].values())
    assert 0. < report['acceptance_rate'] <= 1.
    assert report['feasible_groups'] >= 1
    for group in report['groups']:
        assert group['count'] <= cap
        assert group['infeasible'] == (group['count'] < cap)
    assert len(df) == report['total_samples']
    assert np.all(df['stl_f1'] > 10.) and np.all(df['stl_f2'] > 10.)
    assert np.all(df['f1'] < df['f2'])
    assert verify_dataset(df, bins=small_bins) == []


def test_generation_ignores_threads_and_chunks(small_dataset, small_bins):
    df, report = small_dataset
    other, other_report = generate_dataset(small_bins, seed=3, threads=2, chunk_size=37)
    pd.testing.assert_frame_equal(df, other, check_exact=True)
    assert other_report['attempts'] == report['attempts']


def test_no_feasible_groups():
    bins = BinSpec(band_width=250., samples_per_group=1000, max_attempts_per_group=5)
    with pytest.raises(NoFeasibleGroupsError):
        generate_dataset(bins, seed=0)
    with pytest.raises(NoFeasibleGroupsError):
        generate_dataset(BinSpec(band_width=600.), seed=0)


def test_dataset_file_roundtrip(tmp_path, small_dataset, small_dataset_file):
    df = small_dataset[0]
    back = read_dataset(small_dataset_file)
    pd.testing.assert_frame_equal(back, df, check_exact=True)
    assert back.attrs['grid'] == FrequencyGrid()
    path = str(tmp_path / 'again.csv')
    write_dataset(back, path)
    with open(path) as a, open(small_dataset_file) as b:
        assert a.read() == b.read()


def test_read_datasets_concatenates(small_dataset_file):
    df = read_datasets([small_dataset_file, small_dataset_file])
    assert len(df) == 2 * len(read_dataset(small_dataset_file))


@pytest.mark.parametrize('header', ['# something-else v1 grid=101.0,1.0,500', '# thr-design-dataset v2 grid=101.0,1.0,500'])
def test_read_dataset_rejects_header(tmp_path, small_dataset_file, header):
    lines = Path(small_dataset_file).read_text().split('\n')
    path = tmp_path / 'bad.csv'
    path.write_text('\n'.join([header] + lines[1:]))
    with pytest.raises(ValidationError):
        read_dataset(str(path))


def test_verify_dataset_detects_tampering(small_dataset):
    df = small_dataset[0].copy()
    df.attrs = dict(small_dataset[0].attrs)
    df.loc[0, 't_200'] += 1.
    assert verify_dataset(df) == [(0, 'spectrum mismatch')]


def test_frame_geometry(small_dataset):
    df = small_dataset[0]
    gps = frame_geometry(df)
    np.testing.assert_allclose(gps[0].genome() * 100., df.loc[0, GP_COLUMNS].to_numpy(dtype=float), rtol=1e-12)


def test_samples_to_frame_columns(example_gp):
    _, sample = evaluate_candidate(example_gp)
    df = samples_to_frame([sample])
    assert list(df.columns[:12]) == GP_COLUMNS + EEP_ORDER
    spectra, eeps = dataset_arrays(df)
    assert spectra.shape == (1, 500)
    np.testing.assert_array_equal(eeps[0], sample.eep.to_array())


def test_split_sizes():
    df = pd.DataFrame({'x': np.arange(1000)})
    train, val, test = split_dataset(df, DatasetSplit(seed=4))
    assert (len(train), len(val), len(test)) == (800, 100, 100)
    combined = np.sort(np.concatenate([train['x'], val['x'], test['x']]))
    np.testing.assert_array_equal(combined, np.arange(1000))
    train2, _, _ = split_dataset(df, DatasetSplit(seed=4))
    np.testing.assert_array_equal(train['x'], train2['x'])


def test_split_floors_small_parts():
    train, val, test = split_dataset(pd.DataFrame({'x': np.arange(15)}))
    assert (len(train), len(val), len(test)) == (13, 1, 1)
    with pytest.raises(ValidationError):
        DatasetSplit(0.5, 0.2, 0.2)
    with pytest.raises(ValidationError):
        split_dataset(pd.DataFrame({'x': []}))


def test_normalization():
    rng = np.random.default_rng(0)
    spectra = rng.normal(10., 3., size=(200, 5))
    spectra[:, 2] = 4.
    norm = compute_normalization(spectra)
    z = norm.normalize_inputs(spectra)
    np.testing.assert_allclose(z[:, 2], 0.)
    np.testing.assert_allclose(z[:, [0, 1, 3, 4]].mean(axis=0), 0., atol=1e-12)
    np.testing.assert_allclose(z[:, [0, 1, 3, 4]].std(axis=0), 1., rtol=1e-12)
    assert norm.grid == FrequencyGrid(count=5)

    c = norm.normalize_outputs(np.array([[1., 1., 7e-10, 1., 1., 7e-9]]))
    assert c[0, 2] == pytest.approx(0.)
    assert c[0, 5] == pytest.approx(1.)
    y = rng.uniform(size=(10, 6))
    np.testing.assert_allclose(norm.normalize_outputs(norm.denormalize_outputs(y)), y, rtol=1e-12)


def test_normalization_from_frame(small_dataset):
    df = small_dataset[0]
    norm = compute_normalization(df)
    assert norm.grid == FrequencyGrid()
    assert norm.input_mean.shape == (500,)
