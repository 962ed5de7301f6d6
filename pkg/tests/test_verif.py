import numpy as np
import pandas as pd
import pytest

from thr_design.acoustics import EquivalentElectricalParams
from thr_design.data import evaluate_candidate, samples_to_frame
from thr_design.errors import ValidationError
from thr_design.verif import verify_model, write_verification

from conftest import constant_model


@pytest.fixture
def samples(example_gp):
    _, sample = evaluate_candidate(example_gp)
    return samples_to_frame([sample, sample])


def test_exact_surrogate_realizes_every_sample(example_model, samples):
    ds, summary = verify_model(example_model, samples)
    assert summary['n_samples'] == 2
    assert summary['realized_fraction'] == 1.
    assert summary['median_aerf'] < 1e-3
    assert summary['normalized_mse'] < 1e-20
    assert set(summary['normalized_mse_per_eep']) == {'R1', 'M1', 'C1', 'R2', 'M2', 'C2'}
    assert ds.sizes['sample'] == 2
    assert bool(ds['realized'].all())


def test_unrealizable_predictions_count_as_infinite(samples):
    bad = EquivalentElectricalParams(resistance=(170., 42.), inertance=(1., 137.), compliance=(3e-9, 3e-9))
    ds, summary = verify_model(constant_model(bad), samples, threads=2)
    assert summary['realized_fraction'] == 0.
    assert summary['median_aerf'] == np.inf
    assert summary['mean_aerf_realized'] is None
    assert np.all(np.isnan(ds['f1_realized'].values))


def test_write_verification(tmp_path, example_model, samples):
    ds, _ = verify_model(example_model, samples)
    path = tmp_path / 'verification.csv'
    write_verification(ds, str(path))
    df = pd.read_csv(path)
    assert len(df) == 2
    assert {'sample', 'aerf', 'R1_pred', 'C2_true'} <= set(df.columns)


def test_empty_samples(example_model, samples):
    with pytest.raises(ValidationError):
        verify_model(example_model, samples.iloc[:0])
