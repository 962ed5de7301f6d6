import numpy as np
import pytest

from thr_design.acoustics import GeometricParams, gp_to_eep, resonant_frequencies
from thr_design.data import BinSpec, compute_normalization, generate_dataset, write_dataset
from thr_design.nn import TrainConfig, build_model


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run slow acceptance tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long acceptance runs, enabled with --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


# Resonances near 131 Hz and 317 Hz, both above 10 dB in a 0.01 m^2 duct
EXAMPLE_GENOME = [0.01, 0.02, 0.06, 0.005, 0.008, 0.06]


@pytest.fixture(scope='session')
def example_gp():
    return GeometricParams.from_genome(EXAMPLE_GENOME)


@pytest.fixture(scope='session')
def example_eep(example_gp):
    return gp_to_eep(example_gp)


@pytest.fixture(scope='session')
def example_report(example_eep):
    return resonant_frequencies(example_eep)


def constant_model(eep, count=500, seed=0):
    """Model whose output layer ignores its input and always predicts eep."""
    rng = np.random.default_rng(seed)
    stats = compute_normalization(rng.uniform(0., 30., size=(20, count)))
    model = build_model([count, 8, 6], TrainConfig(hidden=(8,), dropout=0.), stats)
    params = dict(model.params)
    params['W2'] = np.zeros_like(params['W2'])
    params['b2'] = stats.normalize_outputs(eep.to_array())
    model.set_params(params)
    return model


@pytest.fixture
def example_model(example_eep):
    return constant_model(example_eep)


@pytest.fixture(scope='session')
def small_bins():
    return BinSpec(band_width=250., band_range=(100., 600.), samples_per_group=12, max_attempts_per_group=6000)


@pytest.fixture(scope='session')
def small_dataset(small_bins):
    return generate_dataset(small_bins, seed=3)


@pytest.fixture(scope='session')
def small_dataset_file(small_dataset, tmp_path_factory):
    path = tmp_path_factory.mktemp('data') / 'dataset.csv'
    write_dataset(small_dataset[0], str(path))
    return str(path)
