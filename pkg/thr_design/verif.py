import logging

import numpy as np
import xarray as xr

from thr_design import __version__
from thr_design.acoustics import (
    DEFAULT_CROSS_SECTION,
    EquivalentElectricalParams,
    ParamRanges,
    PhysicalConstants,
    eep_to_gp,
    gp_to_eep,
    resonant_frequencies,
)
from thr_design.data import dataset_arrays
from thr_design.errors import DomainError, ResonanceOutOfBandError, ValidationError
from thr_design.nn import MLPModel, predict_batch
from thr_design.param_keys import EEP_ORDER
from thr_design.utils import thread_map

logger = logging.getLogger(__name__)


def _realize(values, f_true, cross_section, pc, ranges):
    """(realized f1, f2, aerf) of one predicted EEP set; NaN frequencies and
    infinite AERF when the prediction cannot be realized."""
    try:
        gp = eep_to_gp(EquivalentElectricalParams.from_array(values), ranges.cavity_radius, pc,
                       ranges, allow_out_of_range=True)
        f1, f2 = resonant_frequencies(gp_to_eep(gp, pc), cross_section, pc).frequencies
    except (DomainError, ResonanceOutOfBandError):
        return np.nan, np.nan, np.inf
    return f1, f2, 0.5 * (abs(f1 - f_true[0]) + abs(f2 - f_true[1]))


def verify_model(
        model: MLPModel,
        samples,
        cross_section: float = DEFAULT_CROSS_SECTION,
        pc: PhysicalConstants = None,
        ranges: ParamRanges = None,
        threads: int = 1,
    ) -> (xr.Dataset, dict):
    """Evaluate the surrogate on held-out samples: true spectrum -> predicted
    EEPs -> geometry -> physical resonances, compared with the true
    resonances of each sample.

    Args:
        model: MLPModel
            trained surrogate
        samples: pandas.DataFrame
            held-out dataset rows
        cross_section: float
            duct cross-section (m^2)
        threads: int
            number of worker threads for the forward evaluations

    Returns:
        ds: xarray.Dataset
            per-sample table along dimension 'sample'
        summary: dict
            median AERF, realized fraction and per-EEP normalized MSE
    """
    ranges = ranges or ParamRanges()
    if len(samples) == 0:
        raise ValidationError("no samples to verify")
    spectra, eep_true = dataset_arrays(samples)
    f_true = samples[['f1', 'f2']].to_numpy(dtype=float)
    eep_pred = predict_batch(model, spectra)

    realized = np.array(thread_map(
        lambda k: _realize(eep_pred[k], f_true[k], cross_section, pc, ranges), range(len(f_true)), threads))

    stats = model.norm_stats
    sq_err = (stats.normalize_outputs(eep_pred) - stats.normalize_outputs(eep_true))**2
    ok = np.isfinite(realized[:, 2])

    ds = xr.Dataset(
        data_vars={
            'f1_true': ('sample', f_true[:, 0]),
            'f2_true': ('sample', f_true[:, 1]),
            'f1_realized': ('sample', realized[:, 0]),
            'f2_realized': ('sample', realized[:, 1]),
            'aerf': ('sample', realized[:, 2]),
            'realized': ('sample', ok),
            'eep_pred': (('sample', 'eep'), eep_pred),
            'eep_true': (('sample', 'eep'), eep_true),
        },
        coords={'sample': np.asarray(samples.index), 'eep': EEP_ORDER},
        attrs={'units': 'Hz', 'thr_design_version': __version__},
    )
    summary = {
        'n_samples': int(len(f_true)),
        'realized_fraction': float(ok.mean()),
        'median_aerf': float(np.median(realized[:, 2])),
        'mean_aerf_realized': float(np.mean(realized[ok, 2])) if ok.any() else None,
        'normalized_mse': float(sq_err.mean()),
        'normalized_mse_per_eep': dict(zip(EEP_ORDER, sq_err.mean(axis=0).tolist())),
    }
    logger.info(f"verified {summary['n_samples']} samples: median AERF {summary['median_aerf']:.3g} Hz, "
                f"{100 * summary['realized_fraction']:.1f}% realized")
    return ds, summary


def write_verification(ds: xr.Dataset, path: str) -> None:
    """Per-sample CSV with one column per predicted and true EEP."""
    df = ds[['f1_true', 'f2_true', 'f1_realized', 'f2_realized', 'aerf', 'realized']].to_dataframe()
    for name in EEP_ORDER:
        df[f"{name}_pred"] = ds['eep_pred'].sel(eep=name).values
        df[f"{name}_true"] = ds['eep_true'].sel(eep=name).values
    df.reset_index().to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
