"""Invariant suites run by the `check` subcommand.

gradients: analytic gradients of random tiny networks against central
    finite differences
roundtrip: geometry -> EEP -> geometry for random in-range geometries
resonance: resonances from the reactance zeros against a dense STL sweep

With expect_fail a known fault is injected into the checked quantity, which
every suite must then report.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from thr_design.acoustics import (
    DEFAULT_CROSS_SECTION,
    EquivalentElectricalParams,
    ParamRanges,
    PhysicalConstants,
    branch_impedance,
    gp_candidates,
    eep_to_gp,
    gp_to_eep,
    stl_side_branch,
)
from thr_design.data import evaluate_candidate, sample_gp
from thr_design.errors import DomainError
from thr_design.nn import TrainConfig, backward, build_model, forward
from thr_design.layers import dropout_mask
from thr_design.utils import child_rng

logger = logging.getLogger(__name__)

SUITES = ('gradients', 'roundtrip', 'resonance')
FD_STEP = 1e-5
GRAD_RTOL = 1e-4
GRAD_ATOL = 1e-7
ROUNDTRIP_RTOL = 1e-9
PEAK_TOL = 0.1      # Hz
RESONANCE_STL_TOL = 1e-6  # dB


@dataclass
class CheckResult:
    name: str
    n_cases: int = 0
    failures: list = field(default_factory=list)
    worst: float = 0.

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {'name': self.name, 'passed': self.passed, 'n_cases': self.n_cases,
                'n_failures': len(self.failures), 'failures': self.failures[:10], 'worst': self.worst}


def numerical_gradient(f, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central differences of the scalar function f with respect to x,
    perturbing x in place."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=['multi_index'])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        plus = f()
        x[idx] = old - h
        minus = f()
        x[idx] = old
        grad[idx] = (plus - minus) / (2. * h)
    return grad


def gradient_error(analytic, numeric) -> float:
    """Largest |a - n| / (rtol max(|a|, |n|) + atol); <= 1 passes."""
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = GRAD_RTOL * np.maximum(np.abs(analytic), np.abs(numeric)) + GRAD_ATOL
    return float(np.max(np.abs(analytic - numeric) / scale))


def check_gradients(n_cases: int = 100, seed: int = 0, expect_fail: bool = False) -> CheckResult:
    result = CheckResult('gradients')
    for k in range(n_cases):
        rng = child_rng(seed, k)
        widths = [int(w) for w in rng.integers(2, 6, size=int(rng.integers(2, 4)) + 1)]
        dropout = float(rng.choice([0., 0.3]))
        model = build_model(widths, TrainConfig(dropout=dropout, hidden=widths[1:-1]), seed=int(rng.integers(2**31)))
        for p in model.params.values():
            p += 0.1 * rng.standard_normal(p.shape)
        x = rng.standard_normal((3, widths[0]))
        g = rng.standard_normal((3, widths[-1]))
        masks = [dropout_mask((3, w), dropout, rng) for w in widths[1:-1]]

        def loss():
            out, _ = forward(model, x, 'train', masks=masks)
            return float(np.sum(out * g))

        _, cache = forward(model, x, 'train', masks=masks)
        grads = backward(model, cache, g)
        if expect_fail:
            grads = {name: 1.01 * v + 1e-3 for name, v in grads.items()}
        for name, p in model.params.items():
            err = gradient_error(grads[name], numerical_gradient(loss, p))
            result.worst = max(result.worst, err)
            if err > 1.:
                result.failures.append({'case': k, 'param': name, 'error': err})
        result.n_cases += 1
    return result


def check_roundtrip(n_cases: int = 10000, seed: int = 0, pc: PhysicalConstants = None,
                    ranges: ParamRanges = None, expect_fail: bool = False) -> CheckResult:
    ranges = ranges or ParamRanges()
    result = CheckResult('roundtrip')
    for k in range(n_cases):
        gp = sample_gp(child_rng(seed, k), ranges)
        eep = gp_to_eep(gp, pc)
        if expect_fail:
            eep = EquivalentElectricalParams.from_array(eep.to_array() * (1. + 1e-6))
        try:
            candidates = gp_candidates(eep, pc=pc)
            chosen = gp_to_eep(eep_to_gp(eep, pc=pc, ranges=ranges, allow_out_of_range=True), pc)
        except DomainError as e:
            result.failures.append({'case': k, 'error': str(e)})
            result.n_cases += 1
            continue
        errors = [np.max(np.abs(c.genome() - gp.genome()) / gp.genome()) for c in candidates]
        eep_err = np.max(np.abs(chosen.to_array() - eep.to_array()) / eep.to_array())
        err = max(min(errors), eep_err)
        result.worst = max(result.worst, float(err))
        if err > ROUNDTRIP_RTOL:
            result.failures.append({'case': k, 'error': float(err)})
        result.n_cases += 1
    return result


def _refined_zero(eep, f0, width=2e-4):
    """Reactance zero near f0 to machine precision."""
    def reactance(f):
        return float(branch_impedance(eep, np.array([f]))[0].imag)
    return brentq(reactance, f0 - width, f0 + width, xtol=1e-12)


def _dense_peak(eep, f0, cross_section, pc, half_width=1., step=1e-3):
    f = np.arange(f0 - half_width, f0 + half_width + step / 2, step)
    return f[np.argmax(stl_side_branch(eep, f, cross_section, pc))]


def check_resonance(n_cases: int = 1000, seed: int = 0, cross_section: float = DEFAULT_CROSS_SECTION,
                    pc: PhysicalConstants = None, ranges: ParamRanges = None, expect_fail: bool = False,
                    max_draws: int = None) -> CheckResult:
    """Accepted samples only; at most max_draws (default 200 n_cases) draws."""
    pc = pc or PhysicalConstants()
    ranges = ranges or ParamRanges()
    result = CheckResult('resonance')
    max_draws = max_draws or 200 * n_cases
    k = 0
    while result.n_cases < n_cases and k < max_draws:
        accepted, sample = evaluate_candidate(sample_gp(child_rng(seed, k), ranges), ranges,
                                              cross_section=cross_section, pc=pc, counter=k)
        k += 1
        if not accepted.accepted:
            continue
        freqs = np.array([_refined_zero(sample.eep, f) for f in sample.resonances.frequencies])
        if expect_fail:
            freqs = freqs + 0.5
        peaks = np.array([_dense_peak(sample.eep, f, cross_section, pc) for f in freqs])
        z = branch_impedance(sample.eep, freqs)
        zc = pc.characteristic_impedance / (2. * cross_section)
        at_zero = 10. * np.log10((zc + z.real)**2 / z.real**2)
        stl_err = np.max(np.abs(stl_side_branch(sample.eep, freqs, cross_section, pc) - at_zero))
        peak_err = float(np.max(np.abs(peaks - freqs)))
        result.worst = max(result.worst, peak_err)
        if peak_err > PEAK_TOL or stl_err > RESONANCE_STL_TOL:
            result.failures.append({'case': k - 1, 'peak_offset': peak_err, 'stl_error': float(stl_err)})
        result.n_cases += 1
    return result


def run_checks(suites=SUITES, n_cases: int = None, seed: int = 0, pc: PhysicalConstants = None,
               expect_fail: bool = False) -> list:
    """Run the named suites; n_cases overrides every suite's default size."""
    runners = {
        'gradients': lambda n: check_gradients(n or 100, seed, expect_fail),
        'roundtrip': lambda n: check_roundtrip(n or 10000, seed, pc, expect_fail=expect_fail),
        'resonance': lambda n: check_resonance(n or 1000, seed, pc=pc, expect_fail=expect_fail),
    }
    results = []
    for name in suites:
        result = runners[name](n_cases)
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"check {name}: {'passed' if result.passed else 'FAILED'} "
                          f"({len(result.failures)}/{result.n_cases} failing, worst {result.worst:.3g})")
        results.append(result)
    return results
