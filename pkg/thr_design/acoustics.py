"""Lumped-parameter model of the two-order Helmholtz resonator (THR) mounted
as a side branch of a duct.

The THR is an outer neck (order 1) opening into a first cavity, which is
connected through an inner neck (order 2) to a second cavity. Each order is
described either by its geometry (GeometricParams) or by its acoustic
circuit analogue (EquivalentElectricalParams): a resistance coefficient R
(the resistance is R*sqrt(omega)), an inertance M and a compliance C.

All quantities are SI. Frequencies are in Hz unless a name says omega.
"""
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from thr_design.errors import (
    DomainError,
    GeometryOutOfRangeError,
    NoPhysicalRootError,
    ResonanceOutOfBandError,
    ValidationError,
)
from thr_design.param_keys import CAVITY_RADIUS, EEP_ORDER, GP_ORDER, param_keys

logger = logging.getLogger(__name__)

DEFAULT_CROSS_SECTION = 0.01  # m^2, a 100 cm^2 duct
DEFAULT_BAND = (101., 600.)
SCAN_STEP = 0.1      # Hz
BISECT_XTOL = 1e-4   # Hz
CLASSIFY_OFFSET = 1. # Hz
ROOT_MATCH_RTOL = 1e-6
RANGE_RTOL = 1e-9


@dataclass(frozen=True)
class PhysicalConstants:
    """Air properties and end-correction factors.

    Args:
        air_density: float
            static air density rho0 (kg/m^3)
        sound_speed: float
            c0 (m/s)
        air_viscosity: float
            dynamic viscosity eta (Pa s)
        beta: tuple[float]
            end-correction factors of the two necks
    """
    air_density: float = 1.21
    sound_speed: float = 343.
    air_viscosity: float = 1.81e-5
    beta: tuple = (0.75, 1.05)

    def __post_init__(self):
        object.__setattr__(self, 'beta', tuple(float(b) for b in self.beta))
        if len(self.beta) != 2:
            raise DomainError(f"expected two correction factors, got {len(self.beta)}")
        for name in ('air_density', 'sound_speed', 'air_viscosity'):
            value = float(getattr(self, name))
            if not (np.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be strictly positive, got {value}")
            object.__setattr__(self, name, value)
        if not all(b > 0 for b in self.beta):
            raise DomainError(f"correction factors must be positive, got {self.beta}")

    @property
    def characteristic_impedance(self) -> float:
        """Z0 = rho0 c0 (Pa s/m)."""
        return self.air_density * self.sound_speed

    @property
    def viscous_factor(self) -> float:
        """sqrt(2 eta rho0), the factor shared by the resistance formulas."""
        return float(np.sqrt(2. * self.air_viscosity * self.air_density))

    def to_dict(self) -> dict:
        return {
            'air_density': self.air_density,
            'sound_speed': self.sound_speed,
            'air_viscosity': self.air_viscosity,
            'beta': list(self.beta),
        }


def load_constants(path: str) -> PhysicalConstants:
    """Read air properties from a JSON object. Accepted keys are
    air_density, sound_speed and air_viscosity; the correction factors are
    fixed by the resonator model and cannot be overridden."""
    try:
        with open(path, 'r') as file:
            values = json.load(file)
    except OSError as e:
        raise ValidationError(f"cannot read constants file {path}: {e.strerror}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}:{e.lineno}: invalid JSON ({e.msg})")
    if not isinstance(values, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    allowed = {'air_density', 'sound_speed', 'air_viscosity'}
    unknown = set(values) - allowed
    if unknown:
        raise ValidationError(f"{path}: unknown constant(s) {sorted(unknown)}")
    return PhysicalConstants(**{k: float(v) for k, v in values.items()})


def _pair(values, name):
    values = tuple(float(v) for v in np.atleast_1d(values))
    if len(values) == 1:
        values = values * 2
    if len(values) != 2:
        raise DomainError(f"{name} needs one value per order, got {len(values)}")
    return values


def _positive(values, name):
    if not all(np.isfinite(v) and v > 0 for v in values):
        raise DomainError(f"{name} must be strictly positive, got {values}")


@dataclass(frozen=True)
class GeometricParams:
    """Geometry of a two-order resonator, one value per order (m)."""
    neck_radius: tuple
    neck_length: tuple
    cavity_radius: tuple
    cavity_length: tuple

    def __post_init__(self):
        for name in ('neck_radius', 'neck_length', 'cavity_radius', 'cavity_length'):
            values = _pair(getattr(self, name), name)
            _positive(values, name)
            object.__setattr__(self, name, values)
        for i, (a, r) in enumerate(zip(self.neck_radius, self.cavity_radius), start=1):
            if a >= r:
                raise DomainError(f"neck radius a{i}={a} must be smaller than cavity radius r{i}={r}")

    @property
    def volume(self) -> tuple:
        """Cavity volumes pi r_i^2 h_i."""
        return tuple(np.pi * r**2 * h for r, h in zip(self.cavity_radius, self.cavity_length))

    def end_correction(self, pc: PhysicalConstants = None) -> tuple:
        """delta_i = (8 a_i / 3 pi)(2 - beta_i a_i / r_i)."""
        pc = pc or PhysicalConstants()
        return tuple(8. * a / (3. * np.pi) * (2. - b * a / r)
                     for a, r, b in zip(self.neck_radius, self.cavity_radius, pc.beta))

    def genome(self) -> np.ndarray:
        """[a1, l1, h1, a2, l2, h2]."""
        return np.array([self.neck_radius[0], self.neck_length[0], self.cavity_length[0],
                         self.neck_radius[1], self.neck_length[1], self.cavity_length[1]])

    @classmethod
    def from_genome(cls, genome, cavity_radius=CAVITY_RADIUS):
        g = np.asarray(genome, dtype=float)
        return cls(neck_radius=(g[0], g[3]), neck_length=(g[1], g[4]),
                   cavity_radius=cavity_radius, cavity_length=(g[2], g[5]))

    def to_dict(self) -> dict:
        """Keyed by a1, l1, h1, a2, l2, h2, r1, r2 (SI)."""
        out = dict(zip(GP_ORDER, self.genome().tolist()))
        out['r1'], out['r2'] = self.cavity_radius
        return out

    @classmethod
    def from_dict(cls, values: dict, cavity_radius=CAVITY_RADIUS):
        r = (values.get('r1', _pair(cavity_radius, 'cavity_radius')[0]),
             values.get('r2', _pair(cavity_radius, 'cavity_radius')[1]))
        return cls(neck_radius=(values['a1'], values['a2']),
                   neck_length=(values['l1'], values['l2']),
                   cavity_radius=r,
                   cavity_length=(values['h1'], values['h2']))


@dataclass(frozen=True)
class EquivalentElectricalParams:
    """Acoustic circuit analogue, one value per order.

    resistance is the coefficient R_i such that R_i sqrt(omega) is the
    acoustic resistance (Pa s/m^3).
    """
    resistance: tuple
    inertance: tuple
    compliance: tuple

    def __post_init__(self):
        for name in ('resistance', 'inertance', 'compliance'):
            values = _pair(getattr(self, name), name)
            _positive(values, name)
            object.__setattr__(self, name, values)

    def to_array(self) -> np.ndarray:
        """[R1, M1, C1, R2, M2, C2]."""
        return np.array([self.resistance[0], self.inertance[0], self.compliance[0],
                         self.resistance[1], self.inertance[1], self.compliance[1]])

    @classmethod
    def from_array(cls, values):
        v = np.asarray(values, dtype=float)
        return cls(resistance=(v[0], v[3]), inertance=(v[1], v[4]), compliance=(v[2], v[5]))

    def to_dict(self) -> dict:
        return dict(zip(EEP_ORDER, self.to_array().tolist()))

    @classmethod
    def from_dict(cls, values: dict):
        return cls.from_array([values[k] for k in EEP_ORDER])


@dataclass(frozen=True)
class ParamRanges:
    """Configured design ranges of geometry and circuit parameters."""
    neck_radius: tuple = param_keys['a']['range']
    neck_length: tuple = param_keys['l']['range']
    cavity_length: tuple = param_keys['h']['range']
    cavity_radius: float = CAVITY_RADIUS
    resistance: tuple = param_keys['R']['range']
    inertance: tuple = param_keys['M']['range']
    compliance: tuple = param_keys['C']['range']

    def genome_bounds(self) -> (np.ndarray, np.ndarray):
        """Lower and upper bounds in genome order a1, l1, h1, a2, l2, h2."""
        lo = [self.neck_radius[0], self.neck_length[0], self.cavity_length[0]] * 2
        hi = [self.neck_radius[1], self.neck_length[1], self.cavity_length[1]] * 2
        return np.array(lo, dtype=float), np.array(hi, dtype=float)

    def eep_bounds(self) -> (np.ndarray, np.ndarray):
        """Lower and upper bounds in order R1, M1, C1, R2, M2, C2."""
        lo = [self.resistance[0], self.inertance[0], self.compliance[0]] * 2
        hi = [self.resistance[1], self.inertance[1], self.compliance[1]] * 2
        return np.array(lo, dtype=float), np.array(hi, dtype=float)

    @staticmethod
    def _within(values, lo, hi) -> bool:
        values = np.asarray(values)
        return bool(np.all((values >= lo * (1 - RANGE_RTOL)) & (values <= hi * (1 + RANGE_RTOL))))

    def order_contains(self, a: float, l: float, h: float) -> bool:
        return (self._within(a, *self.neck_radius)
                and self._within(l, *self.neck_length)
                and self._within(h, *self.cavity_length))

    def gp_contains(self, gp: GeometricParams) -> bool:
        return self._within(gp.genome(), *self.genome_bounds())

    def eep_contains(self, eep: EquivalentElectricalParams) -> bool:
        return self._within(eep.to_array(), *self.eep_bounds())

    def to_dict(self) -> dict:
        return {
            'neck_radius': list(self.neck_radius),
            'neck_length': list(self.neck_length),
            'cavity_length': list(self.cavity_length),
            'cavity_radius': self.cavity_radius,
            'resistance': list(self.resistance),
            'inertance': list(self.inertance),
            'compliance': list(self.compliance),
        }


def forward_arrays(a, l, r, h, pc: PhysicalConstants = None):
    """Vectorized geometry to circuit map. Inputs broadcast against each
    other with the order on the last axis (length 2).

    Returns:
        (R, M, C) arrays of the broadcast shape
    """
    pc = pc or PhysicalConstants()
    a, l, r, h = (np.asarray(x, dtype=float) for x in (a, l, r, h))
    beta = np.asarray(pc.beta)
    delta = 8. * a / (3. * np.pi) * (2. - beta * a / r)
    R = l * pc.viscous_factor / (np.pi * a**3)
    M = pc.air_density * (l + delta) / (np.pi * a**2)
    C = np.pi * r**2 * h / (pc.air_density * pc.sound_speed**2)
    return R, M, C


def gp_to_eep(gp: GeometricParams, pc: PhysicalConstants = None) -> EquivalentElectricalParams:
    """Circuit parameters of a geometry:
    R_i = l_i sqrt(2 eta rho0) / (pi a_i^3),
    M_i = rho0 (l_i + delta_i) / (pi a_i^2),
    C_i = V_i / (rho0 c0^2).
    """
    R, M, C = forward_arrays(gp.neck_radius, gp.neck_length, gp.cavity_radius,
                             gp.cavity_length, pc)
    return EquivalentElectricalParams(resistance=R, inertance=M, compliance=C)


def neck_quadratic(R: float, M: float, r: float, beta: float, pc: PhysicalConstants = None):
    """Coefficients (A, B, C) of A a^2 + B a + C = 0 for the neck radius of
    one order, obtained by eliminating l between the R and M formulas."""
    pc = pc or PhysicalConstants()
    rho = pc.air_density
    A = rho * R / pc.viscous_factor
    B = -(8. * rho * beta / (3. * r * np.pi**2) + M)
    C = 16. * rho / (3. * np.pi**2)
    return A, B, C


def _order_roots(order, R, M, C, r, pc):
    """Admissible (a, l, h) triples of one order (0 or 1), ascending in a."""
    beta = pc.beta[order]
    A, B, Cq = neck_quadratic(R, M, r, beta, pc)
    disc = B**2 - 4. * A * Cq
    if disc < 0:
        raise NoPhysicalRootError(
            f"no physical neck radius for order {order + 1}: negative discriminant "
            f"{disc:.6g} for R={R:.6g}, M={M:.6g}")
    # B < 0, so q > 0 and both roots are positive
    q = -0.5 * (B - np.sqrt(disc))
    roots = sorted({q / A, Cq / q})
    h = C * pc.air_density * pc.sound_speed**2 / (np.pi * r**2)
    out = []
    for a in roots:
        if not 0 < a < r:
            continue
        l = np.pi * R * a**3 / pc.viscous_factor
        delta = 8. * a / (3. * np.pi) * (2. - beta * a / r)
        R_fwd = l * pc.viscous_factor / (np.pi * a**3)
        M_fwd = pc.air_density * (l + delta) / (np.pi * a**2)
        if abs(R_fwd - R) <= ROOT_MATCH_RTOL * R and abs(M_fwd - M) <= ROOT_MATCH_RTOL * M:
            out.append((float(a), float(l), float(h)))
    if not out:
        raise NoPhysicalRootError(
            f"no physical neck radius for order {order + 1}: both roots exceed r{order + 1}={r}")
    return out


def _cavity_radii(r_fixed):
    r = _pair(r_fixed, 'cavity_radius')
    _positive(r, 'cavity_radius')
    return r


def gp_candidates(
        eep: EquivalentElectricalParams,
        r_fixed=CAVITY_RADIUS,
        pc: PhysicalConstants = None,
    ) -> list[GeometricParams]:
    """All geometries that reproduce eep exactly. The neck-radius
    quadratic has two positive roots, so there are up to two candidates
    per order and up to four geometries in total."""
    pc = pc or PhysicalConstants()
    r = _cavity_radii(r_fixed)
    per_order = []
    for i in range(2):
        roots = _order_roots(i, eep.resistance[i], eep.inertance[i], eep.compliance[i], r[i], pc)
        per_order.append(roots)
    return [GeometricParams(neck_radius=(o1[0], o2[0]), neck_length=(o1[1], o2[1]),
                            cavity_radius=r, cavity_length=(o1[2], o2[2]))
            for o1 in per_order[0] for o2 in per_order[1]]


def eep_to_gp(
        eep: EquivalentElectricalParams,
        r_fixed=CAVITY_RADIUS,
        pc: PhysicalConstants = None,
        ranges: ParamRanges = None,
        allow_out_of_range: bool = False,
    ) -> GeometricParams:
    """Geometry from circuit parameters.

    Per order, the root whose (a, l, h) lies inside the configured ranges is
    kept; if both do, the smaller neck radius wins. When neither root is in
    range a GeometryOutOfRangeError is raised, unless allow_out_of_range is
    set, in which case the smaller admissible root is returned.

    Args:
        eep: EquivalentElectricalParams
            circuit parameters to invert
        r_fixed: float or tuple[float]
            cavity radius of each order (m)
        pc: PhysicalConstants
        ranges: ParamRanges
            design ranges used for root selection, defaults when None
        allow_out_of_range: bool
            accept geometry outside the design ranges
    """
    pc = pc or PhysicalConstants()
    ranges = ranges or ParamRanges()
    r = _cavity_radii(r_fixed)
    chosen = []
    for i in range(2):
        roots = _order_roots(i, eep.resistance[i], eep.inertance[i], eep.compliance[i], r[i], pc)
        in_range = [root for root in roots if ranges.order_contains(*root)]
        if in_range:
            chosen.append(in_range[0])
        elif allow_out_of_range:
            chosen.append(roots[0])
        else:
            raise GeometryOutOfRangeError(
                f"geometry out of range for order {i + 1}: candidates "
                + ", ".join(f"(a={a:.4g}, l={l:.4g}, h={h:.4g})" for a, l, h in roots))
    return GeometricParams(neck_radius=(chosen[0][0], chosen[1][0]),
                           neck_length=(chosen[0][1], chosen[1][1]),
                           cavity_radius=r,
                           cavity_length=(chosen[0][2], chosen[1][2]))


@dataclass(frozen=True, eq=False)
class BranchImpedance:
    """Acoustic impedance of the side branch, Z_b = R_b + j X_b (Pa s/m^3)."""
    frequency: np.ndarray
    real_part: np.ndarray
    imag_part: np.ndarray

    @property
    def complex(self):
        return self.real_part + 1j * self.imag_part

    @property
    def magnitude(self):
        return np.hypot(self.real_part, self.imag_part)


def branch_impedance(eep: EquivalentElectricalParams, f):
    """Complex impedance of the THR at frequency f (scalar or array):
    Z = R1 sqrt(w) + j w M1 + 1 / (j w C1 + 1 / (R2 sqrt(w) + j w M2 + 1 / (j w C2)))."""
    f = np.asarray(f, dtype=float)
    if np.any(~(f > 0)):
        raise DomainError("frequency must be strictly positive")
    w = 2. * np.pi * f
    sw = np.sqrt(w)
    (R1, R2), (M1, M2), (C1, C2) = eep.resistance, eep.inertance, eep.compliance
    z2 = R2 * sw + 1j * w * M2 + 1. / (1j * w * C2)
    return R1 * sw + 1j * w * M1 + 1. / (1j * w * C1 + 1. / z2)


def impedance(eep: EquivalentElectricalParams, f) -> BranchImpedance:
    """Branch impedance split into real and imaginary parts."""
    z = branch_impedance(eep, f)
    return BranchImpedance(frequency=np.asarray(f, dtype=float), real_part=z.real, imag_part=z.imag)


def stl_from_impedance(z, cross_section: float = DEFAULT_CROSS_SECTION, pc: PhysicalConstants = None):
    """t = 10 log10([X_b^2 + (Z0/2S + R_b)^2] / [R_b^2 + X_b^2])."""
    pc = pc or PhysicalConstants()
    if not cross_section > 0:
        raise DomainError(f"duct cross-section must be positive, got {cross_section}")
    half = pc.characteristic_impedance / (2. * cross_section)
    R, X = np.real(z), np.imag(z)
    return 10. * np.log10((X**2 + (half + R)**2) / (R**2 + X**2))


def stl_side_branch(
        eep: EquivalentElectricalParams,
        f,
        cross_section: float = DEFAULT_CROSS_SECTION,
        pc: PhysicalConstants = None,
    ):
    """Sound transmission loss (dB) of the THR as a duct side branch."""
    t = stl_from_impedance(branch_impedance(eep, f), cross_section, pc)
    return float(t) if np.ndim(t) == 0 else t


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency grid start + i*step, i = 0..count-1 (Hz)."""
    start: float = 101.
    step: float = 1.
    count: int = 500

    def __post_init__(self):
        if not (self.start > 0 and self.step > 0 and int(self.count) >= 1):
            raise ValidationError(f"invalid frequency grid {self}")
        object.__setattr__(self, 'count', int(self.count))

    @property
    def frequencies(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    def to_dict(self) -> dict:
        return {'start': self.start, 'step': self.step, 'count': self.count}


@dataclass(frozen=True, eq=False)
class StlSpectrum:
    """Transmission loss sampled on a uniform grid."""
    values: np.ndarray
    start_freq: float = 101.
    step: float = 1.

    @property
    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.start_freq, self.step, len(self.values))

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.frequencies

    def __len__(self):
        return len(self.values)


def stl_spectrum(
        eep: EquivalentElectricalParams,
        cross_section: float = DEFAULT_CROSS_SECTION,
        pc: PhysicalConstants = None,
        grid: FrequencyGrid = None,
    ) -> StlSpectrum:
    """STL of the side branch on a frequency grid (default 101-600 Hz, 1 Hz)."""
    grid = grid or FrequencyGrid()
    values = stl_side_branch(eep, grid.frequencies, cross_section, pc)
    return StlSpectrum(values=np.atleast_1d(values), start_freq=grid.start, step=grid.step)


@dataclass(frozen=True)
class ResonanceReport:
    """The two resonances (STL peaks) of a THR inside a band."""
    frequencies: tuple
    stl: tuple
    branch_resistance: tuple = ()
    anti_resonances: tuple = field(default=())

    @property
    def angular(self) -> tuple:
        return tuple(2. * np.pi * f for f in self.frequencies)

    def to_dict(self) -> dict:
        return {
            'f1': self.frequencies[0],
            'f2': self.frequencies[1],
            'stl_f1': self.stl[0],
            'stl_f2': self.stl[1],
            'anti_resonances': list(self.anti_resonances),
        }


def reactance_zeros(eep: EquivalentElectricalParams, band=DEFAULT_BAND,
                    scan_step: float = SCAN_STEP, xtol: float = BISECT_XTOL) -> np.ndarray:
    """Zeros of X_b inside band: sign-change scan at scan_step followed by
    bisection of every bracket down to a width below xtol."""
    lo, hi = float(band[0]), float(band[1])
    if not 0 < lo < hi:
        raise ValidationError(f"invalid band [{lo}, {hi}]")
    n = int(np.ceil((hi - lo) / scan_step))
    f = np.linspace(lo, hi, n + 1)
    x = branch_impedance(eep, f).imag
    sign = np.sign(x)
    idx = np.nonzero(sign[:-1] * sign[1:] <= 0)[0]
    if idx.size == 0:
        return np.empty(0)

    a, b = f[idx].copy(), f[idx + 1].copy()
    sa = sign[idx].copy()
    while np.max(b - a) >= xtol:
        m = 0.5 * (a + b)
        sm = np.sign(branch_impedance(eep, m).imag)
        right = (sm == sa) & (sa != 0)
        a = np.where(right, m, a)
        b = np.where(right, b, m)
    roots = 0.5 * (a + b)

    # a zero sitting exactly on a scan point is bracketed twice
    keep = np.ones(roots.size, dtype=bool)
    keep[1:] = np.diff(roots) > 2 * xtol
    return roots[keep]


def resonant_frequencies(
        eep: EquivalentElectricalParams,
        cross_section: float = DEFAULT_CROSS_SECTION,
        pc: PhysicalConstants = None,
        band=DEFAULT_BAND,
        scan_step: float = SCAN_STEP,
        xtol: float = BISECT_XTOL,
    ) -> ResonanceReport:
    """Resonant frequencies of the THR within band.

    Every zero of the reactance X_b is classified by comparing |Z_b| at the
    zero with |Z_b| one hertz on either side: a local minimum is a
    resonance (STL peak), otherwise it is an anti-resonance (STL close to 0).

    Raises:
        ResonanceOutOfBandError if fewer than two resonances lie in band
    """
    zeros = reactance_zeros(eep, band, scan_step, xtol)
    resonances, anti = [], []
    for f0 in zeros:
        below = max(f0 - CLASSIFY_OFFSET, 0.5 * f0)
        mag = np.abs(branch_impedance(eep, np.array([below, f0, f0 + CLASSIFY_OFFSET])))
        if mag[1] < mag[0] and mag[1] < mag[2]:
            resonances.append(float(f0))
        else:
            anti.append(float(f0))
    if len(resonances) < 2:
        raise ResonanceOutOfBandError(resonances, band)
    if len(resonances) > 2:
        logger.debug(f"{len(resonances)} resonances found, keeping the lowest two")
    freqs = tuple(resonances[:2])
    z = branch_impedance(eep, np.array(freqs))
    stl = stl_from_impedance(z, cross_section, pc)
    return ResonanceReport(frequencies=freqs, stl=tuple(float(t) for t in stl),
                           branch_resistance=tuple(float(r) for r in z.real),
                           anti_resonances=tuple(anti))


def eq4_coefficients(eep: EquivalentElectricalParams) -> np.ndarray:
    """Coefficients of the six-degree resonance polynomial in omega, highest
    degree first."""
    (R1, R2), (M1, M2), (C1, C2) = eep.resistance, eep.inertance, eep.compliance
    return np.array([
        M1 * C1**2 * M2**2,
        M1 * C1**2 * R2**2,
        -C1 * M2 * (2. * M1 * (C1 + C2) / C2 + M2),
        -C1 * R2**2,
        M1 * (C1 / C2)**2 + 2. * (M1 + M2) * C1 / C2 + M1 + M2,
        0.,
        -(C1 + C2) / C2**2,
    ])


def _eq4_terms(eep, omega0):
    powers = np.array([omega0**k for k in range(6, -1, -1)])
    return eq4_coefficients(eep) * powers


def eq4_residual(eep: EquivalentElectricalParams, omega0: float, relative: bool = False) -> float:
    """Six-degree resonance polynomial evaluated at omega0 (rad/s).

    Only a cross-check of the numerical zero search. With relative=True the
    residual is divided by the largest term magnitude at omega0.
    """
    if not omega0 > 0:
        raise DomainError(f"angular frequency must be positive, got {omega0}")
    terms = _eq4_terms(eep, omega0)
    residual = float(np.sum(terms))
    if relative:
        return residual / float(np.max(np.abs(terms)))
    return residual


def aerf(
        gp: GeometricParams,
        targets: tuple,
        cross_section: float = DEFAULT_CROSS_SECTION,
        pc: PhysicalConstants = None,
        band=DEFAULT_BAND,
    ) -> float:
    """Average error of the resonant frequencies against targets (Hz).

    Returns numpy.inf when the geometry does not have two resonances in band.
    """
    try:
        report = resonant_frequencies(gp_to_eep(gp, pc), cross_section, pc, band)
    except ResonanceOutOfBandError:
        return np.inf
    f1, f2 = report.frequencies
    return 0.5 * (abs(f1 - targets[0]) + abs(f2 - targets[1]))


def spectrum_peaks(spectrum: StlSpectrum, prominence: float = 3.) -> np.ndarray:
    """Frequencies of the peaks of a sampled spectrum with at least the
    given prominence (dB)."""
    idx, _ = find_peaks(np.asarray(spectrum.values), prominence=prominence)
    return spectrum.frequencies[idx]
