"""Plane-wave transfer matrices of ducts carrying resonator side branches.

Two-port convention: [p_in, U_in] = T [p_out, U_out] with pressure p and
volume velocity U. Networks are cascaded source side first.
"""
import logging
from dataclasses import dataclass

import numpy as np

from thr_design.acoustics import (
    DEFAULT_CROSS_SECTION,
    EquivalentElectricalParams,
    FrequencyGrid,
    GeometricParams,
    PhysicalConstants,
    StlSpectrum,
    branch_impedance,
    gp_to_eep,
)
from thr_design.errors import DomainError, InputFileError
from thr_design.param_keys import EEP_ORDER, GP_ORDER, from_cli, to_cli
from thr_design.utils import read_keyvalue

logger = logging.getLogger(__name__)

DEFAULT_SPACING = 0.1  # m between resonators of a filter
CAVITY_KEYS = ['r1', 'r2']


@dataclass(frozen=True)
class StraightSegment:
    """Lossless duct segment of length L (m)."""
    length: float

    def __post_init__(self):
        if not (np.isfinite(self.length) and self.length >= 0):
            raise DomainError(f"segment length must be non-negative, got {self.length}")


@dataclass(frozen=True)
class SideBranch:
    """Two-order resonator mounted on the duct wall."""
    eep: EquivalentElectricalParams
    gp: GeometricParams = None


@dataclass(frozen=True)
class DuctNetwork:
    """Duct of cross-section S (m^2) with an ordered list of elements."""
    cross_section: float
    elements: tuple

    def __post_init__(self):
        object.__setattr__(self, 'elements', tuple(self.elements))
        if not self.cross_section > 0:
            raise DomainError(f"cross-section must be positive, got {self.cross_section}")
        if len(self.elements) == 0:
            raise DomainError("a duct network needs at least one element")

    def reversed(self):
        return DuctNetwork(self.cross_section, tuple(reversed(self.elements)))

    def side_branches(self) -> list:
        return [e for e in self.elements if isinstance(e, SideBranch)]


class TransferMatrix:
    """Stack of 2x2 complex matrices, one per frequency."""

    def __init__(self, values: np.ndarray) -> None:
        values = np.asarray(values, dtype=complex)
        if values.shape[-2:] != (2, 2):
            raise DomainError(f"transfer matrix needs trailing shape (2, 2), got {values.shape}")
        self.values = values

    @classmethod
    def identity(cls, n: int = 1):
        return cls(np.broadcast_to(np.eye(2, dtype=complex), (n, 2, 2)).copy())

    @property
    def t11(self):
        return self.values[..., 0, 0]

    @property
    def t12(self):
        return self.values[..., 0, 1]

    @property
    def t21(self):
        return self.values[..., 1, 0]

    @property
    def t22(self):
        return self.values[..., 1, 1]

    def det(self):
        return self.t11 * self.t22 - self.t12 * self.t21

    def __matmul__(self, other):
        return TransferMatrix(np.matmul(self.values, other.values))

    def __repr__(self):
        return f"TransferMatrix(shape={self.values.shape})"


def element_matrix(element, f, cross_section: float = DEFAULT_CROSS_SECTION,
                   pc: PhysicalConstants = None) -> TransferMatrix:
    """Transfer matrix of one element at frequencies f (Hz).

    StraightSegment: [[cos kL, j Z0/S sin kL], [j S/Z0 sin kL, cos kL]].
    SideBranch: [[1, 0], [1/Z_b, 1]].
    """
    pc = pc or PhysicalConstants()
    f = np.atleast_1d(np.asarray(f, dtype=float))
    if np.any(~(f > 0)):
        raise DomainError("frequency must be strictly positive")
    out = np.zeros((f.size, 2, 2), dtype=complex)
    if isinstance(element, StraightSegment):
        zc = pc.characteristic_impedance / cross_section
        kl = 2. * np.pi * f / pc.sound_speed * element.length
        out[:, 0, 0] = np.cos(kl)
        out[:, 0, 1] = 1j * zc * np.sin(kl)
        out[:, 1, 0] = 1j * np.sin(kl) / zc
        out[:, 1, 1] = np.cos(kl)
    elif isinstance(element, SideBranch):
        out[:, 0, 0] = 1.
        out[:, 1, 0] = 1. / branch_impedance(element.eep, f)
        out[:, 1, 1] = 1.
    else:
        raise DomainError(f"unknown duct element {element!r}")
    return TransferMatrix(out)


def cascade(network: DuctNetwork, f, pc: PhysicalConstants = None) -> TransferMatrix:
    """Ordered product of the element matrices, source side first."""
    f = np.atleast_1d(np.asarray(f, dtype=float))
    total = TransferMatrix.identity(f.size)
    for element in network.elements:
        total = total @ element_matrix(element, f, network.cross_section, pc)
    return total


def stl_from_matrix(T: TransferMatrix, cross_section: float = DEFAULT_CROSS_SECTION,
                    pc: PhysicalConstants = None):
    """Four-pole transmission loss between anechoic terminations,
    TL = 20 log10(|T11 + T12 S/Z0 + T21 Z0/S + T22| / 2)."""
    pc = pc or PhysicalConstants()
    zc = pc.characteristic_impedance / cross_section
    tl = 20. * np.log10(np.abs(T.t11 + T.t12 / zc + T.t21 * zc + T.t22) / 2.)
    return float(tl) if np.ndim(tl) == 0 else tl


def network_spectrum(network: DuctNetwork, grid: FrequencyGrid = None,
                     pc: PhysicalConstants = None) -> StlSpectrum:
    """Transmission loss of the whole network on a frequency grid."""
    grid = grid or FrequencyGrid()
    T = cascade(network, grid.frequencies, pc)
    values = stl_from_matrix(T, network.cross_section, pc)
    return StlSpectrum(values=np.atleast_1d(values), start_freq=grid.start, step=grid.step)


def filter_network(branches, spacing: float = DEFAULT_SPACING,
                   cross_section: float = DEFAULT_CROSS_SECTION) -> DuctNetwork:
    """Side branches separated by straight segments of the given spacing.

    Args:
        branches: list[SideBranch or EquivalentElectricalParams]
        spacing: float
            distance between consecutive resonators (m)
    """
    elements = []
    for i, branch in enumerate(branches):
        if isinstance(branch, EquivalentElectricalParams):
            branch = SideBranch(eep=branch)
        if i > 0:
            elements.append(StraightSegment(spacing))
        elements.append(branch)
    return DuctNetwork(cross_section, elements)


def side_branch_from_values(values, path, lineno, pc):
    """Geometry keys (cm, cavity radii r1 r2 optional) or circuit keys (SI)."""
    keys = set(values)
    if set(GP_ORDER) <= keys <= set(GP_ORDER) | set(CAVITY_KEYS):
        gp = GeometricParams.from_dict({k: from_cli(k, v) for k, v in values.items()})
        return SideBranch(eep=gp_to_eep(gp, pc), gp=gp)
    if keys == set(EEP_ORDER):
        return SideBranch(eep=EquivalentElectricalParams.from_dict(values))
    raise InputFileError(path, lineno,
                         f"side_branch needs geometry keys {GP_ORDER} (cm) or circuit keys {EEP_ORDER}, "
                         f"got {sorted(keys)}")


def read_network(path: str, pc: PhysicalConstants = None) -> DuctNetwork:
    """Read a network file.

    Example:
        cross_section = 0.01     # m^2
        [side_branch]            # geometry in cm
        a1 = 1.0
        ...
        [segment]
        length = 0.1             # m
        [side_branch]
        R1 = 42.
        ...
    """
    top, sections = read_keyvalue(path)
    unknown = set(top) - {'cross_section'}
    if unknown:
        raise InputFileError(path, None, f"unknown top-level key(s) {sorted(unknown)}")
    if not sections:
        raise InputFileError(path, None, "network has no elements")
    elements = []
    for name, values, lineno in sections:
        try:
            if name == 'segment':
                if set(values) != {'length'}:
                    raise InputFileError(path, lineno, "segment needs exactly one key 'length' (m)")
                elements.append(StraightSegment(values['length']))
            elif name == 'side_branch':
                elements.append(side_branch_from_values(values, path, lineno, pc))
            else:
                raise InputFileError(path, lineno, f"unknown element '{name}'")
        except DomainError as e:
            raise InputFileError(path, lineno, str(e))
    return DuctNetwork(top.get('cross_section', DEFAULT_CROSS_SECTION), elements)


def write_network(network: DuctNetwork, path: str) -> None:
    """Write a network file readable by read_network. Side branches with a
    known geometry are written in cm, the others as circuit parameters."""
    lines = [f"cross_section = {float(network.cross_section)!r}"]
    for element in network.elements:
        if isinstance(element, StraightSegment):
            lines += ["", "[segment]", f"length = {float(element.length)!r}"]
        elif element.gp is not None:
            lines += ["", "[side_branch]"]
            lines += [f"{k} = {float(to_cli(k, v))!r}" for k, v in zip(GP_ORDER, element.gp.genome())]
            lines += [f"{k} = {float(to_cli(k, v))!r}" for k, v in zip(CAVITY_KEYS, element.gp.cavity_radius)]
        else:
            lines += ["", "[side_branch]"]
            lines += [f"{k} = {v!r}" for k, v in element.eep.to_dict().items()]
    with open(path, 'w') as file:
        file.write('\n'.join(lines) + '\n')
