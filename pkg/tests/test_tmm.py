import numpy as np
import pytest

from thr_design.acoustics import (
    FrequencyGrid,
    GeometricParams,
    ParamRanges,
    gp_to_eep,
    stl_side_branch,
    stl_spectrum,
)
from thr_design.data import sample_gp
from thr_design.errors import DomainError, InputFileError
from thr_design.tmm import (
    DuctNetwork,
    SideBranch,
    StraightSegment,
    cascade,
    element_matrix,
    filter_network,
    network_spectrum,
    read_network,
    stl_from_matrix,
    write_network,
)
from thr_design.utils import child_rng

F = np.linspace(101., 600., 500)


def test_single_branch_matches_side_branch_stl():
    ranges = ParamRanges()
    for k in range(100):
        eep = gp_to_eep(sample_gp(child_rng(5, k), ranges))
        network = DuctNetwork(0.01, [SideBranch(eep)])
        tl = stl_from_matrix(cascade(network, F), 0.01)
        np.testing.assert_allclose(tl, stl_side_branch(eep, F, 0.01), rtol=0, atol=1e-9)


def test_straight_duct_has_no_loss():
    network = DuctNetwork(0.01, [StraightSegment(0.3), StraightSegment(1.7)])
    np.testing.assert_allclose(stl_from_matrix(cascade(network, F)), 0., atol=1e-9)


def test_element_matrices_are_reciprocal(example_eep):
    for element in (StraightSegment(0.25), SideBranch(example_eep)):
        np.testing.assert_allclose(element_matrix(element, F).det(), 1., atol=1e-9)


def test_reversed_network_same_loss(example_eep):
    other = gp_to_eep(sample_gp(child_rng(0, 1)))
    network = DuctNetwork(0.01, [SideBranch(example_eep), StraightSegment(0.13), SideBranch(other),
                                 StraightSegment(0.05)])
    forward = stl_from_matrix(cascade(network, F))
    backward = stl_from_matrix(cascade(network.reversed(), F))
    np.testing.assert_allclose(forward, backward, rtol=0, atol=1e-9)


def test_empty_network_rejected():
    with pytest.raises(DomainError):
        DuctNetwork(0.01, [])
    with pytest.raises(DomainError):
        StraightSegment(-1.)


def test_filter_network_layout(example_eep):
    network = filter_network([example_eep, SideBranch(example_eep)], spacing=0.2)
    kinds = [type(e).__name__ for e in network.elements]
    assert kinds == ['SideBranch', 'StraightSegment', 'SideBranch']
    assert network.elements[1].length == 0.2
    assert len(network.side_branches()) == 2


def test_network_spectrum_of_one_branch(example_eep):
    grid = FrequencyGrid()
    spectrum = network_spectrum(filter_network([example_eep]), grid)
    np.testing.assert_allclose(spectrum.values, stl_spectrum(example_eep, grid=grid).values, atol=1e-9)


def test_write_read_network(tmp_path, example_gp, example_eep):
    network = DuctNetwork(0.02, [SideBranch(example_eep, example_gp), StraightSegment(0.1), SideBranch(example_eep)])
    path = str(tmp_path / 'filter.net')
    write_network(network, path)
    back = read_network(path)
    assert back.cross_section == 0.02
    assert back.elements[0].gp is not None
    assert back.elements[2].gp is None
    np.testing.assert_allclose(network_spectrum(back).values, network_spectrum(network).values, atol=1e-9)


def test_write_read_network_keeps_cavity_radius(tmp_path):
    gp = GeometricParams(neck_radius=(0.01, 0.005), neck_length=(0.02, 0.008),
                         cavity_radius=(0.04, 0.06), cavity_length=(0.06, 0.06))
    network = DuctNetwork(0.01, [SideBranch(gp_to_eep(gp), gp)])
    path = str(tmp_path / 'wide.net')
    write_network(network, path)
    back = read_network(path).elements[0]
    np.testing.assert_allclose(back.gp.cavity_radius, (0.04, 0.06), rtol=1e-12)
    np.testing.assert_allclose(back.eep.to_array(), network.elements[0].eep.to_array(), rtol=1e-9)


def test_read_network_optional_cavity_radius(tmp_path):
    path = tmp_path / 'one.net'
    path.write_text("[side_branch]\na1 = 1\nl1 = 2\nh1 = 6\na2 = 0.5\nl2 = 0.8\nh2 = 6\nr2 = 4\n")
    gp = read_network(str(path)).elements[0].gp
    assert gp.cavity_radius == pytest.approx((0.05, 0.04))


def test_read_network_geometry_in_cm(tmp_path, example_eep):
    path = tmp_path / 'one.net'
    path.write_text("# single resonator\n[side_branch]\na1 = 1\nl1 = 2\nh1 = 6\na2 = 0.5\nl2 = 0.8\nh2 = 6\n")
    network = read_network(str(path))
    assert network.cross_section == 0.01
    np.testing.assert_allclose(network.elements[0].eep.to_array(), example_eep.to_array(), rtol=1e-12)


@pytest.mark.parametrize('content, lineno', [
    ("cross_section = 0.01\n", None),
    ("[side_branch]\na1 = 1\n", 1),
    ("[segment]\nlength = 0.1\n[pipe]\nlength = 1\n", 3),
    ("[segment]\nlength = -0.1\n", 1),
    ("[segment]\nlength = abc\n", 2),
])
def test_read_network_errors(tmp_path, content, lineno):
    path = tmp_path / 'bad.net'
    path.write_text(content)
    with pytest.raises(InputFileError) as info:
        read_network(str(path))
    assert info.value.lineno == lineno
