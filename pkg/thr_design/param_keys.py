"""Metadata of the geometric (GP) and equivalent electrical (EEP) parameters
of a two-order Helmholtz resonator. Ranges are the default design ranges;
geometry is SI internally and centimetres at the command line."""

GP_ORDER = ['a1', 'l1', 'h1', 'a2', 'l2', 'h2']
EEP_ORDER = ['R1', 'M1', 'C1', 'R2', 'M2', 'C2']

CAVITY_RADIUS = 0.05  # m, both orders


param_keys = {
    'a': {
        'long_name': 'Neck radius',
        'kind': 'gp',
        'units': 'm',
        'cli_units': 'cm',
        'cli_scale': 100.,
        'range': (0.001, 0.025),
    },
    'l': {
        'long_name': 'Neck length',
        'kind': 'gp',
        'units': 'm',
        'cli_units': 'cm',
        'cli_scale': 100.,
        'range': (0.001, 0.05),
    },
    'h': {
        'long_name': 'Cavity length',
        'kind': 'gp',
        'units': 'm',
        'cli_units': 'cm',
        'cli_scale': 100.,
        'range': (0.001, 0.127),
    },
    'r': {
        'long_name': 'Cavity radius',
        'kind': 'gp',
        'units': 'm',
        'cli_units': 'cm',
        'cli_scale': 100.,
        'range': (CAVITY_RADIUS, CAVITY_RADIUS),
    },
    'R': {
        'long_name': 'Acoustic resistance coefficient',
        'kind': 'eep',
        'units': 'Pa s^0.5 / m^3',
        'cli_units': 'Pa s^0.5 / m^3',
        'cli_scale': 1.,
        'range': (1., 170.),
    },
    'M': {
        'long_name': 'Acoustic inertance',
        'kind': 'eep',
        'units': 'kg / m^4',
        'cli_units': 'kg / m^4',
        'cli_scale': 1.,
        'range': (1., 300.),
    },
    'C': {
        'long_name': 'Acoustic compliance',
        'kind': 'eep',
        'units': 'm^3 / Pa',
        'cli_units': 'm^3 / Pa',
        'cli_scale': 1.,
        'range': (7e-10, 7e-9),
    },
}


def symbol(name: str) -> str:
    """Strip the order index, 'a1' -> 'a'."""
    return name.rstrip('12')


def to_cli(name: str, value: float) -> float:
    """SI value to the command-line unit of the parameter."""
    return value * param_keys[symbol(name)]['cli_scale']


def from_cli(name: str, value: float) -> float:
    """Command-line unit to SI."""
    return value / param_keys[symbol(name)]['cli_scale']
