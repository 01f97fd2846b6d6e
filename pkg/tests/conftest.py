import numpy as np
import pytest

from phcbf import (ClassK, EnergyCbfSpec, make_double_pendulum, make_mass_spring,
                   to_ph)
from phcbf.mechanics import barrier_from_spec


@pytest.fixture(scope="session")
def mass_spring():
    return make_mass_spring()


@pytest.fixture(scope="session")
def ms_sys(mass_spring):
    return to_ph(mass_spring)


@pytest.fixture(scope="session")
def double_pendulum():
    return make_double_pendulum()


@pytest.fixture(scope="session")
def dp_sys(double_pendulum):
    return to_ph(double_pendulum)


def total_energy_spec(ms, bound, c, gamma, t_on=0.0):
    """h = c - H (upper) or h = H - c (lower) as an energy-shaped spec."""
    sign = -1 if bound == "upper" else +1
    s = float(sign)
    return EnergyCbfSpec(sign=sign,
                         position_term=lambda q: s * float(ms.potential(q)),
                         grad_position_term=lambda q: s * np.asarray(ms.grad_potential(q)),
                         c=-sign * c, alpha=ClassK(gamma), t_on=t_on)


def kinetic_energy_spec(bound, c, gamma, t_on=0.0):
    """h = c - K (upper) or h = K - c (lower), no configuration term."""
    sign = -1 if bound == "upper" else +1
    return EnergyCbfSpec(sign=sign, c=-sign * c, alpha=ClassK(gamma), t_on=t_on)


def total_energy_barrier(ms, bound, c, gamma, t_on=0.0):
    return barrier_from_spec(ms, total_energy_spec(ms, bound, c, gamma, t_on))


def kinetic_energy_barrier(ms, bound, c, gamma, t_on=0.0):
    return barrier_from_spec(ms, kinetic_energy_spec(bound, c, gamma, t_on))
