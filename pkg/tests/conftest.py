import numpy as np
import pytest

from relaydelay.core import GridFunction
from relaydelay.linearization import LinearizedMaps
from relaydelay.periodic import find_periodic_orbit
from relaydelay.systems import (delayed_s1_params, orbit_guess, planar_params,
                                s1_params, NILPOTENT_DIR)

S1_T = float(np.log(3.0))


@pytest.fixture(scope="session")
def s1():
    return s1_params()


@pytest.fixture(scope="session")
def s1_orbit(s1):
    return find_periodic_orbit(s1, guess=orbit_guess(s1))


@pytest.fixture(scope="session")
def s1_lin(s1_orbit):
    return LinearizedMaps(s1_orbit)


@pytest.fixture(scope="session")
def delayed():
    return delayed_s1_params(-0.02)


@pytest.fixture(scope="session")
def delayed_orbit(delayed):
    return find_periodic_orbit(delayed, guess=orbit_guess(delayed))


@pytest.fixture(scope="session")
def delayed_lin(delayed_orbit):
    return LinearizedMaps(delayed_orbit)


@pytest.fixture(scope="session")
def planar():
    return planar_params(-1.1, A_dir=NILPOTENT_DIR)


@pytest.fixture(scope="session")
def planar_orbit(planar):
    return find_periodic_orbit(planar, guess=orbit_guess(planar))


def smooth_direction(T, N, rng):
    """A random smooth perturbation history on (-2T, 0)."""
    c = rng.normal(size=(3, N))
    return GridFunction.from_callable(
        lambda t: (c[0] * np.sin(np.outer(t, np.ones(N)))
                   + c[1] * np.cos(np.outer(2.0 * t, np.ones(N)))
                   + c[2]), -2 * T, 0.0)
