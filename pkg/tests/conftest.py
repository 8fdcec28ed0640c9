import numpy as np
import pytest

from liouvillelab import (
    assemble_operators,
    build_icosphere,
    random_band_field,
    set_conformal_background,
)


@pytest.fixture(scope="session")
def ops2():
    return assemble_operators(build_icosphere(2))


@pytest.fixture(scope="session")
def ops3():
    return assemble_operators(build_icosphere(3))


@pytest.fixture(scope="session")
def ops4():
    return assemble_operators(build_icosphere(4))


@pytest.fixture(scope="session")
def bumpy3():
    # Fixed bumpy background shared by tests; amplitude keeps e^phi well
    # away from degenerate while still clearly non-round.
    mesh = build_icosphere(3)
    phi = random_band_field(mesh, 2, 6, 0.4)
    return assemble_operators(set_conformal_background(mesh, phi, normalize=True))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
