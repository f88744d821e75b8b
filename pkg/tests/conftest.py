import numpy as np
import pytest

from weylab.corpus import gen_flat_spot, gen_round, gen_spheroid


@pytest.fixture(scope="session")
def round_lvl3():
    return gen_round(3, 1.0)


@pytest.fixture(scope="session")
def round_lvl4():
    return gen_round(4, 1.0)


@pytest.fixture(scope="session")
def spheroid_lvl3():
    return gen_spheroid(3, 1.0, 2.0)


@pytest.fixture(scope="session")
def spheroid_lvl4():
    return gen_spheroid(4, 1.0, 2.0)


@pytest.fixture(scope="session")
def flatpole_lvl3():
    return gen_flat_spot(3, "flat_pole", order=2)


@pytest.fixture(scope="session")
def flatpole_lvl4():
    return gen_flat_spot(4, "flat_pole", order=2)


@pytest.fixture(scope="session")
def flatcircle_lvl4():
    return gen_flat_spot(4, "flat_circle", t0=np.pi / 2)
