import pytest

from pinsim import renewal as rn
from pinsim.disorder import make_disorder
from pinsim.slowvar import const


@pytest.fixture(scope="session")
def twopoint():
    return rn.twopoint_law(64)


@pytest.fixture(scope="session")
def deterministic():
    return rn.deterministic_law(64)


@pytest.fixture(scope="session")
def heavy75():
    """alpha = 0.75 zeta-type law, mid-sized table."""
    return rn.build_renewal(0.75, const(1.0), 16384)


@pytest.fixture(scope="session")
def heavy75_small():
    return rn.build_renewal(0.75, const(1.0), 256)


@pytest.fixture(scope="session")
def gauss():
    return make_disorder("gaussian")


@pytest.fixture(scope="session")
def rade():
    return make_disorder("rademacher")
