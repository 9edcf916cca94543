import pytest

from srblab.maps import Family, FiberMap, SkewSystem, default_bump


@pytest.fixture(scope="session")
def bump():
    return default_bump()


@pytest.fixture(scope="session")
def theoretical(bump):
    return Family.theoretical(bump=bump)


@pytest.fixture(scope="session")
def experimental():
    return Family.experimental()


@pytest.fixture
def doubling_product():
    """m=7 base, doubling fiber, no coupling."""
    return SkewSystem(7, FiberMap.doubling(), 0.)
