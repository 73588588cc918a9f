import pytest

from dhjkit.exponents import make_context


@pytest.fixture(scope="session")
def ctx3():
    return make_context(3.0)


@pytest.fixture(scope="session")
def ctx4():
    return make_context(4.0)


@pytest.fixture(scope="session")
def ctx2():
    return make_context(2.0)
