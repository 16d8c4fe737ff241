import pytest

from shiftlab import full_shift, golden_mean_shift
from shiftlab.functions import constant, indicator


@pytest.fixture(scope="session")
def full2():
    return full_shift(2)


@pytest.fixture(scope="session")
def golden():
    return golden_mean_shift()


@pytest.fixture(scope="session")
def ind1(full2):
    return indicator(full2, (1,))


@pytest.fixture(scope="session")
def zero_potential(full2):
    return constant(full2, 0.0)
