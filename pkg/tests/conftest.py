import math

import pytest

from reinsopt.dist_model import Empirical, Exponential, Lognormal, Uniform


@pytest.fixture
def expo():
    return Exponential(1.0)


@pytest.fixture
def two_atoms():
    return Empirical([(1.0, 0.5), (3.0, 0.5)])


@pytest.fixture
def ten_atoms():
    vals = [0.3, 0.7, 1.1, 1.8, 2.4, 3.0, 4.2, 5.5, 7.9, 12.0]
    w = [0.15, 0.12, 0.11, 0.1, 0.1, 0.1, 0.09, 0.09, 0.08, 0.06]
    return Empirical(list(zip(vals, w)))


LN10 = math.log(10.0)
LN12 = math.log(1.2)
