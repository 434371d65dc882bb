import numpy as np
import pytest

from rapm.oracles import ProblemSpec, quadratic_oracle
from rapm.problems import make_sparse_regression, make_weak_sharp_box, random_weak_sharp_box
from rapm.prox import Zero


@pytest.fixture
def quad_1d():
    # h = x^2/2, f = (x-2)^2/2, omega = 0
    return ProblemSpec(
        upper=quadratic_oracle([[1.0]], [-2.0], 2.0),
        lower=quadratic_oracle([[1.0]]),
        nonsmooth=Zero(),
        dimension=1,
        key="quad_1d",
    )


@pytest.fixture
def box2():
    return make_weak_sharp_box(2, [1.0, 0.0], [0.5, 0.7])


@pytest.fixture
def box20():
    return random_weak_sharp_box(20, 10, 0)


@pytest.fixture(scope="session")
def sparse_reg():
    return make_sparse_regression(60, 40, 50, 5, 0.01, 1.0, 7)


def rng(seed=0):
    return np.random.default_rng(seed)
