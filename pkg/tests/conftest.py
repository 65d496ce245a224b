# tests/conftest.py
import numpy as np
import pytest

from experiments import step_signal
from operators import make_1d_dif, make_random_tight_frame


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def step():
    """The 201-sample step: 100 ones, 100 minus ones, then 1.5."""
    return step_signal(201)


@pytest.fixture
def dif201():
    return make_1d_dif(201)


@pytest.fixture
def small_frame():
    return make_random_tight_frame(10, 8, seed=7)


@pytest.fixture
def small_gaussian():
    return np.random.default_rng(99).standard_normal((6, 8)) / np.sqrt(6)
