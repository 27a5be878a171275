import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from isa_solver.instances import desk_instance  # noqa: E402


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help="run desk-scale tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope='session')
def small_instance():
    """8 x 32 concatenated dictionary with a planted 2-sparse solution"""
    return desk_instance(8, 2, 3)


@pytest.fixture(scope='session')
def medium_instance():
    """16 x 64 concatenated dictionary with a planted 3-sparse solution"""
    return desk_instance(16, 3, 11)
