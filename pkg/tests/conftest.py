import pathlib

import numpy as np
import pytest

from bigsoftmax.data import load_dataset

REPO = pathlib.Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def repo_root():
    return REPO


@pytest.fixture(scope="session")
def tiny_dataset():
    return load_dataset(REPO / "data" / "tiny_demo.libsvm")


@pytest.fixture
def rng():
    return np.random.default_rng(np.random.PCG64(12345))
