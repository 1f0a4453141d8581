import os
import sys

_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, _ROOT)

import numpy as np
import pytest

from models.graph import build_knn_graph
from utils.data_generator import SyntheticConfig, generate_synthetic


def connected_graph(n, k, seed):
    """k-NN graph on uniform random points, redrawn until connected"""
    rng = np.random.default_rng(seed)
    while True:
        coords = rng.uniform(0.0, 10.0, size=(n, 2))
        try:
            return build_knn_graph(coords, k)
        except ValueError:
            continue


@pytest.fixture
def root_dir():
    return _ROOT


@pytest.fixture(scope="session")
def graph10():
    return connected_graph(10, 3, seed=4)


@pytest.fixture(scope="session")
def small_dataset():
    return generate_synthetic(SyntheticConfig(n_nodes=30, n_times=40, knn_k=4, low_freq_count=5, seed=3))


@pytest.fixture(scope="session")
def tiny_dataset():
    return generate_synthetic(SyntheticConfig(n_nodes=20, n_times=10, knn_k=4, low_freq_count=4, seed=11))
