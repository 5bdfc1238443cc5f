import os

import numpy as np
import pytest

from loopfair.markov import AffineMap, Box, Edge, MarkovSystemSpec

REPO_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA_DIR = os.path.join(REPO_ROOT, "data")
CONFIG_PATH = os.path.join(REPO_ROOT, "configs", "default.ini")


@pytest.fixture
def data_dir():
    return DATA_DIR


@pytest.fixture
def default_config_path():
    return CONFIG_PATH


def affine1(a, b):
    return AffineMap(A=np.array([[a]]), b=np.array([b]))


def single_region_spec(maps_and_probs, lo=0.0, hi=1.0):
    """One vertex on [lo, hi] with self-loop edges (slope, offset, prob)."""
    edges = tuple(Edge(0, 0, p, affine1(a, b)) for a, b, p in maps_and_probs)
    return MarkovSystemSpec(regions=(Box(lo=[lo], hi=[hi]),), edges=edges)


@pytest.fixture
def bernoulli_convolution():
    # x/2 and x/2 + 1/2 with a fair coin; invariant measure uniform on [0,1]
    return single_region_spec([(0.5, 0.0, 0.5), (0.5, 0.5, 0.5)])
