import numpy as np
import pytest

from graphclust.graph import SimilarityGraph


@pytest.fixture
def star():
    return SimilarityGraph(4, [(0, 1), (0, 2), (0, 3)])


@pytest.fixture
def path4():
    return SimilarityGraph(4, [(0, 1), (1, 2), (2, 3)])


def three_gaussians(rng, n_per=20):
    """Three unit-variance 2-D Gaussians centred at 0, (3,3) and (-3,-3)."""
    X = np.vstack([
        rng.standard_normal((n_per, 2)),
        rng.standard_normal((n_per, 2)) + 3.0,
        rng.standard_normal((n_per, 2)) - 3.0,
    ])
    return X, np.repeat([1, 2, 3], n_per)
