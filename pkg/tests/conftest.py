import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from graphseg.data import MoonsSpec, generate_three_moons
from graphseg.graph import WeightSpec, knn_graph, normalized_laplacian
from graphseg.spectral import smallest_eigenpairs


@pytest.fixture(scope="session")
def moons():
    return generate_three_moons(MoonsSpec(seed=0))


@pytest.fixture(scope="session")
def moons_laplacian(moons):
    spec = WeightSpec(kind="local_scaling", neighbors=10, m_scale=17)
    return normalized_laplacian(knn_graph(moons.features, spec))


@pytest.fixture(scope="session")
def moons_basis20(moons_laplacian):
    return smallest_eigenpairs(moons_laplacian, 20, tol=1e-6)


@pytest.fixture(scope="session")
def moons_basis15(moons_laplacian):
    return smallest_eigenpairs(moons_laplacian, 15, tol=1e-6)


@pytest.fixture(scope="session")
def blobs():
    """Small 3-class Gaussian blob dataset for fast end-to-end tests."""
    from graphseg.data import LabeledDataset

    rng = np.random.default_rng(7)
    centers = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 3.5]])
    features = np.vstack(
        [rng.normal(c, 0.5, size=(40, 2)) for c in centers]
    )
    labels = np.repeat(np.arange(3), 40)
    return LabeledDataset(features, labels, 3)
