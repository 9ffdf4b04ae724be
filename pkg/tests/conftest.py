import numpy as np
import pytest
from hypothesis import strategies as st

from sga import Graph, generate_sbm, largest_connected_component


def random_graph(seed: int, n: int, p: float, F: int = 6, C: int = 3) -> Graph:
    """Erdos-Renyi graph with random features and labels."""
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(n, 1)
    mask = rng.random(iu[0].size) < p
    edges = np.column_stack([iu[0][mask], iu[1][mask]])
    features = rng.standard_normal((n, F))
    labels = rng.integers(0, C, size=n)
    return Graph.build(edges, features, labels, num_classes=C)


@st.composite
def graph_inputs(draw, min_n=4, max_n=30, min_p=0.1, max_p=0.5):
    seed = draw(st.integers(0, 10**6))
    n = draw(st.integers(min_n, max_n))
    p = draw(st.floats(min_p, max_p))
    return seed, n, p


@pytest.fixture(scope="session")
def sbm_two_block():
    """Separable two-block graph; attacks are very effective here."""
    return generate_sbm([100, 100], 0.15, 0.01, 8, seed=3, noise=0.5)


@pytest.fixture(scope="session")
def sbm_ordering():
    """Milder noise so the attack strategies spread apart."""
    return generate_sbm([100, 100], 0.15, 0.01, 8, seed=3, noise=0.3)


@pytest.fixture(scope="session")
def sbm_sparse():
    """Citation-like degrees and weak features; influence attacks bite."""
    return generate_sbm([150, 150], 0.03, 0.005, 8, seed=5, noise=0.7)


@pytest.fixture(scope="session")
def small_connected():
    """Fixed 20-node connected graph used across modules."""
    g = random_graph(seed=42, n=20, p=0.25)
    return largest_connected_component(g)
