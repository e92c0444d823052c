import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from influence_percolation.graph import BlockModelParams, Graph, generate_sbm

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_graph(rng: np.random.Generator, n: int, p: float, n_blocks: int = 2) -> Graph:
    """Erdos-Renyi graph with random block labels; retried until it has an edge."""
    while True:
        upper = np.triu(rng.random((n, n)) < p, 1)
        edges = np.argwhere(upper)
        if len(edges):
            break
    blocks = rng.integers(0, n_blocks, n)
    return Graph.from_edges(n, edges, blocks, n_blocks)


@pytest.fixture(scope="session")
def one_eager_params():
    return BlockModelParams(2000, 3, 0.8, 0.2, (0.5, 0.0, 0.5))


@pytest.fixture(scope="session")
def sbm_500():
    return generate_sbm(BlockModelParams(500, 3, 0.8, 0.2, (0.5, 0.0, 0.5)), 11)
