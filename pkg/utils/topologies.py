"""Base-graph generators for experiments and the `generate` command."""
from typing import Callable, Dict, Optional

import networkx as nx
import numpy as np

from processing.errors import InvalidParameterError
from processing.graph import WeightedGraph
from utils.seeding import STREAM_TOPOLOGY, derive_rng


def _weighted(g: nx.Graph, n: int, rng: np.random.Generator, max_capacity: int) -> WeightedGraph:
    edges = sorted((min(u, v), max(u, v)) for u, v in g.edges())
    if max_capacity > 1:
        capacities = rng.integers(1, max_capacity + 1, size=len(edges))
    else:
        capacities = np.ones(len(edges))
    return WeightedGraph.from_edges(n, ((u, v, float(c)) for (u, v), c in zip(edges, capacities)))


def complete(n: int, seed: int = 0, max_capacity: int = 1) -> WeightedGraph:
    return _weighted(nx.complete_graph(n), n, derive_rng(seed, STREAM_TOPOLOGY, 0), max_capacity)


def cycle(n: int, seed: int = 0, max_capacity: int = 1) -> WeightedGraph:
    if n < 3:
        raise InvalidParameterError(f"a cycle needs at least 3 vertices, got {n}")
    return _weighted(nx.cycle_graph(n), n, derive_rng(seed, STREAM_TOPOLOGY, 0), max_capacity)


def path(n: int, seed: int = 0, max_capacity: int = 1) -> WeightedGraph:
    return _weighted(nx.path_graph(n), n, derive_rng(seed, STREAM_TOPOLOGY, 0), max_capacity)


def random_regular(n: int, degree: int = 3, seed: int = 0, max_capacity: int = 1) -> WeightedGraph:
    """Connected random d-regular graph; redraws until connected."""
    if degree < 1 or degree >= n or (n * degree) % 2:
        raise InvalidParameterError(f"no {degree}-regular graph on {n} vertices")
    rng = derive_rng(seed, STREAM_TOPOLOGY, 0)
    for _ in range(100):
        g = nx.random_regular_graph(degree, n, seed=int(rng.integers(2 ** 31)))
        if nx.is_connected(g):
            return _weighted(g, n, rng, max_capacity)
    raise InvalidParameterError(f"could not draw a connected {degree}-regular graph on {n} vertices")


def ring_with_chords(n: int, seed: int = 0, max_capacity: int = 1) -> WeightedGraph:
    """
    A cycle plus a random perfect matching of chords (one vertex left out when n is
    odd), so the average degree is about 3. Chords that would duplicate a ring
    edge are dropped.
    """
    if n < 4:
        raise InvalidParameterError(f"ring with chords needs at least 4 vertices, got {n}")
    rng = derive_rng(seed, STREAM_TOPOLOGY, 0)
    g = nx.cycle_graph(n)
    order = rng.permutation(n)
    for i in range(0, n - 1, 2):
        u, v = int(order[i]), int(order[i + 1])
        if not g.has_edge(u, v):
            g.add_edge(u, v)
    return _weighted(g, n, rng, max_capacity)


GENERATORS: Dict[str, Callable[..., WeightedGraph]] = {
    'complete': complete,
    'cycle': cycle,
    'path': path,
    'random-regular': random_regular,
    'ring-chords': ring_with_chords,
}


def generate(topology: str, n: int, seed: int = 0, max_capacity: int = 1, degree: Optional[int] = None) -> WeightedGraph:
    if topology not in GENERATORS:
        raise InvalidParameterError(f"unknown topology {topology!r}, expected one of {sorted(GENERATORS)}")
    if n < 2:
        raise InvalidParameterError(f"need at least 2 vertices, got {n}")
    if max_capacity < 1:
        raise InvalidParameterError(f"max capacity must be at least 1, got {max_capacity}")
    if topology == 'random-regular':
        return random_regular(n, degree or 3, seed, max_capacity)
    return GENERATORS[topology](n, seed, max_capacity)
