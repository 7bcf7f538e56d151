"""
Weighted random spanning trees by random-walk simulation, and overlays built as the
union of k such trees.
"""
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from processing.errors import GraphParseError, InvalidParameterError, WalkLimitError
from processing.graph import (
    Edge,
    WeightedGraph,
    canonical_edge,
    choose_weighted,
    edge_statistics,
    require_tree_ready,
)
from utils.seeding import STREAM_TREES, DrawStream, derive_seed

logger = logging.getLogger(__name__)

WALK_LIMIT_FACTOR = 10_000


class WeightMode(str, Enum):
    PLAIN = "plain"
    RESISTANCE_SCALED = "resistance-scaled"


@dataclass(frozen=True)
class SpanningTree:
    edges: Tuple[Edge, ...]
    start: int
    walk_length: int


def walk_limit(vertex_count: int) -> int:
    return math.ceil(WALK_LIMIT_FACTOR * vertex_count * max(math.log(vertex_count), 1.0))


def random_spanning_tree(g: WeightedGraph, seed: int, max_steps: Optional[int] = None) -> SpanningTree:
    """
    Broder walk on a weighted graph: start at a seed-chosen vertex, step from u to v
    with probability w(u,v)/w(u), and keep the edge through which each vertex is
    first entered. Stops once every vertex has been visited.

    Parameters:
    g (WeightedGraph): connected graph with at least 2 vertices
    seed (int): generator seed; the same (graph, seed) always gives the same tree
    max_steps (int or None): safety valve, defaults to 10^4 · n · ln n

    Returns:
    SpanningTree: n-1 edges, the start vertex and the number of steps walked
    """
    require_tree_ready(g)
    rng = np.random.default_rng(seed)
    n = g.vertex_count
    table = g.walk_table
    limit = max_steps if max_steps is not None else walk_limit(n)

    start = int(rng.integers(n))
    current = start
    visited = [False] * n
    visited[current] = True
    remaining = n - 1
    tree: List[Edge] = []
    steps = 0
    draws = DrawStream(rng)
    while remaining:
        if steps >= limit:
            raise WalkLimitError(steps, n - remaining, n)
        neighbors, cumulative = table[current]
        nxt = choose_weighted(neighbors, cumulative, draws.next())
        steps += 1
        if not visited[nxt]:
            visited[nxt] = True
            remaining -= 1
            tree.append(canonical_edge(current, nxt))
        current = nxt
    return SpanningTree(tuple(sorted(tree)), start, steps)


def tree_seed(master_seed: int, index: int) -> int:
    """Seed of the index-th tree of a construction with the given master seed."""
    return derive_seed(master_seed, STREAM_TREES, index)


def generate_trees(g: WeightedGraph, master_seed: int, indices: Iterable[int]) -> List[SpanningTree]:
    return [random_spanning_tree(g, tree_seed(master_seed, i)) for i in indices]


@dataclass(frozen=True)
class OverlayEdge:
    u: int
    v: int
    multiplicity: int
    weight: float


@dataclass(frozen=True)
class OverlayGraph:
    base: WeightedGraph
    edges: Tuple[OverlayEdge, ...]
    k: int
    weight_mode: WeightMode = WeightMode.PLAIN
    seed: Optional[int] = None

    @classmethod
    def from_graph(cls, g: WeightedGraph) -> "OverlayGraph":
        """Use a base graph directly as an overlay: every edge once, original weights, k = 0."""
        return cls(g, tuple(OverlayEdge(u, v, 1, w) for (u, v), w in zip(g.edges, g.weights)), 0)

    @property
    def vertex_count(self) -> int:
        return self.base.vertex_count

    @property
    def distinct_edge_count(self) -> int:
        return len(self.edges)

    @property
    def total_multiplicity(self) -> int:
        return sum(e.multiplicity for e in self.edges)

    @cached_property
    def graph(self) -> WeightedGraph:
        """The overlay as a weighted graph carrying the overlay weights."""
        return WeightedGraph(self.vertex_count, tuple((e.u, e.v) for e in self.edges), tuple(e.weight for e in self.edges))

    @property
    def max_degree(self) -> int:
        return int(self.graph.degrees.max()) if self.edges else 0

    @property
    def average_degree(self) -> float:
        return 2.0 * self.distinct_edge_count / self.vertex_count

    @cached_property
    def multiplicities(self) -> Dict[Edge, int]:
        return {(e.u, e.v): e.multiplicity for e in self.edges}

    def to_dict(self) -> dict:
        return {
            'vertex_count': self.vertex_count,
            'k': self.k,
            'seed': self.seed,
            'weight_mode': self.weight_mode.value,
            'distinct_edges': self.distinct_edge_count,
            'total_multiplicity': self.total_multiplicity,
            'max_degree': self.max_degree,
            'average_degree': self.average_degree,
            'base_digest': self.base.digest,
        }


def overlay_from_trees(g: WeightedGraph, trees: Sequence[SpanningTree], weight_mode: WeightMode = WeightMode.PLAIN,
                       seed: Optional[int] = None) -> OverlayGraph:
    """
    Union of trees with multiplicities. Summing counts is commutative, so the result
    does not depend on the order the trees arrive in.
    """
    if not trees:
        raise InvalidParameterError("an overlay needs at least one tree")
    weight_mode = WeightMode(weight_mode)
    counts = Counter(e for tree in trees for e in tree.edges)
    k = len(trees)
    if weight_mode is WeightMode.RESISTANCE_SCALED:
        stats = edge_statistics(g)
        probability = dict(zip(stats.edges, stats.inclusion_probability))
        weight = lambda e, m: m * g.weight(*e) / (k * probability[e])
    else:
        weight = lambda e, m: g.weight(*e)
    edges = tuple(OverlayEdge(u, v, counts[(u, v)], weight((u, v), counts[(u, v)])) for u, v in sorted(counts))
    return OverlayGraph(g, edges, k, weight_mode, seed)


def build_overlay(g: WeightedGraph, k: int, seed: int, weight_mode: WeightMode = WeightMode.PLAIN) -> OverlayGraph:
    """
    Union of k random spanning trees; tree i is seeded from (seed, i).

    Parameters:
    g (WeightedGraph): connected base graph
    k (int): number of trees, at least 1
    seed (int): master seed
    weight_mode (WeightMode): plain keeps capacities, resistance-scaled uses m·w(e)/(k·p_e)

    Returns:
    OverlayGraph: the union U_G^k
    """
    if k < 1:
        raise InvalidParameterError(f"k must be at least 1, got {k}")
    require_tree_ready(g)
    trees = generate_trees(g, seed, range(k))
    overlay = overlay_from_trees(g, trees, weight_mode, seed)
    logger.info("built overlay from %d trees: %d distinct edges over %d vertices",
                k, overlay.distinct_edge_count, overlay.vertex_count)
    return overlay


_HEADER_PREFIX = "# overlay "


def format_overlay(o: OverlayGraph) -> str:
    """Edge list "u v w m" preceded by a JSON header comment."""
    header = {'base_digest': o.base.digest, 'k': o.k, 'mode': o.weight_mode.value, 'seed': o.seed}
    lines = [_HEADER_PREFIX + json.dumps(header, sort_keys=True)]
    lines += [f"{e.u} {e.v} {e.weight!r} {e.multiplicity}" for e in o.edges]
    return '\n'.join(lines) + '\n'


def parse_overlay(text: str, base: WeightedGraph) -> OverlayGraph:
    header = None
    edges = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith(_HEADER_PREFIX):
            try:
                header = json.loads(raw[len(_HEADER_PREFIX):])
            except json.JSONDecodeError:
                raise GraphParseError("malformed overlay header", line_number) from None
            continue
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 4:
            raise GraphParseError(f"expected 'u v w m', found {len(fields)} fields", line_number)
        try:
            u, v, w, m = int(fields[0]), int(fields[1]), float(fields[2]), int(fields[3])
        except ValueError:
            raise GraphParseError("malformed overlay edge", line_number) from None
        if not base.has_edge(u, v):
            raise GraphParseError(f"overlay edge ({u}, {v}) is not in the base graph", line_number)
        if not w > 0 or m < 1:
            raise GraphParseError("non-positive weight or multiplicity", line_number)
        edges.append(OverlayEdge(*canonical_edge(u, v), m, w))
    if header is None:
        raise GraphParseError("overlay header is missing")
    if header.get('base_digest') != base.digest:
        raise GraphParseError("overlay was built over a different base graph")
    edges.sort(key=lambda e: (e.u, e.v))
    return OverlayGraph(base, tuple(edges), int(header['k']), WeightMode(header['mode']), header.get('seed'))
