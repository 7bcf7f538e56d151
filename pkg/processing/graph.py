"""
Weighted graphs, Laplacians, cut/expansion oracles and spanning-tree edge statistics.

Vertices are 0..n-1. Edges are stored once as (u, v) with u < v, sorted, together
with a positive weight (capacity). Everything here is immutable and pure.
"""
import bisect
import hashlib
import itertools
import logging
import math
import sys
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import linalg, sparse

from processing.errors import (
    DegenerateGraphError,
    DisconnectedGraphError,
    GraphParseError,
    InvalidCutError,
    InvalidParameterError,
    NumericalFailureError,
    SizeCapError,
)

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]

DEFAULT_BRUTEFORCE_CAP = 20
ENUMERATION_CAP = 8
LOG_FLOAT_MAX = math.log(sys.float_info.max)


def canonical_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


@dataclass(frozen=True)
class WeightedGraph:
    vertex_count: int
    edges: Tuple[Edge, ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        if self.vertex_count < 1:
            raise InvalidParameterError(f"vertex_count must be positive, got {self.vertex_count}")
        if len(self.edges) != len(self.weights):
            raise InvalidParameterError("edges and weights must have the same length")
        seen = set()
        for (u, v), w in zip(self.edges, self.weights):
            if u == v:
                raise InvalidParameterError(f"self-loop on vertex {u}")
            if not (0 <= u < v < self.vertex_count):
                raise InvalidParameterError(f"edge ({u}, {v}) is not canonical or out of range")
            if (u, v) in seen:
                raise InvalidParameterError(f"duplicate edge ({u}, {v})")
            if not (w > 0 and math.isfinite(w)):
                raise InvalidParameterError(f"edge ({u}, {v}) has non-positive weight {w}")
            seen.add((u, v))

    @classmethod
    def from_edges(cls, vertex_count: int, weighted_edges: Iterable[Tuple[int, int, float]]) -> "WeightedGraph":
        """Build a graph from (u, v, w) triples in any orientation and order."""
        items = {}
        for u, v, w in weighted_edges:
            u, v = int(u), int(v)
            if u == v:
                raise InvalidParameterError(f"self-loop on vertex {u}")
            key = canonical_edge(u, v)
            if key in items:
                raise InvalidParameterError(f"duplicate edge {key}")
            items[key] = float(w)
        ordered = sorted(items)
        return cls(vertex_count, tuple(ordered), tuple(items[e] for e in ordered))

    @cached_property
    def total_weight(self) -> float:
        return math.fsum(self.weights)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def edge_index(self) -> Dict[Edge, int]:
        return {e: i for i, e in enumerate(self.edges)}

    def weight(self, u: int, v: int) -> float:
        return self.weights[self.edge_index[canonical_edge(u, v)]]

    def has_edge(self, u: int, v: int) -> bool:
        return canonical_edge(u, v) in self.edge_index

    @cached_property
    def neighbor_lists(self) -> Tuple[Tuple[int, ...], ...]:
        adjacency = [[] for _ in range(self.vertex_count)]
        for u, v in self.edges:
            adjacency[u].append(v)
            adjacency[v].append(u)
        return tuple(tuple(sorted(nbrs)) for nbrs in adjacency)

    @cached_property
    def walk_table(self) -> Tuple[Tuple[Tuple[int, ...], Tuple[float, ...]], ...]:
        """Per vertex: (neighbors, cumulative neighbor weights) for weight-proportional steps."""
        table = []
        for u, nbrs in enumerate(self.neighbor_lists):
            cumulative = list(itertools.accumulate(self.weight(u, v) for v in nbrs))
            table.append((nbrs, tuple(cumulative)))
        return tuple(table)

    @cached_property
    def vertex_weights(self) -> np.ndarray:
        """w(u) = sum of the weights of the edges incident to u."""
        result = np.zeros(self.vertex_count)
        for (u, v), w in zip(self.edges, self.weights):
            result[u] += w
            result[v] += w
        return result

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(nbrs) for nbrs in self.neighbor_lists], dtype=int)

    @cached_property
    def nx_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.vertex_count))
        graph.add_weighted_edges_from((u, v, w) for (u, v), w in zip(self.edges, self.weights))
        return graph

    @cached_property
    def adjacency(self) -> sparse.csr_matrix:
        """Symmetric weighted adjacency in CSR form; row u lists the neighbors of u in order."""
        n = self.vertex_count
        if not self.edges:
            return sparse.csr_matrix((n, n))
        u, v = np.array(self.edges, dtype=np.int64).T
        w = np.asarray(self.weights, dtype=float)
        matrix = sparse.coo_matrix((np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n))
        result = matrix.tocsr()
        result.sort_indices()
        return result

    @cached_property
    def is_connected(self) -> bool:
        return nx.is_connected(self.nx_graph)

    def without_edge(self, edge: Edge) -> "WeightedGraph":
        key = canonical_edge(*edge)
        if key not in self.edge_index:
            raise InvalidParameterError(f"edge {key} is not in the graph")
        keep = [i for i, e in enumerate(self.edges) if e != key]
        return WeightedGraph(self.vertex_count, tuple(self.edges[i] for i in keep), tuple(self.weights[i] for i in keep))

    @cached_property
    def digest(self) -> str:
        return hashlib.sha256(format_graph(self).encode('utf-8')).hexdigest()


def require_tree_ready(g: WeightedGraph) -> None:
    """Tree and Laplacian operations need a connected graph with at least two vertices."""
    if g.vertex_count < 2:
        raise DegenerateGraphError(f"operation needs at least 2 vertices, graph has {g.vertex_count}")
    if not g.is_connected:
        raise DisconnectedGraphError()


def parse_graph(text: str) -> WeightedGraph:
    """
    Parse the weighted edge list format: one "u v w" per line, `#` starts a comment,
    fields separated by whitespace. The vertex count is max id + 1.

    Parameters:
    text (str): the file contents

    Returns:
    WeightedGraph: the validated graph
    """
    items = []
    seen = {}
    max_id = -1
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            raise GraphParseError(f"expected 'u v w', found {len(fields)} fields", line_number)
        try:
            u, v = int(fields[0]), int(fields[1])
            w = float(fields[2])
        except ValueError:
            raise GraphParseError("malformed edge", line_number) from None
        if u < 0 or v < 0:
            raise GraphParseError("negative vertex id", line_number)
        if u == v:
            raise GraphParseError("self-loop", line_number)
        if not (w > 0) or not math.isfinite(w):
            raise GraphParseError("non-positive weight", line_number)
        key = canonical_edge(u, v)
        if key in seen:
            raise GraphParseError(f"duplicate edge (first seen at line {seen[key]})", line_number)
        seen[key] = line_number
        items.append((u, v, w))
        max_id = max(max_id, u, v)
    if not items:
        raise GraphParseError("graph has no edges")
    return WeightedGraph.from_edges(max_id + 1, items)


def format_graph(g: WeightedGraph) -> str:
    lines = [f"# vertices {g.vertex_count} edges {g.edge_count}"]
    lines += [f"{u} {v} {w!r}" for (u, v), w in zip(g.edges, g.weights)]
    return '\n'.join(lines) + '\n'


@dataclass(frozen=True)
class CutSet:
    side: FrozenSet[int]
    boundary_edges: Tuple[Edge, ...]
    boundary_weight: float

    @property
    def boundary_size(self) -> int:
        return len(self.boundary_edges)


def _validate_side(g: WeightedGraph, side: Iterable[int]) -> FrozenSet[int]:
    side = frozenset(int(v) for v in side)
    if any(v < 0 or v >= g.vertex_count for v in side):
        raise InvalidCutError("cut side contains an unknown vertex")
    if not side or len(side) == g.vertex_count:
        raise InvalidCutError("cut side must be a nonempty proper subset of the vertices")
    return side


def edge_boundary(g: WeightedGraph, side: Iterable[int]) -> CutSet:
    side = _validate_side(g, side)
    crossing = [(e, w) for e, w in zip(g.edges, g.weights) if (e[0] in side) != (e[1] in side)]
    return CutSet(
        side=side,
        boundary_edges=tuple(e for e, _ in crossing),
        boundary_weight=math.fsum(w for _, w in crossing),
    )


def vertex_boundary(g: WeightedGraph, side: Iterable[int]) -> FrozenSet[int]:
    """Γ'(S): vertices outside S adjacent to some vertex of S."""
    side = _validate_side(g, side)
    return frozenset(v for u in side for v in g.neighbor_lists[u] if v not in side)


def subset_masks(vertex_count: int, max_size: Optional[int] = None, skip_complements: bool = False) -> np.ndarray:
    """
    Every nonempty proper vertex subset as an integer bitmask.

    With max_size, only subsets with at most that many vertices. With
    skip_complements, only subsets not containing the last vertex, i.e. one
    side of each cut.
    """
    top = 1 << (vertex_count - 1 if skip_complements else vertex_count)
    masks = np.arange(1, top, dtype=np.int64)
    full = (1 << vertex_count) - 1
    masks = masks[masks != full]
    if max_size is not None:
        masks = masks[popcount(masks) <= max_size]
    return masks


def popcount(masks: np.ndarray) -> np.ndarray:
    counts = np.zeros(masks.shape, dtype=np.int64)
    work = masks.copy()
    while np.any(work):
        counts += work & 1
        work >>= 1
    return counts


def cut_sizes(edges: Sequence[Edge], masks: np.ndarray, weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """|∂S| (or its weight) for every subset S given as a bitmask, vectorised over masks."""
    totals = np.zeros(masks.shape, dtype=float)
    for i, (u, v) in enumerate(edges):
        crossing = ((masks >> u) ^ (masks >> v)) & 1
        totals += crossing if weights is None else crossing * weights[i]
    return totals


def mask_to_set(mask: int) -> FrozenSet[int]:
    return frozenset(i for i in range(int(mask).bit_length()) if (int(mask) >> i) & 1)


@dataclass(frozen=True)
class ExpansionResult:
    mode: str
    ratio: float
    witness: FrozenSet[int]
    boundary: float


def expansion_bruteforce(g: WeightedGraph, mode: str = "edge", cap: int = DEFAULT_BRUTEFORCE_CAP,
                         weighted: bool = False) -> ExpansionResult:
    """
    Exact edge or vertex expansion by enumerating every S with |S| <= n/2.

    Parameters:
    g (WeightedGraph): the graph
    mode (str): "edge" for min |∂S|/|S|, "vertex" for min |Γ'(S)|/|S|
    cap (int): largest n accepted; enumeration is exponential
    weighted (bool): edge mode only, use boundary weight instead of boundary size

    Returns:
    ExpansionResult: the ratio and one minimising S
    """
    if mode not in ("edge", "vertex"):
        raise InvalidParameterError(f"mode must be 'edge' or 'vertex', got {mode!r}")
    n = g.vertex_count
    if n > cap:
        raise SizeCapError(n, cap)
    if n < 2:
        raise DegenerateGraphError("expansion needs at least 2 vertices")
    masks = subset_masks(n, max_size=n // 2)
    sizes = popcount(masks).astype(float)
    if mode == "edge":
        boundary = cut_sizes(g.edges, masks, g.weights if weighted else None)
    else:
        neighbor_masks = [sum(1 << v for v in nbrs) for nbrs in g.neighbor_lists]
        boundary = np.zeros(masks.shape, dtype=float)
        for v in range(n):
            outside = ((masks >> v) & 1) == 0
            touches = (masks & neighbor_masks[v]) != 0
            boundary += outside & touches
    ratios = boundary / sizes
    best = int(np.argmin(ratios))
    result = ExpansionResult(mode, float(ratios[best]), mask_to_set(masks[best]), float(boundary[best]))
    logger.debug("%s expansion of %d-vertex graph: %.6g over %d subsets", mode, n, result.ratio, len(masks))
    return result


@dataclass(frozen=True, eq=False)
class LaplacianMatrix:
    matrix: np.ndarray

    @classmethod
    def of(cls, g: WeightedGraph) -> "LaplacianMatrix":
        n = g.vertex_count
        L = np.zeros((n, n))
        for (u, v), w in zip(g.edges, g.weights):
            L[u, v] -= w
            L[v, u] -= w
            L[u, u] += w
            L[v, v] += w
        L.setflags(write=False)
        return cls(L)

    def minor(self, x: int = 0) -> np.ndarray:
        """L_x: the Laplacian with row and column x removed."""
        keep = [i for i in range(self.matrix.shape[0]) if i != x]
        return self.matrix[np.ix_(keep, keep)]

    def quadratic_form(self, x: np.ndarray) -> float:
        return float(x @ self.matrix @ x)


def laplacian(g: WeightedGraph) -> LaplacianMatrix:
    return LaplacianMatrix.of(g)


def _cholesky_minor(g: WeightedGraph):
    minor = laplacian(g).minor(0)
    try:
        return linalg.cho_factor(minor, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise NumericalFailureError("grounded Laplacian is numerically singular", float(np.linalg.cond(minor))) from None


def log_spanning_tree_weight(g: WeightedGraph, excluded_edge: Optional[Edge] = None) -> float:
    """Natural log of κ(G) (or κ(G∖e)); -inf when the exclusion disconnects the graph."""
    require_tree_ready(g)
    if excluded_edge is not None:
        g = g.without_edge(excluded_edge)
        if not g.is_connected:
            return -math.inf
    factor, _ = _cholesky_minor(g)
    return 2.0 * float(np.sum(np.log(np.diag(factor))))


def spanning_tree_weight(g: WeightedGraph, excluded_edge: Optional[Edge] = None) -> float:
    """
    κ(G), the sum over spanning trees of the product of their edge weights, as
    det L_0 through a Cholesky factorisation (Matrix-Tree Theorem). With
    excluded_edge, κ(G∖e), which is 0 when e is a bridge.
    Past the float range the result is inf; log_spanning_tree_weight stays finite.
    """
    log_kappa = log_spanning_tree_weight(g, excluded_edge)
    if log_kappa > LOG_FLOAT_MAX:
        logger.warning("spanning tree weight e^%.1f overflows a float; use log_spanning_tree_weight", log_kappa)
        return math.inf
    return math.exp(log_kappa)


@dataclass(frozen=True)
class EdgeStatistics:
    edges: Tuple[Edge, ...]
    inclusion_probability: Tuple[float, ...]
    effective_resistance: Tuple[float, ...]
    conductance: Tuple[float, ...]

    @property
    def average_probability(self) -> float:
        return math.fsum(self.inclusion_probability) / len(self.inclusion_probability)

    def probability(self, u: int, v: int) -> float:
        return self.inclusion_probability[self.edges.index(canonical_edge(u, v))]

    def to_dict(self) -> dict:
        return {
            'average_probability': self.average_probability,
            'edges': [
                {'u': u, 'v': v, 'probability': p, 'resistance': r, 'conductance': c}
                for (u, v), p, r, c in zip(self.edges, self.inclusion_probability,
                                           self.effective_resistance, self.conductance)
            ],
        }


def edge_statistics(g: WeightedGraph, method: str = "lemma") -> EdgeStatistics:
    """
    P[e ∈ T] = 1 - det L_0(G∖e) / det L_0(G) for every edge, with R_e = P[e ∈ T] / w(e).

    "lemma" evaluates the ratio from one Cholesky factor of L_0(G): removing e
    is a rank-one update, so det L_0(G∖e)/det L_0(G) = 1 - w(e)·bᵀL_0⁻¹b with
    b = 1_u - 1_v (row 0 dropped). "determinant" factorises L_0(G∖e) per edge.
    """
    require_tree_ready(g)
    if method == "lemma":
        factor = _cholesky_minor(g)
        n = g.vertex_count
        inverse = np.zeros((n, n))
        inverse[1:, 1:] = linalg.cho_solve(factor, np.eye(n - 1), check_finite=False)
        probabilities = []
        for (u, v), w in zip(g.edges, g.weights):
            resistance = inverse[u, u] + inverse[v, v] - 2.0 * inverse[u, v]
            probabilities.append(w * resistance)
    elif method == "determinant":
        log_kappa = log_spanning_tree_weight(g)
        probabilities = [-math.expm1(log_spanning_tree_weight(g, e) - log_kappa) for e in g.edges]
    else:
        raise InvalidParameterError(f"method must be 'lemma' or 'determinant', got {method!r}")
    probabilities = [min(1.0, max(p, 0.0)) for p in probabilities]
    return EdgeStatistics(
        edges=g.edges,
        inclusion_probability=tuple(probabilities),
        effective_resistance=tuple(p / w for p, w in zip(probabilities, g.weights)),
        conductance=g.weights,
    )


def effective_resistance(g: WeightedGraph, u: int, v: int) -> float:
    """Effective resistance between u and v from the Laplacian pseudo-inverse."""
    require_tree_ready(g)
    pinv = np.linalg.pinv(laplacian(g).matrix)
    return float(pinv[u, u] + pinv[v, v] - 2.0 * pinv[u, v])


def enumerate_spanning_trees(g: WeightedGraph) -> Iterator[Tuple[int, ...]]:
    """Every spanning tree of g as a sorted tuple of edge indices (backtracking over edges)."""
    n, m = g.vertex_count, g.edge_count
    need = n - 1
    chosen: List[int] = []

    def find(parent, x):
        while parent[x] != x:
            x = parent[x]
        return x

    def extend(start, parent):
        if len(chosen) == need:
            yield tuple(chosen)
            return
        for i in range(start, m - (need - len(chosen)) + 1):
            u, v = g.edges[i]
            ru, rv = find(parent, u), find(parent, v)
            if ru == rv:
                continue
            child = list(parent)
            child[ru] = rv
            chosen.append(i)
            yield from extend(i + 1, child)
            chosen.pop()

    if n == 1:
        yield ()
        return
    yield from extend(0, list(range(n)))


@dataclass(frozen=True)
class ExactTreeStatistics:
    tree_count: int
    kappa: float
    marginals: np.ndarray
    joint: np.ndarray


def exact_tree_statistics(g: WeightedGraph, cap: int = ENUMERATION_CAP) -> ExactTreeStatistics:
    """
    Exhaustive oracle: κ, P[e ∈ T] and P[e, f ∈ T] with trees weighted by the
    product of their edge weights. Only for n <= cap.
    """
    if g.vertex_count > cap:
        raise SizeCapError(g.vertex_count, cap, hint="exact tree enumeration is limited to small graphs")
    require_tree_ready(g)
    trees = list(enumerate_spanning_trees(g))
    incidence = np.zeros((len(trees), g.edge_count))
    for row, tree in enumerate(trees):
        incidence[row, list(tree)] = 1.0
    log_w = np.log(np.asarray(g.weights))
    tree_weights = np.exp(incidence @ log_w)
    kappa = float(math.fsum(tree_weights))
    marginals = (incidence.T @ tree_weights) / kappa
    joint = (incidence.T * tree_weights) @ incidence / kappa
    return ExactTreeStatistics(len(trees), kappa, marginals, joint)


def choose_weighted(neighbors: Sequence[int], cumulative: Sequence[float], draw: float) -> int:
    """Pick a neighbor with probability proportional to weight, given a uniform draw in [0, 1)."""
    j = bisect.bisect_right(cumulative, draw * cumulative[-1])
    return neighbors[min(j, len(neighbors) - 1)]
