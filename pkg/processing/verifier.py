"""
Checks that an overlay expands and sparsifies: the mixing-rate cover test (single
and parallel walks), the spectral quadratic-form check, the exhaustive cut check,
negative correlation of tree edges, and the analytic bounds behind them.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import FrozenSet, List, Optional, Tuple

import networkx as nx
import numpy as np
from scipy import linalg

from processing.errors import DisconnectedGraphError, InvalidParameterError, SizeCapError
from processing.graph import (
    DEFAULT_BRUTEFORCE_CAP,
    ENUMERATION_CAP,
    Edge,
    WeightedGraph,
    choose_weighted,
    cut_sizes,
    edge_statistics,
    exact_tree_statistics,
    laplacian,
    mask_to_set,
    require_tree_ready,
    subset_masks,
)
from processing.spanning_tree import OverlayGraph, WeightMode, generate_trees
from utils.seeding import STREAM_PROBES, STREAM_WALKS, DrawStream, derive_rng

logger = logging.getLogger(__name__)

DEFAULT_CAP_FACTOR = 10.0
DEFAULT_PROBES = 200
EIGEN_CAP = 64
NULL_SPACE_TOLERANCE = 1e-12
CORRELATION_SLACK = 0.02

NEIGHBOR_CURRENT = "current"
NEIGHBOR_ACCUMULATED = "accumulated"


@dataclass(frozen=True)
class WalkDetail:
    start: int
    visited_count: int
    steps: int


@dataclass(frozen=True)
class CoverReport:
    vertex_count: int
    visited_count: int
    walk_length: int
    length_cap: int
    success: bool
    neighbor_mode: str = NEIGHBOR_CURRENT
    weighted: bool = False
    walks: Tuple[WalkDetail, ...] = ()

    def to_dict(self) -> dict:
        return asdict(self)


def _cover_walk(graph: WeightedGraph, start: int, max_steps: int, draws: DrawStream, neighbor_mode: str,
                weighted: bool) -> Tuple[int, int]:
    """Walk until every vertex is visited or max_steps steps; returns (visited, steps)."""
    n = graph.vertex_count
    neighbors = graph.neighbor_lists
    table = graph.walk_table
    visited = [False] * n
    visited[start] = True
    count = 1
    current = start
    steps = 0
    frontier: List[int] = []
    in_frontier = [False] * n
    if neighbor_mode == NEIGHBOR_ACCUMULATED:
        for v in neighbors[start]:
            in_frontier[v] = True
            frontier.append(v)
    while count < n and steps < max_steps:
        if neighbor_mode == NEIGHBOR_ACCUMULATED:
            nxt = frontier[int(draws.next() * len(frontier))]
        elif weighted:
            nbrs, cumulative = table[current]
            nxt = choose_weighted(nbrs, cumulative, draws.next())
        else:
            nbrs = neighbors[current]
            nxt = nbrs[int(draws.next() * len(nbrs))]
        steps += 1
        current = nxt
        if not visited[current]:
            visited[current] = True
            count += 1
            if neighbor_mode == NEIGHBOR_ACCUMULATED:
                for v in neighbors[current]:
                    if not in_frontier[v]:
                        in_frontier[v] = True
                        frontier.append(v)
    return count, steps


def _validate_walk_options(neighbor_mode: str) -> None:
    if neighbor_mode not in (NEIGHBOR_CURRENT, NEIGHBOR_ACCUMULATED):
        raise InvalidParameterError(f"neighbor_mode must be 'current' or 'accumulated', got {neighbor_mode!r}")


def _require_walkable(o: OverlayGraph) -> None:
    # a walk stuck on a component can never cover, and an isolated start has no step at all
    if o.vertex_count > 1 and not o.graph.is_connected:
        raise DisconnectedGraphError()


def mixing_cover_test(o: OverlayGraph, cap_factor: float = DEFAULT_CAP_FACTOR, seed: int = 0,
                      neighbor_mode: str = NEIGHBOR_CURRENT, weighted: bool = False) -> CoverReport:
    """
    Mixing-rate based monitoring: one random walk of length at most
    L = ⌈cap_factor · n · ln n⌉ counting first visits. A rapidly mixing overlay is
    covered within L steps; covering fewer than n vertices means it is not.

    Parameters:
    o (OverlayGraph): connected overlay
    cap_factor (float): the constant c in L = c·n·ln n
    seed (int): walk seed
    neighbor_mode (str): "current" steps to a neighbor of the current vertex;
        "accumulated" steps to any vertex of the union of neighbor sets seen so far
    weighted (bool): step proportionally to overlay weights instead of uniformly

    Returns:
    CoverReport: visited count, steps used, the cap and success
    """
    if cap_factor <= 0:
        raise InvalidParameterError(f"cap_factor must be positive, got {cap_factor}")
    _validate_walk_options(neighbor_mode)
    _require_walkable(o)
    n = o.vertex_count
    cap = math.ceil(cap_factor * n * math.log(n)) if n > 1 else 0
    rng = derive_rng(seed, STREAM_WALKS, 0)
    start = int(rng.integers(n))
    visited, steps = _cover_walk(o.graph, start, cap, DrawStream(rng), neighbor_mode, weighted)
    report = CoverReport(n, visited, steps, cap, visited == n, neighbor_mode, weighted,
                         (WalkDetail(start, visited, steps),))
    logger.debug("cover test: %d/%d vertices in %d of %d steps", visited, n, steps, cap)
    return report


def parallel_cover_test(o: OverlayGraph, walk_count: int, walk_length: int, seed: int = 0,
                        weighted: bool = False) -> CoverReport:
    """
    Many short walks from seed-chosen starts; success iff together they visit
    every vertex.
    """
    if walk_count < 1 or walk_length < 1:
        raise InvalidParameterError("walk_count and walk_length must be at least 1")
    _require_walkable(o)
    n = o.vertex_count
    graph = o.graph
    neighbors = graph.neighbor_lists
    table = graph.walk_table
    covered = [False] * n
    details = []
    for i in range(walk_count):
        rng = derive_rng(seed, STREAM_WALKS, i)
        draws = DrawStream(rng, block=walk_length)
        current = int(rng.integers(n))
        start = current
        seen = {current}
        covered[current] = True
        for _ in range(walk_length):
            if not neighbors[current]:
                break
            if weighted:
                nbrs, cumulative = table[current]
                current = choose_weighted(nbrs, cumulative, draws.next())
            else:
                nbrs = neighbors[current]
                current = nbrs[int(draws.next() * len(nbrs))]
            seen.add(current)
            covered[current] = True
        details.append(WalkDetail(start, len(seen), walk_length))
    visited = sum(covered)
    return CoverReport(n, visited, walk_length, walk_length, visited == n, NEIGHBOR_CURRENT, weighted, tuple(details))


@dataclass(frozen=True)
class SpectralReport:
    epsilon: float
    ratio_min: float
    ratio_max: float
    probes_used: int
    probes_skipped: int
    passed: bool
    scaled_sampling: bool
    eigen_min: Optional[float] = None
    eigen_max: Optional[float] = None
    notes: Tuple[str, ...] = ()

    @property
    def eigen_passed(self) -> Optional[bool]:
        if self.eigen_min is None:
            return None
        return 1.0 - self.epsilon <= self.eigen_min and self.eigen_max <= 1.0 + self.epsilon

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload['eigen_passed'] = self.eigen_passed
        return payload


def spectral_approximation_check(g: WeightedGraph, o: OverlayGraph, epsilon: float, probes: int = DEFAULT_PROBES,
                                 seed: int = 0) -> SpectralReport:
    """
    Compare the quadratic forms of L (base) and L' (overlay) on random unit vectors
    orthogonal to the all-ones vector. Passes iff every ratio xᵀL'x / xᵀLx lies in
    [1-ε, 1+ε]. For n <= 64 the extreme generalised eigenvalues of (L', L) on the
    same subspace are reported too.
    """
    require_tree_ready(g)
    n = g.vertex_count
    if not 1.0 / math.sqrt(n) <= epsilon <= 1.0:
        raise InvalidParameterError(f"epsilon must lie in [1/sqrt(n), 1] = [{1 / math.sqrt(n):.4f}, 1], got {epsilon}")
    if probes < 1:
        raise InvalidParameterError(f"probes must be at least 1, got {probes}")
    if o.base.digest != g.digest:
        raise InvalidParameterError("overlay was not built over this base graph")
    notes = []
    scaled = o.weight_mode is WeightMode.RESISTANCE_SCALED
    if not scaled:
        notes.append("overlay uses plain weights; the sparsifier statement assumes resistance-scaled sampling")
        logger.warning(notes[-1])
    L = laplacian(g).matrix
    L_overlay = laplacian(o.graph).matrix
    rng = derive_rng(seed, STREAM_PROBES, 0)
    ratios = []
    skipped = 0
    for _ in range(probes):
        x = rng.standard_normal(n)
        x -= x.mean()
        x /= np.linalg.norm(x)
        base_form = float(x @ L @ x)
        if base_form < NULL_SPACE_TOLERANCE:
            skipped += 1
            logger.warning("probe skipped: base quadratic form %.3e is numerically zero", base_form)
            continue
        ratios.append(float(x @ L_overlay @ x) / base_form)
    eigen_min = eigen_max = None
    if n <= EIGEN_CAP:
        # on x_0 = 0 both forms are positive definite and give the same quotient range as on 1⊥
        values = linalg.eigh(L_overlay[1:, 1:], L[1:, 1:], eigvals_only=True)
        eigen_min, eigen_max = float(values[0]), float(values[-1])
    if ratios:
        low, high = min(ratios), max(ratios)
        passed = 1.0 - epsilon <= low and high <= 1.0 + epsilon
    else:
        low = high = math.nan
        passed = False
        notes.append("every probe fell in the null space")
    return SpectralReport(epsilon, low, high, len(ratios), skipped, passed, scaled, eigen_min, eigen_max, tuple(notes))


@dataclass(frozen=True)
class CutApproximationReport:
    alpha: float
    min_ratio: float
    witness: FrozenSet[int]
    overlay_boundary: int
    base_boundary: int
    passed: bool

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload['witness'] = sorted(self.witness)
        return payload


def cut_approximation_check(g: WeightedGraph, o: OverlayGraph, alpha: float,
                            cap: int = DEFAULT_BRUTEFORCE_CAP) -> CutApproximationReport:
    """
    Over every nonempty A ⊊ V, the smallest |∂_U A| · α · ln n / |∂_G A|; passes iff
    it is at least 1, i.e. |∂_U A| >= |∂_G A| / (α ln n) for every cut.
    """
    n = g.vertex_count
    if n > cap:
        raise SizeCapError(n, cap)
    require_tree_ready(g)
    if alpha <= 0:
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")
    masks = subset_masks(n, skip_complements=True)
    base = cut_sizes(g.edges, masks)
    overlay = cut_sizes(o.graph.edges, masks)
    ratios = overlay * alpha * math.log(n) / base
    worst = int(np.argmin(ratios))
    return CutApproximationReport(alpha, float(ratios[worst]), mask_to_set(masks[worst]),
                                  int(overlay[worst]), int(base[worst]), bool(ratios[worst] >= 1.0))


@dataclass(frozen=True)
class NegativeCorrelationReport:
    samples: int
    max_empirical_violation: float
    max_exact_violation: float
    worst_pair: Optional[Tuple[Edge, Edge]]
    max_marginal_error: float
    passed: bool
    slack: float = CORRELATION_SLACK

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload['worst_pair'] = [list(e) for e in self.worst_pair] if self.worst_pair else None
        return payload


def negative_correlation_test(g: WeightedGraph, samples: int, seed: int = 0,
                              slack: float = CORRELATION_SLACK) -> NegativeCorrelationReport:
    """
    P[e, f ∈ T] <= P[e ∈ T]·P[f ∈ T] for every pair of distinct edges, checked on
    sampled trees and against exact enumeration (n <= 8).
    """
    if g.vertex_count > ENUMERATION_CAP:
        raise SizeCapError(g.vertex_count, ENUMERATION_CAP, hint="exact tree enumeration is limited to small graphs")
    if samples < 1:
        raise InvalidParameterError(f"samples must be at least 1, got {samples}")
    exact = exact_tree_statistics(g)
    m = g.edge_count
    incidence = np.zeros((samples, m))
    index = g.edge_index
    for row, tree in enumerate(generate_trees(g, seed, range(samples))):
        incidence[row, [index[e] for e in tree.edges]] = 1.0
    marginals = incidence.mean(axis=0)
    joint = incidence.T @ incidence / samples
    off_diagonal = ~np.eye(m, dtype=bool)
    empirical = np.where(off_diagonal, joint - np.outer(marginals, marginals), -np.inf)
    exact_gap = np.where(off_diagonal, exact.joint - np.outer(exact.marginals, exact.marginals), -np.inf)
    if m > 1:
        i, j = np.unravel_index(int(np.argmax(empirical)), empirical.shape)
        worst = (g.edges[i], g.edges[j])
        max_empirical, max_exact = float(empirical[i, j]), float(exact_gap.max())
    else:
        worst, max_empirical, max_exact = None, 0.0, 0.0
    marginal_error = float(np.max(np.abs(marginals - exact.marginals)))
    passed = max_exact <= 1e-12 and max_empirical <= slack
    return NegativeCorrelationReport(samples, max_empirical, max_exact, worst, marginal_error, passed, slack)


@dataclass(frozen=True)
class CutBoundReport:
    k: int
    alpha: float
    average_probability: float
    condition_met: bool
    bad_cut_bound: float
    min_base_cut: float
    single_tree_bound: float
    k_tree_bound: float
    terms: Tuple[float, ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload.pop('terms')
        return payload


def cut_bound_report(g: WeightedGraph, k: int, alpha: float) -> CutBoundReport:
    """
    Analytic side of the cut check. With p the average edge inclusion probability:
    a single tree keeps fewer than half the expected boundary of a cut with
    probability below exp(-p|∂_G A|/8), k trees below exp(-k·p|∂_G A|/8), and the
    union bound over bad cuts is Σ_{a=1}^{n/ln n} exp(a(ln(e·n/a) - (k-1)·α·ln n·p/8)),
    which vanishes once α(k-1) > 8/p. The per-cut bounds are evaluated at the base graph's
    minimum cut counted in edges (Stoer-Wagner with unit weights).
    """
    require_tree_ready(g)
    if k < 1 or alpha <= 0:
        raise InvalidParameterError("k must be at least 1 and alpha positive")
    n = g.vertex_count
    p = edge_statistics(g).average_probability
    log_n = math.log(n)
    exponent = (k - 1) * alpha * log_n * p / 8.0
    terms = tuple(math.exp(a * (math.log(math.e * n / a) - exponent)) for a in range(1, int(n / log_n) + 1))
    min_cut = float(nx.stoer_wagner(nx.Graph(g.edges))[0]) if g.edge_count else 0.0
    return CutBoundReport(
        k=k,
        alpha=alpha,
        average_probability=p,
        condition_met=alpha * (k - 1) > 8.0 / p,
        bad_cut_bound=math.fsum(terms),
        min_base_cut=min_cut,
        single_tree_bound=math.exp(-p * min_cut / 8.0),
        k_tree_bound=math.exp(-k * p * min_cut / 8.0),
        terms=terms,
    )


def sparsifier_tree_count(n: int, epsilon: float, constant: float = 1.0) -> int:
    """Trees needed for |U| in O(n log n / ε²) edges when each tree adds n-1: ⌈c·ln n / ε²⌉."""
    if n < 2 or not 0 < epsilon <= 1 or constant <= 0:
        raise InvalidParameterError("need n >= 2, 0 < epsilon <= 1 and a positive constant")
    return max(1, math.ceil(constant * math.log(n) / epsilon ** 2))
