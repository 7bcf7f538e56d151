"""
Monitoring and anonymity quantities: unmonitored-route probabilities, confinement
and Chernoff bounds, the equiprobable hidden-state model, routing betweenness
centrality, entropy-based anonymity and attack costs.

Log bases: entropy uses base 2; Chernoff and attack-cost formulas use natural logs;
path probabilities take their base as a parameter (2 by default).
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from processing.errors import DomainError, InvalidKernelError, InvalidParameterError
from processing.routing import default_segment_length, uniform_step
from processing.spanning_tree import OverlayGraph
from utils.seeding import STREAM_WALKS, derive_rng

logger = logging.getLogger(__name__)

KERNEL_TOLERANCE = 1e-9
PROBABILITY_TOLERANCE = 1e-9


def prob_route_monitored(N: int, C: int, r: int, l: int) -> float:
    """
    Probability that a route through r intermediates with l-hop segments meets at
    least one monitor, when its relays are distinct vertices and the C
    non-monitors are placed uniformly:

        1 - prod_{i=0}^{(r+1)·l} (C - i) / (N - i)

    The product keeps the inclusive upper index, one factor more than the hop count.
    N=1021, C=700, r=2, l=6 gives 0.9992.
    """
    if N < 1 or not 0 <= C <= N:
        raise DomainError(f"need 0 <= C <= N, got C={C}, N={N}")
    if r < 0 or l < 1:
        raise DomainError(f"need r >= 0 and l >= 1, got r={r}, l={l}")
    upper = (r + 1) * l
    if upper >= N:
        raise DomainError(f"route of {upper} hops needs more distinct vertices than the {N} available")
    unmonitored = math.prod(max(C - i, 0) / (N - i) for i in range(upper + 1))
    return 1.0 - unmonitored


def prob_route_monitored_independent(N: int, C: int, hops: int) -> float:
    """Free-walk model: every hop lands on a non-monitor independently with probability C/N."""
    if N < 1 or not 0 <= C <= N:
        raise DomainError(f"need 0 <= C <= N, got C={C}, N={N}")
    if hops < 0:
        raise DomainError(f"hops must be non-negative, got {hops}")
    return 1.0 - (C / N) ** hops


def confinement_bound(beta: float, t: int) -> float:
    """Pr[a t-step walk stays inside the non-monitors] <= β^t."""
    if not 0 <= beta <= 1:
        raise DomainError(f"beta must be in [0, 1], got {beta}")
    if t < 1:
        raise DomainError(f"t must be at least 1, got {t}")
    return beta ** t


@dataclass(frozen=True)
class UnmonitoredBound:
    real: float
    nearest: int
    floor: int

    def to_dict(self) -> dict:
        return {'real': self.real, 'nearest': self.nearest, 'floor': self.floor}


def max_unmonitored_bound(N: int, t: int, target: float) -> UnmonitoredBound:
    """
    Largest non-monitor count C with (C/N)^t <= target, i.e. C <= target^(1/t)·N.
    For N=1021, t=6, target=0.5 the real bound is 909.6: the nearest integer is
    910 and the strict floor 909.
    """
    if not 0 < target < 1:
        raise DomainError(f"target must be in (0, 1), got {target}")
    if t < 1 or N < 1:
        raise DomainError(f"need N >= 1 and t >= 1, got N={N}, t={t}")
    real = target ** (1.0 / t) * N
    return UnmonitoredBound(real, int(math.floor(real + 0.5)), int(math.floor(real)))


@dataclass(frozen=True)
class ChernoffBound:
    mean: float
    delta: float
    bound: float

    def to_dict(self) -> dict:
        return {'mean': self.mean, 'delta': self.delta, 'bound': self.bound}


def chernoff_tail_bound(N: int, C: int, t: int, delta: float) -> ChernoffBound:
    """
    X counts the monitors met on a t-hop free walk, mean μ = t·(N-C)/N.
    Pr[X <= μ - δ] <= exp(-2δ²/t), for 0 < δ <= μ. With δ = μ this bounds the
    chance of meeting no monitor at all.
    """
    if N < 1 or not 0 <= C <= N or t < 1:
        raise DomainError(f"need N >= 1, 0 <= C <= N and t >= 1, got N={N}, C={C}, t={t}")
    mean = t * (N - C) / N
    if not 0 < delta <= mean:
        raise DomainError(f"delta must be in (0, {mean}], got {delta}")
    return ChernoffBound(mean, delta, math.exp(-2.0 * delta * delta / t))


def path_probability(N: int, N_mix: int, r_max: int = 1, base: float = 2.0) -> float:
    """
    Probability of one particular path given the routing constraints,
    (1/r)·(r·log N / N_mix) = log N / N_mix. Choosing r uniformly among r_max
    values cancels out, so r_max only has to be valid.
    """
    if r_max < 1:
        raise InvalidParameterError(f"r_max must be at least 1, got {r_max}")
    if N < 2:
        raise DomainError(f"N must be at least 2, got {N}")
    log_n = math.log(N, base)
    if N_mix < log_n:
        raise DomainError(f"N_mix must be at least log N = {log_n:.4g}, got {N_mix}")
    return log_n / N_mix


@dataclass(frozen=True)
class SystemObservation:
    """What a global observer sees: N_msg messages over N vertices, N_mix of them eligible as intermediates."""
    message_count: int
    vertex_count: int
    mix_count: int
    r_max: int = 1
    log_base: float = 2.0

    @property
    def path_probability(self) -> float:
        return path_probability(self.vertex_count, self.mix_count, self.r_max, self.log_base)


@dataclass(frozen=True)
class HiddenStateProbability:
    message_count: int
    path_probability: float
    log_probability: float
    probability: Optional[float]

    def to_dict(self) -> dict:
        return {
            'message_count': self.message_count,
            'path_probability': self.path_probability,
            'log_probability': self.log_probability,
            'probability': self.probability,
        }


def hidden_state_probability(obs: SystemObservation) -> HiddenStateProbability:
    """
    All paths are equiprobable, so any hidden state consistent with the
    observation has probability (log N / N_mix)^N_msg. Kept in log space; the
    linear value is None when it underflows.
    """
    if obs.message_count < 1:
        raise InvalidParameterError(f"message count must be at least 1, got {obs.message_count}")
    p = obs.path_probability
    log_probability = obs.message_count * math.log(p)
    linear = math.exp(log_probability)
    return HiddenStateProbability(obs.message_count, p, log_probability, linear if linear > 0 else None)


class RoutingKernel:
    """
    Row-stochastic matrix R with R[u, v] the chance a packet at u moves to v next.
    The Valiant walk ignores s and t, so one matrix serves every pair.
    """

    def __init__(self, matrix: np.ndarray, name: str = "custom"):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InvalidKernelError(f"kernel must be square, got shape {matrix.shape}")
        if (matrix < 0).any():
            raise InvalidKernelError("kernel has negative entries")
        sums = matrix.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > KERNEL_TOLERANCE)
        if bad.size:
            raise InvalidKernelError(f"kernel row {int(bad[0])} sums to {sums[bad[0]]!r}, not 1")
        self.matrix = matrix
        self.name = name

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def uniform(cls, o: OverlayGraph) -> "RoutingKernel":
        adjacency = (o.graph.adjacency > 0).astype(float).toarray()
        return cls(adjacency / _row_sums(adjacency), "uniform")

    @classmethod
    def weighted(cls, o: OverlayGraph) -> "RoutingKernel":
        adjacency = o.graph.adjacency.toarray()
        return cls(adjacency / _row_sums(adjacency), "weighted")

    @classmethod
    def metropolis(cls, o: OverlayGraph) -> "RoutingKernel":
        """Uniform proposals accepted with min(1, deg(u)/deg(v)); the stationary law is uniform."""
        adjacency = (o.graph.adjacency > 0).astype(float).toarray()
        degree = adjacency.sum(axis=1)
        if (degree == 0).any():
            raise InvalidKernelError("metropolis kernel needs every vertex to have a neighbor")
        matrix = adjacency * np.minimum(1.0 / degree[:, None], 1.0 / degree[None, :])
        matrix[np.diag_indices_from(matrix)] = 1.0 - matrix.sum(axis=1)
        return cls(matrix, "metropolis")

    @classmethod
    def named(cls, o: OverlayGraph, name: str) -> "RoutingKernel":
        builders = {'uniform': cls.uniform, 'weighted': cls.weighted, 'metropolis': cls.metropolis}
        if name not in builders:
            raise InvalidParameterError(f"unknown kernel {name!r}, expected one of {sorted(builders)}")
        return builders[name](o)

    def hit_matrix(self, hops: int) -> np.ndarray:
        """F[x, v] = chance that a walk from x is at v at some step 1..hops."""
        n = self.size
        hit = np.zeros((n, n))
        identity = np.eye(n)
        for _ in range(hops):
            hit = self.matrix @ (hit - np.diag(np.diag(hit)) + identity)
        return hit


def _row_sums(matrix: np.ndarray) -> np.ndarray:
    sums = matrix.sum(axis=1, keepdims=True)
    if (sums == 0).any():
        raise InvalidKernelError("an isolated vertex has no outgoing probability")
    return sums


@dataclass(frozen=True)
class RbcTable:
    """
    delta[v]: expected number of route segments passing through v (δ(s) = 1).
    occupancy[j, v]: chance the packet sits at v after j walk hops; rows sum to 1.
    """
    source: int
    destination: int
    r: int
    segment_length: int
    kernel_name: str
    delta: np.ndarray
    occupancy: np.ndarray
    kernel: RoutingKernel

    @property
    def hops(self) -> int:
        return (self.r + 1) * self.segment_length

    def predecessors(self, v: int) -> Tuple[int, ...]:
        """Vertices the packet can be at immediately before reaching v."""
        reachable = self.occupancy[:-1].sum(axis=0) > 0
        return tuple(int(u) for u in np.flatnonzero(reachable & (self.kernel.matrix[:, v] > 0)))

    def rows(self) -> list:
        return [{'vertex': v, 'delta': float(d)} for v, d in enumerate(self.delta)]

    def to_dict(self) -> dict:
        return {
            'source': self.source,
            'destination': self.destination,
            'r': self.r,
            'segment_length': self.segment_length,
            'kernel': self.kernel_name,
            'delta_min': float(self.delta.min()),
            'delta_max': float(self.delta.max()),
            'delta_destination': float(self.delta[self.destination]),
        }


def _validate_pair(kernel: RoutingKernel, s: int, t: int, r: int, l: int) -> None:
    n = kernel.size
    if not (0 <= s < n and 0 <= t < n):
        raise InvalidParameterError(f"pair ({s}, {t}) is outside 0..{n - 1}")
    if r < 0 or l < 1:
        raise InvalidParameterError(f"need r >= 0 and l >= 1, got r={r}, l={l}")


def _rbc(kernel: RoutingKernel, hit: np.ndarray, s: int, t: int, r: int, l: int) -> RbcTable:
    n = kernel.size
    occupancy = np.zeros(((r + 1) * l + 1, n))
    occupancy[0, s] = 1.0
    for j in range(1, occupancy.shape[0]):
        occupancy[j] = occupancy[j - 1] @ kernel.matrix
    delta = sum(occupancy[m * l] @ hit for m in range(r + 1))
    delta[s] = 1.0
    return RbcTable(s, t, r, l, kernel.name, delta, occupancy, kernel)


def rbc_table(o: OverlayGraph, kernel: RoutingKernel, s: int, t: int, r: int = 1, l: Optional[int] = None) -> RbcTable:
    """
    Routing betweenness of every vertex for packets from s to t, by dynamic
    programming over the (r+1)·l walk hops.

    Parameters:
    o (OverlayGraph): the overlay the kernel was built on
    kernel (RoutingKernel): next-hop probabilities
    s, t (int): the pair
    r (int): intermediates per route
    l (int or None): segment length, defaults to the routing default for o

    Returns:
    RbcTable: δ per vertex, the per-hop occupancy and predecessor lookup
    """
    l = l or default_segment_length(o)
    if kernel.size != o.vertex_count:
        raise InvalidKernelError(f"kernel is {kernel.size}x{kernel.size} but the overlay has {o.vertex_count} vertices")
    _validate_pair(kernel, s, t, r, l)
    return _rbc(kernel, kernel.hit_matrix(l), s, t, r, l)


@dataclass(frozen=True)
class RbcAggregate:
    pair_count: int
    r: int
    segment_length: int
    kernel_name: str
    delta: np.ndarray

    @property
    def coefficient_of_variation(self) -> float:
        mean = float(self.delta.mean())
        return float(self.delta.std() / mean) if mean > 0 else 0.0

    def rows(self) -> list:
        return [{'vertex': v, 'delta': float(d)} for v, d in enumerate(self.delta)]

    def to_dict(self) -> dict:
        return {
            'pair_count': self.pair_count,
            'r': self.r,
            'segment_length': self.segment_length,
            'kernel': self.kernel_name,
            'delta_mean': float(self.delta.mean()),
            'delta_min': float(self.delta.min()),
            'delta_max': float(self.delta.max()),
            'coefficient_of_variation': self.coefficient_of_variation,
        }


def rbc_aggregate(o: OverlayGraph, kernel: RoutingKernel, pairs: Sequence[Tuple[int, int]], r: int = 1,
                  l: Optional[int] = None) -> RbcAggregate:
    """Mean δ over many pairs; the hit matrix is shared across them."""
    if not pairs:
        raise InvalidParameterError("rbc aggregation needs at least one pair")
    l = l or default_segment_length(o)
    hit = kernel.hit_matrix(l)
    total = np.zeros(kernel.size)
    for s, t in pairs:
        _validate_pair(kernel, s, t, r, l)
        total += _rbc(kernel, hit, s, t, r, l).delta
    return RbcAggregate(len(pairs), r, l, kernel.name, total / len(pairs))


@dataclass(frozen=True)
class AnonymityReport:
    probabilities: Tuple[float, ...]
    entropy: float
    max_entropy: float
    degree: float

    def to_dict(self) -> dict:
        return {
            'subjects': len(self.probabilities),
            'entropy': self.entropy,
            'max_entropy': self.max_entropy,
            'degree': self.degree,
        }


def anonymity_degree(p: Iterable[float]) -> AnonymityReport:
    """
    d = H(X) / log2 N with H(X) = -Σ p_i log2 p_i; zero entries contribute nothing.
    Uniform inputs give exactly 1, a point mass gives 0.
    """
    probabilities = np.asarray(list(p), dtype=float)
    n = probabilities.size
    if n < 2:
        raise InvalidParameterError(f"an anonymity set needs at least 2 subjects, got {n}")
    if (probabilities < 0).any():
        raise InvalidParameterError("probabilities must be non-negative")
    total = math.fsum(probabilities)
    if abs(total - 1.0) > PROBABILITY_TOLERANCE:
        raise InvalidParameterError(f"probabilities sum to {total!r}, not 1")
    max_entropy = math.log2(n)
    if (probabilities == probabilities[0]).all():
        return AnonymityReport(tuple(probabilities.tolist()), max_entropy, max_entropy, 1.0)
    positive = probabilities[probabilities > 0]
    entropy = max(0.0, -math.fsum(positive * np.log2(positive)))
    return AnonymityReport(tuple(probabilities.tolist()), entropy, max_entropy, entropy / max_entropy)


def cover_traffic_cost(max_degree: int, N: int) -> int:
    """Dummy messages per round when every node sends on each incident edge: at most d_max·N."""
    return max_degree * N


def predecessor_attack_rounds(n: int, c: int) -> float:
    """Rounds a predecessor attack with c colluders needs, about (n/c)²·ln n."""
    if not 1 <= c < n:
        raise InvalidParameterError(f"need 1 <= c < n, got c={c}, n={n}")
    return (n / c) ** 2 * math.log(n)


@dataclass(frozen=True)
class AttackCostReport:
    vertex_count: int
    attackers: int
    max_degree: int
    cover_traffic: int
    predecessor_rounds: float
    route_length: int

    def to_dict(self) -> dict:
        return {
            'vertex_count': self.vertex_count,
            'attackers': self.attackers,
            'max_degree': self.max_degree,
            'cover_traffic': self.cover_traffic,
            'predecessor_rounds': self.predecessor_rounds,
            'route_length': self.route_length,
            'route_length_log_n': math.log(self.vertex_count),
        }


def attack_cost_report(o: OverlayGraph, c: int, r: int = 1) -> AttackCostReport:
    n = o.vertex_count
    rounds = predecessor_attack_rounds(n, c)
    return AttackCostReport(n, c, o.max_degree, cover_traffic_cost(o.max_degree, n), rounds,
                            (r + 1) * default_segment_length(o))


def monitor_count_estimate(N: int, l: int) -> int:
    """⌈N/l⌉ monitors, one per walk segment length. The order N/log N is what matters; the constant is ours."""
    if l < 1:
        raise InvalidParameterError(f"l must be at least 1, got {l}")
    return math.ceil(N / l)


@dataclass(frozen=True)
class VisitRateReport:
    walkers: int
    steps: int
    kernel: str
    rates: np.ndarray

    @property
    def total_hops(self) -> int:
        return self.walkers * self.steps

    @property
    def coefficient_of_variation(self) -> float:
        return float(self.rates.std() / self.rates.mean())

    def to_dict(self) -> dict:
        return {
            'walkers': self.walkers,
            'steps': self.steps,
            'kernel': self.kernel,
            'total_hops': self.total_hops,
            'rate_min': float(self.rates.min()),
            'rate_max': float(self.rates.max()),
            'coefficient_of_variation': self.coefficient_of_variation,
        }


def visit_rate_report(o: OverlayGraph, walkers: int, steps: int, seed: int = 0,
                      kernel: str = "uniform") -> VisitRateReport:
    """
    Run `walkers` walks of `steps` hops side by side from uniform starts and count
    how often each vertex is visited. Uniform walks favour high-degree vertices in
    the long run; the metropolis kernel corrects for that.
    """
    if walkers < 1 or steps < 1:
        raise InvalidParameterError("walkers and steps must be at least 1")
    if kernel not in ("uniform", "metropolis"):
        raise InvalidParameterError(f"kernel must be 'uniform' or 'metropolis', got {kernel!r}")
    adjacency = o.graph.adjacency
    indptr, indices = adjacency.indptr, adjacency.indices
    degree = np.diff(indptr)
    rng = derive_rng(seed, STREAM_WALKS, 1)
    positions = rng.integers(o.vertex_count, size=walkers)
    counts = np.zeros(o.vertex_count, dtype=np.int64)
    for _ in range(steps):
        proposal = uniform_step(indptr, indices, positions, rng.random(walkers))
        if kernel == "metropolis":
            accept = rng.random(walkers) * degree[proposal] < degree[positions]
            proposal = np.where(accept, proposal, positions)
        positions = proposal
        counts += np.bincount(positions, minlength=o.vertex_count)
    rates = counts / (walkers * steps)
    logger.debug("visit rates over %d hops: min %.3g, max %.3g", walkers * steps, rates.min(), rates.max())
    return VisitRateReport(walkers, steps, kernel, rates)
