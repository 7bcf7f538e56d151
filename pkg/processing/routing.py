"""
Valiant-style multi-segment routing over an overlay.

A route from s to t is r+1 random-walk segments of l hops each; the endpoints of
the first r segments are the intermediate destinations. The last segment is a
plain walk too, so delivery to t is completed by splicing a shortest overlay path
from where that walk ends. Splice hops are kept apart from walk hops: the
monitoring formulas only count walk hops.
"""
import hashlib
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csgraph
from scipy.stats import norm

from processing.errors import GraphParseError, InvalidParameterError, RouteError
from processing.spanning_tree import OverlayGraph
from utils.seeding import STREAM_FLOWS, STREAM_MONITORS, STREAM_ROUTES, STREAM_WALKS, DrawStream, derive_rng, derive_seed

logger = logging.getLogger(__name__)

DEFAULT_EXTENSION_PROBABILITY = 0.25
MAX_ROUTE_ATTEMPTS = 64
CONFIDENCE = 0.95


class RoutingMode(str, Enum):
    INCREMENTAL = "incremental"
    LOOSE = "loose"


class RevisitPolicy(str, Enum):
    FREE = "free"
    NON_REVISITING = "non-revisiting"


def log_segment_length(n: int, base: float) -> int:
    """⌊log_base n⌋ clamped to at least 1; n=1021 with base 3 gives 6."""
    if base <= 1 or n < 2:
        return 1
    return max(1, math.floor(math.log(n) / math.log(base) + 1e-9))


def default_segment_length(o: OverlayGraph, base: Optional[float] = None) -> int:
    """l for routes over o: the log of n in base b, b defaulting to the overlay's average degree."""
    return log_segment_length(o.vertex_count, o.average_degree if base is None else base)


@dataclass(frozen=True)
class RoutePlan:
    source: int
    destination: int
    intermediates: Tuple[int, ...]
    segments: Tuple[Tuple[int, ...], ...]
    segment_length: int
    mode: RoutingMode
    revisit_policy: RevisitPolicy
    splice: Tuple[int, ...] = ()
    extensions: int = 0

    @property
    def walk_path(self) -> Tuple[int, ...]:
        """Vertices of the walk hops in order, starting with the source."""
        path = [self.source]
        for segment in self.segments:
            path.extend(segment[1:])
        return tuple(path)

    @property
    def path(self) -> Tuple[int, ...]:
        return self.walk_path + self.splice[1:]

    @property
    def hop_count(self) -> int:
        return sum(len(segment) - 1 for segment in self.segments)

    @property
    def splice_hops(self) -> int:
        return max(0, len(self.splice) - 1)

    @property
    def relays(self) -> Tuple[int, ...]:
        """Walk-hop vertices that may observe the message: everything but s and t."""
        return tuple(v for v in self.walk_path[1:] if v != self.source and v != self.destination)

    @property
    def digest(self) -> str:
        text = ' '.join(map(str, self.path)) + f"|{len(self.walk_path)}"
        return hashlib.blake2b(text.encode('utf-8'), digest_size=8).hexdigest()

    def to_dict(self) -> dict:
        return {
            'source': self.source,
            'destination': self.destination,
            'intermediates': list(self.intermediates),
            'segments': [list(s) for s in self.segments],
            'segment_length': self.segment_length,
            'mode': self.mode.value,
            'revisit_policy': self.revisit_policy.value,
            'splice': list(self.splice),
            'extensions': self.extensions,
            'hop_count': self.hop_count,
        }


@dataclass(frozen=True)
class MonitorSet:
    vertex_count: int
    monitored: FrozenSet[int]

    def __post_init__(self):
        outside = [v for v in self.monitored if not 0 <= v < self.vertex_count]
        if outside:
            raise InvalidParameterError(f"monitor {outside[0]} is not a vertex of a {self.vertex_count}-vertex overlay")

    @classmethod
    def everyone(cls, n: int) -> "MonitorSet":
        return cls(n, frozenset(range(n)))

    @classmethod
    def nobody(cls, n: int) -> "MonitorSet":
        return cls(n, frozenset())

    @classmethod
    def random(cls, n: int, monitor_count: int, seed: int) -> "MonitorSet":
        """Uniform choice of monitor_count monitors, without replacement."""
        if not 0 <= monitor_count <= n:
            raise InvalidParameterError(f"monitor count must be in [0, {n}], got {monitor_count}")
        rng = derive_rng(seed, STREAM_MONITORS, 0)
        return cls(n, frozenset(int(v) for v in rng.choice(n, size=monitor_count, replace=False)))

    @property
    def monitor_count(self) -> int:
        return len(self.monitored)

    @property
    def non_monitor_count(self) -> int:
        return self.vertex_count - len(self.monitored)

    @property
    def beta(self) -> float:
        return self.non_monitor_count / self.vertex_count

    def to_dict(self) -> dict:
        return {
            'vertex_count': self.vertex_count,
            'monitor_count': self.monitor_count,
            'non_monitor_count': self.non_monitor_count,
            'beta': self.beta,
        }


def parse_monitors(text: str, n: int) -> MonitorSet:
    """Whitespace- or newline-separated vertex ids, `#` comments allowed."""
    vertices = set()
    for line_number, raw in enumerate(text.splitlines(), start=1):
        for token in raw.split('#', 1)[0].split():
            try:
                vertices.add(int(token))
            except ValueError:
                raise GraphParseError(f"bad vertex id {token!r}", line_number) from None
    return MonitorSet(n, frozenset(vertices))


def parse_flows(text: str, n: int) -> List[Tuple[int, int]]:
    flows = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise GraphParseError(f"expected 's t', found {len(fields)} fields", line_number)
        try:
            s, t = int(fields[0]), int(fields[1])
        except ValueError:
            raise GraphParseError("malformed flow", line_number) from None
        if not (0 <= s < n and 0 <= t < n):
            raise GraphParseError(f"flow ({s}, {t}) names a vertex outside 0..{n - 1}", line_number)
        flows.append((s, t))
    if not flows:
        raise GraphParseError("flows file is empty")
    return flows


def random_flows(n: int, count: int, seed: int) -> List[Tuple[int, int]]:
    """count uniformly chosen (s, t) pairs with s != t."""
    if n < 2 or count < 1:
        raise InvalidParameterError("random flows need at least 2 vertices and a positive count")
    rng = derive_rng(seed, STREAM_FLOWS, 0)
    sources = rng.integers(n, size=count)
    offsets = rng.integers(1, n, size=count)
    return [(int(s), int((s + d) % n)) for s, d in zip(sources, offsets)]


class RoutePlanner:
    """
    Plans routes over one overlay. Shortest-path trees toward each destination are
    computed once and reused by every route that ends there.
    """

    def __init__(self, o: OverlayGraph, segment_length: Optional[int] = None,
                 extension_probability: float = DEFAULT_EXTENSION_PROBABILITY,
                 max_attempts: int = MAX_ROUTE_ATTEMPTS):
        if segment_length is not None and segment_length < 1:
            raise InvalidParameterError(f"segment length must be at least 1, got {segment_length}")
        if not 0 <= extension_probability <= 1:
            raise InvalidParameterError(f"extension probability must be in [0, 1], got {extension_probability}")
        if o.vertex_count < 2 or not o.graph.is_connected:
            raise InvalidParameterError("routing needs a connected overlay with at least 2 vertices")
        self.overlay = o
        self.neighbors = o.graph.neighbor_lists
        self.segment_length = segment_length or default_segment_length(o)
        self.extension_probability = extension_probability
        self.max_attempts = max_attempts
        self._toward: Dict[int, np.ndarray] = {}

    def _predecessors(self, t: int) -> np.ndarray:
        if t not in self._toward:
            _, predecessors = csgraph.breadth_first_order(self.overlay.graph.adjacency, t, directed=False,
                                                          return_predecessors=True)
            self._toward[t] = predecessors
        return self._toward[t]

    def splice_path(self, start: int, t: int) -> Tuple[int, ...]:
        """Shortest overlay path from start to t, both included."""
        if start == t:
            return (t,)
        toward = self._predecessors(t)
        path = [start]
        while path[-1] != t:
            path.append(int(toward[path[-1]]))
        return tuple(path)

    def _walk(self, start: int, hops: int, draws: DrawStream, visited: Optional[set]) -> Optional[List[int]]:
        segment = [start]
        current = start
        for _ in range(hops):
            nbrs = self.neighbors[current]
            if visited is not None:
                nbrs = [v for v in nbrs if v not in visited]
                if not nbrs:
                    return None
            current = nbrs[draws.index(len(nbrs))]
            segment.append(current)
            if visited is not None:
                visited.add(current)
        return segment

    def _attempt(self, s: int, r: int, mode: RoutingMode, policy: RevisitPolicy,
                 draws: DrawStream) -> Optional[Tuple[List[Tuple[int, ...]], int]]:
        visited = {s} if policy is RevisitPolicy.NON_REVISITING else None
        segments = []
        extensions = 0
        current = s
        for index in range(r + 1):
            segment = self._walk(current, self.segment_length, draws, visited)
            if segment is None:
                return None
            segments.append(tuple(segment))
            current = segment[-1]
            # a relay in loose mode may push the message one more segment before the next phase
            if mode is RoutingMode.LOOSE and index < r and draws.next() < self.extension_probability:
                segment = self._walk(current, self.segment_length, draws, visited)
                if segment is None:
                    return None
                segments.append(tuple(segment))
                current = segment[-1]
                extensions += 1
        return segments, extensions

    def plan(self, s: int, t: int, r: int, mode: RoutingMode = RoutingMode.INCREMENTAL,
             revisit_policy: RevisitPolicy = RevisitPolicy.FREE, seed: int = 0) -> RoutePlan:
        n = self.overlay.vertex_count
        if r < 1:
            raise InvalidParameterError(f"r must be at least 1, got {r}")
        for v in (s, t):
            if not 0 <= v < n:
                raise InvalidParameterError(f"vertex {v} is not in the overlay (0..{n - 1})")
        mode, revisit_policy = RoutingMode(mode), RevisitPolicy(revisit_policy)
        draws = DrawStream(np.random.default_rng(seed), block=2 * (r + 1) * self.segment_length + 8)
        for attempt in range(self.max_attempts):
            outcome = self._attempt(s, r, mode, revisit_policy, draws)
            if outcome is not None:
                break
            logger.debug("route %d -> %d: walk got stuck on attempt %d", s, t, attempt + 1)
        else:
            logger.warning("no self-avoiding route %d -> %d after %d attempts", s, t, self.max_attempts)
            raise RouteError(f"could not build a non-revisiting route from {s} to {t} "
                             f"in {self.max_attempts} attempts")
        segments, extensions = outcome
        intermediates = tuple(segment[-1] for segment in segments[:-1])
        splice = self.splice_path(segments[-1][-1], t)
        return RoutePlan(s, t, intermediates, tuple(segments), self.segment_length, mode, revisit_policy,
                         splice if len(splice) > 1 else (), extensions)


def plan_route(o: OverlayGraph, s: int, t: int, r: int, mode: RoutingMode = RoutingMode.INCREMENTAL,
               revisit_policy: RevisitPolicy = RevisitPolicy.FREE, seed: int = 0,
               segment_length: Optional[int] = None,
               extension_probability: float = DEFAULT_EXTENSION_PROBABILITY) -> RoutePlan:
    """
    Plan one route from s to t through r intermediate destinations.

    Parameters:
    o (OverlayGraph): connected overlay
    s, t (int): source and destination
    r (int): number of intermediates, at least 1
    mode (RoutingMode): incremental, or loose where each relay may add one extra segment
    revisit_policy (RevisitPolicy): free walks, or walks that never repeat a vertex
    seed (int): route seed
    segment_length (int or None): l, defaults to ⌊log_b n⌋ with b the average overlay degree
    extension_probability (float): chance of an extra segment per relay in loose mode

    Returns:
    RoutePlan: segments, intermediates and the delivery splice
    """
    planner = RoutePlanner(o, segment_length, extension_probability)
    return planner.plan(s, t, r, mode, revisit_policy, seed)


@dataclass(frozen=True)
class TrafficRecord:
    trial: int
    source: int
    destination: int
    plan_digest: str
    hop_count: int
    splice_hops: int
    monitored: bool
    first_monitor_hop: Optional[int]
    first_monitor: Optional[int]
    splice_monitored: bool

    def to_dict(self) -> dict:
        return {
            'trial': self.trial,
            'source': self.source,
            'destination': self.destination,
            'plan_digest': self.plan_digest,
            'hop_count': self.hop_count,
            'splice_hops': self.splice_hops,
            'monitored': self.monitored,
            'first_monitor_hop': self.first_monitor_hop,
            'first_monitor': self.first_monitor,
            'splice_monitored': self.splice_monitored,
        }


def wilson_interval(successes: int, trials: int, confidence: float = CONFIDENCE) -> Tuple[float, float]:
    if trials < 1:
        raise InvalidParameterError("an interval needs at least one trial")
    z = float(norm.ppf(0.5 + confidence / 2))
    p = successes / trials
    denominator = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denominator
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denominator
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class TrafficTrace:
    records: Tuple[TrafficRecord, ...]
    seed: int
    r: int
    segment_length: int
    mode: RoutingMode
    revisit_policy: RevisitPolicy
    monitors: MonitorSet
    plans: Tuple[RoutePlan, ...] = field(default=(), repr=False)

    @property
    def trials(self) -> int:
        return len(self.records)

    @property
    def monitored_count(self) -> int:
        return sum(record.monitored for record in self.records)

    @property
    def monitored_fraction(self) -> float:
        return self.monitored_count / self.trials

    @property
    def interval(self) -> Tuple[float, float]:
        return wilson_interval(self.monitored_count, self.trials)

    def first_monitor_counts(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for record in self.records:
            if record.first_monitor is not None:
                counts[record.first_monitor] = counts.get(record.first_monitor, 0) + 1
        return counts

    def summary(self) -> dict:
        low, high = self.interval
        return {
            'trials': self.trials,
            'monitored_count': self.monitored_count,
            'monitored_fraction': self.monitored_fraction,
            'wilson_95': [low, high],
            'mean_hops': sum(r.hop_count for r in self.records) / self.trials,
            'mean_splice_hops': sum(r.splice_hops for r in self.records) / self.trials,
            'splice_monitored_count': sum(r.splice_monitored for r in self.records),
            'r': self.r,
            'segment_length': self.segment_length,
            'mode': self.mode.value,
            'revisit_policy': self.revisit_policy.value,
            'seed': self.seed,
            'monitors': self.monitors.to_dict(),
        }


def _observe(trial: int, plan: RoutePlan, monitors: FrozenSet[int]) -> TrafficRecord:
    first_hop = None
    first_monitor = None
    for hop, v in enumerate(plan.walk_path):
        if v != plan.source and v != plan.destination and v in monitors:
            first_hop, first_monitor = hop, v
            break
    splice_monitored = any(v in monitors for v in plan.splice[1:-1])
    return TrafficRecord(trial, plan.source, plan.destination, plan.digest, plan.hop_count, plan.splice_hops,
                         first_hop is not None, first_hop, first_monitor, splice_monitored)


def simulate_traffic(o: OverlayGraph, flows: Sequence[Tuple[int, int]], r: int, mode: RoutingMode,
                     monitors: MonitorSet, trials: int, seed: int,
                     revisit_policy: RevisitPolicy = RevisitPolicy.FREE, segment_length: Optional[int] = None,
                     extension_probability: float = DEFAULT_EXTENSION_PROBABILITY,
                     keep_plans: bool = False) -> TrafficTrace:
    """
    Route `trials` messages, cycling through the flows, and mark each one monitored
    iff a walk-hop vertex other than its endpoints is a monitor. Trial i is planned
    with a seed derived from (seed, i) alone.
    """
    if trials < 1:
        raise InvalidParameterError(f"trials must be at least 1, got {trials}")
    if not flows:
        raise InvalidParameterError("at least one flow is needed")
    if monitors.vertex_count != o.vertex_count:
        raise InvalidParameterError("monitor set and overlay disagree on the vertex count")
    planner = RoutePlanner(o, segment_length, extension_probability)
    watched = monitors.monitored
    records = []
    plans = []
    for i in range(trials):
        s, t = flows[i % len(flows)]
        plan = planner.plan(s, t, r, mode, revisit_policy, derive_seed(seed, STREAM_ROUTES, i))
        records.append(_observe(i, plan, watched))
        if keep_plans:
            plans.append(plan)
    trace = TrafficTrace(tuple(records), seed, r, planner.segment_length, RoutingMode(mode),
                         RevisitPolicy(revisit_policy), monitors, tuple(plans))
    logger.info("simulated %d routes: %d monitored", trials, trace.monitored_count)
    return trace


def walk_endpoint_distribution(o: OverlayGraph, start: int, steps: int, walks: int, seed: int) -> np.ndarray:
    """Empirical distribution of where a uniform walk from `start` sits after `steps` hops."""
    adjacency = o.graph.adjacency
    rng = derive_rng(seed, STREAM_WALKS, start)
    positions = np.full(walks, start, dtype=np.int64)
    for _ in range(steps):
        positions = uniform_step(adjacency.indptr, adjacency.indices, positions, rng.random(walks))
    return np.bincount(positions, minlength=o.vertex_count) / walks


def uniform_step(indptr: np.ndarray, indices: np.ndarray, positions: np.ndarray, draws: np.ndarray) -> np.ndarray:
    """One uniform-neighbor step for every walker at once (CSR adjacency)."""
    start = indptr[positions]
    degree = indptr[positions + 1] - start
    offsets = np.minimum((draws * degree).astype(np.int64), degree - 1)
    return indices[start + offsets]


def total_variation(p: Iterable[float], q: Iterable[float]) -> float:
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())
