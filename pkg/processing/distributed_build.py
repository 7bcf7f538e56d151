"""
Simulated distributed overlay construction. A controller delegates batches of tree
generation to worker threads, unions what comes back, verifies the overlay and
doubles the request until verification passes or the round cap is hit.

Tree i of a construction is always seeded from (master seed, i), so the overlay
does not depend on how many workers there are or in which order they answer.
"""
import logging
import math
import queue
import threading
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

from processing.errors import InvalidParameterError
from processing.graph import WeightedGraph, require_tree_ready
from processing.spanning_tree import (
    OverlayGraph,
    SpanningTree,
    WeightMode,
    generate_trees,
    overlay_from_trees,
)
from processing.verifier import (
    DEFAULT_CAP_FACTOR,
    NEIGHBOR_CURRENT,
    CoverReport,
    mixing_cover_test,
    parallel_cover_test,
)
from utils.seeding import STREAM_VERIFY, derive_seed
from utils.split_work import split_evenly

logger = logging.getLogger(__name__)

METHOD_MIXING = "mixing"
METHOD_PARALLEL = "parallel"


@dataclass(frozen=True)
class SeedStream:
    """The slice of a construction's tree indices assigned to one worker."""
    master_seed: int
    indices: Tuple[int, ...]


@dataclass(frozen=True)
class VerificationConfig:
    method: str = METHOD_MIXING
    cap_factor: float = DEFAULT_CAP_FACTOR
    neighbor_mode: str = NEIGHBOR_CURRENT
    walk_count: Optional[int] = None
    walk_length: Optional[int] = None

    def __post_init__(self):
        if self.method not in (METHOD_MIXING, METHOD_PARALLEL):
            raise InvalidParameterError(f"verification method must be 'mixing' or 'parallel', got {self.method!r}")

    def run(self, o: OverlayGraph, seed: int) -> CoverReport:
        if self.method == METHOD_MIXING:
            return mixing_cover_test(o, self.cap_factor, seed, self.neighbor_mode)
        n = o.vertex_count
        walk_count = self.walk_count or 4 * n
        walk_length = self.walk_length or max(1, math.ceil(4 * math.log(n)))
        return parallel_cover_test(o, walk_count, walk_length, seed)

    def to_dict(self) -> dict:
        return {
            'method': self.method,
            'cap_factor': self.cap_factor,
            'neighbor_mode': self.neighbor_mode,
            'walk_count': self.walk_count,
            'walk_length': self.walk_length,
        }


@dataclass(frozen=True)
class BuildRound:
    index: int
    k_requested: int
    trees_returned: int
    total_trees: int
    distinct_edges: int
    verification: CoverReport

    @property
    def passed(self) -> bool:
        return self.verification.success

    def to_dict(self) -> dict:
        return {
            'round': self.index,
            'k_requested': self.k_requested,
            'trees_returned': self.trees_returned,
            'total_trees': self.total_trees,
            'distinct_edges': self.distinct_edges,
            'passed': self.passed,
            'visited_count': self.verification.visited_count,
            'walk_length': self.verification.walk_length,
            'length_cap': self.verification.length_cap,
        }


@dataclass(frozen=True)
class BuildOrchestration:
    worker_count: int
    seed: int
    rounds: Tuple[BuildRound, ...]
    overlay: OverlayGraph
    round_cap: int
    failed: bool
    diagnostics: Tuple[str, ...] = field(default=())

    @property
    def total_trees(self) -> int:
        return self.rounds[-1].total_trees if self.rounds else 0

    @property
    def k_sequence(self) -> List[int]:
        return [r.k_requested for r in self.rounds]

    def to_dict(self) -> dict:
        return {
            'worker_count': self.worker_count,
            'seed': self.seed,
            'round_cap': self.round_cap,
            'failed': self.failed,
            'total_trees': self.total_trees,
            'k_sequence': self.k_sequence,
            'rounds': [r.to_dict() for r in self.rounds],
            'diagnostics': list(self.diagnostics),
            'overlay': self.overlay.to_dict(),
        }


def worker_generate_trees(g: WeightedGraph, count: int, seed_stream: SeedStream) -> List[SpanningTree]:
    """
    One worker's share: `count` trees from its seed substream.

    Parameters:
    g (WeightedGraph): the base graph
    count (int): number of trees, at least 1 and at most the substream length
    seed_stream (SeedStream): master seed plus the global tree indices assigned to this worker

    Returns:
    List[SpanningTree]: the trees, in index order
    """
    if count < 1 or count > len(seed_stream.indices):
        raise InvalidParameterError(f"count must be in [1, {len(seed_stream.indices)}], got {count}")
    return generate_trees(g, seed_stream.master_seed, seed_stream.indices[:count])


@dataclass(frozen=True)
class _TreeRequest:
    worker_id: int
    stream: SeedStream


@dataclass(frozen=True)
class _TreeBatch:
    worker_id: int
    stream: SeedStream
    trees: Tuple[SpanningTree, ...] = ()
    error: Optional[BaseException] = None


class _Worker(threading.Thread):
    """A logical controller unit: takes requests from its inbox, answers on the shared outbox."""

    def __init__(self, worker_id: int, graph: WeightedGraph, outbox: "queue.Queue[_TreeBatch]"):
        super().__init__(name=f"tree-worker-{worker_id}", daemon=True)
        self.worker_id = worker_id
        self.graph = graph
        self.inbox: "queue.Queue[Optional[_TreeRequest]]" = queue.Queue()
        self.outbox = outbox

    def run(self) -> None:
        while True:
            request = self.inbox.get()
            if request is None:
                return
            try:
                trees = worker_generate_trees(self.graph, len(request.stream.indices), request.stream)
                self.outbox.put(_TreeBatch(self.worker_id, request.stream, tuple(trees)))
            except Exception as oops:
                # re-raised by the master; a silent worker would leave it blocked on the outbox
                self.outbox.put(_TreeBatch(self.worker_id, request.stream, error=oops))


def _delegate(workers: Sequence[_Worker], outbox: "queue.Queue[_TreeBatch]", master_seed: int,
              indices: Sequence[int]) -> List[SpanningTree]:
    chunks = split_evenly(indices, len(workers))
    for worker, chunk in zip(workers, chunks):
        worker.inbox.put(_TreeRequest(worker.worker_id, SeedStream(master_seed, tuple(chunk))))
    batches = [outbox.get() for _ in chunks]
    for batch in batches:
        if batch.error is not None:
            raise batch.error
    # reassemble in global index order, whatever order the answers came in
    batches.sort(key=lambda b: b.stream.indices[0])
    return [tree for batch in batches for tree in batch.trees]


def default_round_cap(vertex_count: int) -> int:
    return math.ceil(math.log2(vertex_count)) + 1 if vertex_count > 1 else 1


def orchestrate_build(g: WeightedGraph, verification: Optional[VerificationConfig] = None, workers: int = 1,
                      seed: int = 0, weight_mode: WeightMode = WeightMode.PLAIN,
                      round_cap: Optional[int] = None,
                      progress: Optional[Callable[[str], None]] = None) -> BuildOrchestration:
    """
    Round r asks the workers for k_r = 2^(r-1) new trees, adds them to the overlay,
    then verifies it. Stops at the first passing verification or after round_cap
    rounds (default ⌈log2 n⌉ + 1); running out of rounds is reported through the
    `failed` flag, not raised.
    progress, when given, receives a one-line status before each round.
    """
    require_tree_ready(g)
    if workers < 1:
        raise InvalidParameterError(f"workers must be at least 1, got {workers}")
    verification = verification or VerificationConfig()
    round_cap = round_cap or default_round_cap(g.vertex_count)
    outbox: "queue.Queue[_TreeBatch]" = queue.Queue()
    pool = [_Worker(i, g, outbox) for i in range(workers)]
    for worker in pool:
        worker.start()

    trees: List[SpanningTree] = []
    rounds: List[BuildRound] = []
    overlay = None
    k = 1
    try:
        for index in range(1, round_cap + 1):
            if progress is not None:
                progress(f"Round {index}: sampling {k} trees ({len(trees)} so far)...")
            batch = _delegate(pool, outbox, seed, range(len(trees), len(trees) + k))
            trees.extend(batch)
            overlay = overlay_from_trees(g, trees, weight_mode, seed)
            report = verification.run(overlay, derive_seed(seed, STREAM_VERIFY, index))
            rounds.append(BuildRound(index, k, len(batch), len(trees), overlay.distinct_edge_count, report))
            logger.info("round %d: requested %d trees, total %d, %d distinct edges, verification %s",
                        index, k, len(trees), overlay.distinct_edge_count, "passed" if report.success else "failed")
            if report.success:
                break
            k *= 2
    finally:
        for worker in pool:
            worker.inbox.put(None)
        for worker in pool:
            worker.join()

    failed = not rounds[-1].passed
    diagnostics = ()
    if failed:
        last = rounds[-1].verification
        diagnostics = (
            f"verification did not pass within {round_cap} rounds",
            f"last {verification.method} check visited {last.visited_count} of {last.vertex_count} vertices "
            f"in {last.walk_length} steps (cap {last.length_cap})",
        )
        logger.warning("overlay construction failed: %s", "; ".join(diagnostics))
    return BuildOrchestration(workers, seed, tuple(rounds), overlay, round_cap, failed, diagnostics)
