"""
Deterministic seed streams. Every random object in the toolkit (tree i, walk i,
route for trial i, ...) gets its own generator derived from the master seed and
its index, never from scheduling order.
"""
import numpy as np

from processing.errors import InvalidParameterError

# stream tags keep e.g. tree #3 and route #3 from sharing a generator
STREAM_TREES = 0
STREAM_VERIFY = 1
STREAM_ROUTES = 2
STREAM_MONITORS = 3
STREAM_PROBES = 4
STREAM_FLOWS = 5
STREAM_WALKS = 6
STREAM_TOPOLOGY = 7


def _sequence(seed: int, keys) -> np.random.SeedSequence:
    if seed is None or int(seed) < 0:
        raise InvalidParameterError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))


def derive_seed(seed: int, *keys: int) -> int:
    """
    Derive a 64-bit child seed from a master seed and an index path.

    Parameters:
    seed (int): master seed
    keys (int): stream tag followed by indices, e.g. (STREAM_TREES, i)

    Returns:
    int: the child seed
    """
    return int(_sequence(seed, keys).generate_state(1, dtype=np.uint64)[0])


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(_sequence(seed, keys))


class DrawStream:
    """Uniform [0, 1) draws from a generator, fetched in blocks."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self.rng = rng
        self.block = max(1, block)
        self.values = []
        self.position = 0

    def next(self) -> float:
        if self.position == len(self.values):
            self.values = self.rng.random(self.block).tolist()
            self.position = 0
        value = self.values[self.position]
        self.position += 1
        return value

    def index(self, size: int) -> int:
        """A uniform index in range(size)."""
        return min(int(self.next() * size), size - 1)
