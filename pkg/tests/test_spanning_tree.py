from collections import Counter

import pytest

from processing.errors import DisconnectedGraphError, GraphParseError, InvalidParameterError, WalkLimitError
from processing.graph import WeightedGraph, edge_statistics
from processing.spanning_tree import (
    OverlayGraph,
    WeightMode,
    build_overlay,
    format_overlay,
    generate_trees,
    overlay_from_trees,
    parse_overlay,
    random_spanning_tree,
)
from utils import topologies


def _frequencies(g, samples, seed=0):
    counts = Counter(e for tree in generate_trees(g, seed, range(samples)) for e in tree.edges)
    return {e: counts[e] / samples for e in g.edges}


def test_tree_is_spanning(k6):
    tree = random_spanning_tree(k6, seed=11)
    assert len(tree.edges) == 5
    touched = {v for e in tree.edges for v in e}
    assert touched == set(range(6))
    assert tree.walk_length >= 5


def test_same_seed_same_tree(k6):
    assert random_spanning_tree(k6, 42) == random_spanning_tree(k6, 42)


def test_a_tree_is_its_own_spanning_tree(path5):
    assert random_spanning_tree(path5, 3).edges == path5.edges


def test_single_edge_graph():
    g = WeightedGraph.from_edges(2, [(0, 1, 1.0)])
    assert random_spanning_tree(g, 0).edges == ((0, 1),)


def test_walk_limit():
    with pytest.raises(WalkLimitError):
        random_spanning_tree(topologies.path(30), seed=0, max_steps=5)


def test_disconnected_graph_rejected():
    g = WeightedGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)])
    with pytest.raises(DisconnectedGraphError):
        random_spanning_tree(g, 0)


def test_unit_triangle_frequencies(k3):
    for frequency in _frequencies(k3, 10_000).values():
        assert frequency == pytest.approx(2 / 3, abs=0.02)


def test_weighted_triangle_frequencies(weighted_triangle):
    frequencies = _frequencies(weighted_triangle, 10_000)
    assert frequencies[(0, 2)] == pytest.approx(9 / 11, abs=0.02)


def test_frequencies_match_edge_statistics():
    g = topologies.ring_with_chords(8, seed=2, max_capacity=4)
    frequencies = _frequencies(g, 10_000, seed=5)
    stats = edge_statistics(g)
    for e, p in zip(stats.edges, stats.inclusion_probability):
        assert frequencies[e] == pytest.approx(p, abs=0.02)


def test_overlay_is_a_union_with_multiplicities(k6):
    trees = generate_trees(k6, 9, range(4))
    overlay = overlay_from_trees(k6, trees)
    assert overlay.k == 4
    assert overlay.total_multiplicity == 4 * 5
    assert overlay.distinct_edge_count <= 20
    assert all(k6.has_edge(e.u, e.v) for e in overlay.edges)
    assert overlay.graph.is_connected


def test_overlay_ignores_tree_order(k6):
    trees = generate_trees(k6, 9, range(5))
    assert overlay_from_trees(k6, trees).edges == overlay_from_trees(k6, trees[::-1]).edges


def test_build_overlay_matches_explicit_trees(k6):
    assert build_overlay(k6, 3, seed=9).edges == overlay_from_trees(k6, generate_trees(k6, 9, range(3))).edges


def test_plain_weights_keep_capacities(weighted_triangle):
    overlay = build_overlay(weighted_triangle, 3, seed=1)
    for e in overlay.edges:
        assert e.weight == weighted_triangle.weight(e.u, e.v)


def test_resistance_scaled_weights(k4):
    overlay = build_overlay(k4, 6, seed=2, weight_mode=WeightMode.RESISTANCE_SCALED)
    # every edge of K4 is in a uniform tree with probability 1/2
    for e in overlay.edges:
        assert e.weight == pytest.approx(e.multiplicity * 1.0 / (6 * 0.5))


def test_build_overlay_rejects_zero_trees(k4):
    with pytest.raises(InvalidParameterError):
        build_overlay(k4, 0, seed=0)


def test_from_graph_uses_every_edge(weighted_triangle):
    overlay = OverlayGraph.from_graph(weighted_triangle)
    assert overlay.k == 0
    assert overlay.graph.digest == weighted_triangle.digest
    assert overlay.average_degree == pytest.approx(2.0)


def test_overlay_file_round_trip(k6):
    overlay = build_overlay(k6, 3, seed=4, weight_mode=WeightMode.RESISTANCE_SCALED)
    restored = parse_overlay(format_overlay(overlay), k6)
    assert restored == overlay


def test_overlay_file_must_match_base(k6, k4):
    text = format_overlay(build_overlay(k4, 2, seed=0))
    with pytest.raises(GraphParseError):
        parse_overlay(text, k6)
    with pytest.raises(GraphParseError):
        parse_overlay("0 1 1.0 1\n", k4)
