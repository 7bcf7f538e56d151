import math

import numpy as np
import pytest

from processing.errors import (
    DegenerateGraphError,
    DisconnectedGraphError,
    GraphParseError,
    InvalidCutError,
    InvalidParameterError,
    SizeCapError,
)
from processing.graph import (
    WeightedGraph,
    edge_boundary,
    edge_statistics,
    effective_resistance,
    exact_tree_statistics,
    expansion_bruteforce,
    format_graph,
    laplacian,
    log_spanning_tree_weight,
    parse_graph,
    spanning_tree_weight,
    subset_masks,
    vertex_boundary,
)
from utils import topologies


def test_parse_single_edge():
    g = parse_graph("0 1 1.0\n")
    assert g.vertex_count == 2
    assert g.edges == ((0, 1),)
    assert g.total_weight == 1.0


def test_parse_skips_comments_and_orders_edges():
    g = parse_graph("# header\n2 1 2.5\n\n0 1 1  # trailing\n")
    assert g.vertex_count == 3
    assert g.edges == ((0, 1), (1, 2))
    assert g.weight(2, 1) == 2.5


@pytest.mark.parametrize("text, line", [
    ("0 1 1\n1 1 2\n", 2),
    ("0 1 1\n1 0 2\n", 2),
    ("0 1 -1\n", 1),
    ("0 1 0\n", 1),
    ("0 1\n", 1),
    ("0 x 1\n", 1),
])
def test_parse_rejects_bad_lines(text, line):
    with pytest.raises(GraphParseError) as info:
        parse_graph(text)
    assert info.value.line_number == line


def test_parse_rejects_empty_input():
    with pytest.raises(GraphParseError):
        parse_graph("# nothing here\n")


def test_format_then_parse_keeps_digest(weighted_triangle):
    assert parse_graph(format_graph(weighted_triangle)).digest == weighted_triangle.digest


def test_constructor_validates():
    with pytest.raises(InvalidParameterError):
        WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 0, 2.0)])
    with pytest.raises(InvalidParameterError):
        WeightedGraph(3, ((0, 5),), (1.0,))
    with pytest.raises(InvalidParameterError):
        WeightedGraph(2, ((0, 1),), (math.inf,))


def test_adjacency_is_symmetric(weighted_triangle):
    dense = weighted_triangle.adjacency.toarray()
    assert np.array_equal(dense, dense.T)
    assert dense[0, 2] == 3.0


def test_vertex_weights(weighted_triangle):
    assert weighted_triangle.vertex_weights.tolist() == [4.0, 3.0, 5.0]


def test_laplacian_quadratic_form(weighted_triangle):
    rng = np.random.default_rng(3)
    L = laplacian(weighted_triangle)
    for _ in range(5):
        x = rng.standard_normal(3)
        direct = sum(w * (x[u] - x[v]) ** 2 for (u, v), w in zip(weighted_triangle.edges, weighted_triangle.weights))
        assert L.quadratic_form(x) == pytest.approx(direct, abs=1e-9)
    assert np.allclose(L.matrix.sum(axis=1), 0.0)


def test_spanning_tree_weight_known_values(k3, k4, weighted_triangle):
    assert spanning_tree_weight(k3) == pytest.approx(3.0)
    assert spanning_tree_weight(k4) == pytest.approx(16.0)
    assert spanning_tree_weight(weighted_triangle) == pytest.approx(11.0)


def test_tree_weight_past_the_float_range():
    g = topologies.complete(200)
    # Cayley: 200^198 trees, far beyond a float
    assert log_spanning_tree_weight(g) == pytest.approx(198 * math.log(200), rel=1e-9)
    assert spanning_tree_weight(g) == math.inf


def test_excluding_a_bridge_gives_zero(path5):
    assert spanning_tree_weight(path5, excluded_edge=(1, 2)) == 0.0


def test_excluding_an_edge_of_a_cycle(c4):
    assert spanning_tree_weight(c4, excluded_edge=(0, 1)) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_kirchhoff_matches_enumeration(seed):
    g = topologies.complete(6, seed=seed, max_capacity=5)
    exact = exact_tree_statistics(g)
    assert exact.tree_count == 6 ** 4
    assert spanning_tree_weight(g) == pytest.approx(exact.kappa, rel=1e-9)


def test_edge_statistics_weighted_triangle(weighted_triangle):
    stats = edge_statistics(weighted_triangle)
    assert stats.probability(2, 0) == pytest.approx(9 / 11)
    assert stats.probability(0, 1) == pytest.approx(5 / 11)
    assert stats.probability(1, 2) == pytest.approx(8 / 11)


def test_edge_statistics_methods_agree_with_enumeration():
    g = topologies.ring_with_chords(7, seed=4, max_capacity=3)
    lemma = edge_statistics(g, "lemma")
    determinant = edge_statistics(g, "determinant")
    exact = exact_tree_statistics(g)
    assert np.allclose(lemma.inclusion_probability, determinant.inclusion_probability, rtol=1e-9)
    assert np.allclose(lemma.inclusion_probability, exact.marginals, rtol=1e-9)
    assert math.fsum(lemma.inclusion_probability) == pytest.approx(g.vertex_count - 1, abs=1e-6)


def test_exact_statistics_on_a_square(c4):
    exact = exact_tree_statistics(c4)
    index = c4.edge_index
    assert exact.tree_count == 4
    assert np.allclose(exact.marginals, 0.75)
    assert exact.joint[index[(0, 1)], index[(1, 2)]] == pytest.approx(0.5)
    assert exact.joint[index[(0, 1)], index[(2, 3)]] == pytest.approx(0.5)
    off_diagonal = ~np.eye(c4.edge_count, dtype=bool)
    products = np.outer(exact.marginals, exact.marginals)
    assert np.all(exact.joint[off_diagonal] <= products[off_diagonal] + 1e-12)
    assert edge_statistics(c4).probability(0, 1) == pytest.approx(0.75, rel=1e-9)


def test_edge_statistics_rejects_unknown_method(k4):
    with pytest.raises(InvalidParameterError):
        edge_statistics(k4, "guess")


def test_effective_resistance_on_a_path():
    g = WeightedGraph.from_edges(3, [(0, 1, 2.0), (1, 2, 4.0)])
    assert effective_resistance(g, 0, 2) == pytest.approx(0.5 + 0.25)
    stats = edge_statistics(g)
    assert stats.effective_resistance == pytest.approx((0.5, 0.25))


def test_tree_operations_reject_bad_graphs():
    with pytest.raises(DisconnectedGraphError, match="graph not connected"):
        spanning_tree_weight(WeightedGraph.from_edges(4, [(0, 1, 1.0), (2, 3, 1.0)]))
    with pytest.raises(DegenerateGraphError):
        spanning_tree_weight(WeightedGraph(1, (), ()))


def test_boundaries(c8):
    cut = edge_boundary(c8, {0, 1, 2})
    assert cut.boundary_edges == ((0, 7), (2, 3))
    assert cut.boundary_weight == 2.0
    assert vertex_boundary(c8, {0, 1, 2}) == frozenset({3, 7})


def test_boundary_rejects_improper_sides(c4):
    with pytest.raises(InvalidCutError):
        edge_boundary(c4, set())
    with pytest.raises(InvalidCutError):
        edge_boundary(c4, {0, 1, 2, 3})
    with pytest.raises(InvalidCutError):
        vertex_boundary(c4, {9})


def test_subset_masks():
    assert len(subset_masks(5)) == 2 ** 5 - 2
    assert len(subset_masks(5, skip_complements=True)) == 2 ** 4 - 1
    assert len(subset_masks(6, max_size=3)) == 6 + 15 + 20


def test_expansion_values(k4, c4, c8):
    assert expansion_bruteforce(k4, "edge").ratio == pytest.approx(2.0)
    assert expansion_bruteforce(c4, "edge").ratio == pytest.approx(1.0)
    result = expansion_bruteforce(c8, "vertex")
    assert result.ratio == pytest.approx(0.5)
    assert len(result.witness) == 4


def test_weighted_edge_expansion(weighted_triangle):
    # S={b}: (1+2)/1 is the smallest single-vertex boundary weight
    assert expansion_bruteforce(weighted_triangle, "edge", weighted=True).ratio == pytest.approx(3.0)


def test_expansion_respects_cap():
    with pytest.raises(SizeCapError):
        expansion_bruteforce(topologies.cycle(21), "edge")
    with pytest.raises(InvalidParameterError):
        expansion_bruteforce(topologies.cycle(5), "spectral")
