import pytest

from processing.errors import GraphParseError, InvalidParameterError, RouteError
from processing.graph import parse_graph
from processing.metrics import confinement_bound, prob_route_monitored
from processing.routing import (
    MonitorSet,
    RevisitPolicy,
    RoutePlanner,
    RoutingMode,
    default_segment_length,
    log_segment_length,
    parse_flows,
    parse_monitors,
    plan_route,
    random_flows,
    simulate_traffic,
    total_variation,
    walk_endpoint_distribution,
    wilson_interval,
)
from processing.spanning_tree import OverlayGraph, build_overlay
from utils import topologies


@pytest.fixture(scope="module")
def ring1021():
    return OverlayGraph.from_graph(topologies.ring_with_chords(1021, seed=0))


@pytest.fixture
def expander():
    return build_overlay(topologies.complete(12), 3, seed=2)


def test_log_segment_length():
    assert log_segment_length(1021, 3) == 6
    assert log_segment_length(1024, 2) == 10
    assert log_segment_length(2, 1.0) == 1
    assert log_segment_length(5, 10) == 1


def test_default_length_on_the_example_overlay(ring1021):
    assert 2.9 < ring1021.average_degree < 3.0
    assert default_segment_length(ring1021) == 6
    plan = plan_route(ring1021, 0, 500, r=2, revisit_policy=RevisitPolicy.NON_REVISITING, seed=3)
    assert plan.hop_count == 18
    assert len(plan.intermediates) == 2


def test_single_edge_overlay():
    overlay = OverlayGraph.from_graph(parse_graph("0 1 1.0\n"))
    plan = plan_route(overlay, 0, 1, r=1, seed=0)
    assert plan.segment_length == 1
    assert plan.segments == ((0, 1), (1, 0))
    assert plan.intermediates == (1,)
    assert plan.splice == (0, 1)
    assert plan.path == (0, 1, 0, 1)


def test_same_seed_same_route(expander):
    first = plan_route(expander, 0, 7, r=3, seed=99)
    second = plan_route(expander, 0, 7, r=3, seed=99)
    assert first == second
    assert first.digest == second.digest


def test_route_follows_overlay_edges(expander):
    plan = plan_route(expander, 2, 9, r=2, seed=5, segment_length=3)
    assert plan.path[0] == 2 and plan.path[-1] == 9
    for u, v in zip(plan.path, plan.path[1:]):
        assert expander.graph.has_edge(u, v)
    for segment, intermediate in zip(plan.segments, plan.intermediates):
        assert segment[-1] == intermediate
        assert len(segment) == 4


def test_non_revisiting_walks_do_not_repeat(ring1021):
    for seed in range(20):
        plan = plan_route(ring1021, 10, 20, r=2, revisit_policy=RevisitPolicy.NON_REVISITING, seed=seed)
        assert len(set(plan.walk_path)) == len(plan.walk_path)


def test_loose_mode_extends_every_segment(expander):
    plan = plan_route(expander, 0, 5, r=2, mode=RoutingMode.LOOSE, seed=1, segment_length=2,
                      extension_probability=1.0)
    assert plan.extensions == 2
    assert len(plan.segments) == 5
    assert len(plan.intermediates) == 4


def test_loose_mode_without_extensions_is_incremental(expander):
    loose = plan_route(expander, 0, 5, r=2, mode=RoutingMode.LOOSE, seed=1, segment_length=2,
                       extension_probability=0.0)
    assert loose.extensions == 0
    assert len(loose.segments) == 3


def test_trapped_route_gives_up():
    overlay = OverlayGraph.from_graph(topologies.path(4))
    with pytest.raises(RouteError):
        RoutePlanner(overlay, segment_length=3, max_attempts=4).plan(0, 3, 1, revisit_policy=RevisitPolicy.NON_REVISITING)


def test_planner_rejects_bad_arguments(expander):
    with pytest.raises(InvalidParameterError):
        plan_route(expander, 0, 12, r=1)
    with pytest.raises(InvalidParameterError):
        plan_route(expander, 0, 1, r=0)
    with pytest.raises(InvalidParameterError):
        RoutePlanner(expander, segment_length=0)


def test_splice_is_a_shortest_path(c8):
    planner = RoutePlanner(OverlayGraph.from_graph(c8))
    assert planner.splice_path(0, 3) == (0, 1, 2, 3)
    assert len(planner.splice_path(1, 6)) == 4
    assert planner.splice_path(4, 4) == (4,)


def test_everyone_monitoring_catches_every_route():
    overlay = OverlayGraph.from_graph(topologies.complete(12))
    trace = simulate_traffic(overlay, [(0, 5), (3, 8)], r=2, mode=RoutingMode.INCREMENTAL,
                             monitors=MonitorSet.everyone(12), trials=200, seed=1,
                             revisit_policy=RevisitPolicy.NON_REVISITING, segment_length=2)
    assert trace.monitored_fraction == 1.0
    assert all(record.first_monitor_hop >= 1 for record in trace.records)


def test_nobody_monitoring_catches_nothing(expander):
    trace = simulate_traffic(expander, [(0, 5)], r=2, mode=RoutingMode.INCREMENTAL,
                             monitors=MonitorSet.nobody(12), trials=100, seed=1)
    assert trace.monitored_fraction == 0.0
    assert trace.first_monitor_counts() == {}


def test_endpoints_are_not_monitors():
    overlay = OverlayGraph.from_graph(topologies.complete(2))
    monitors = MonitorSet(2, frozenset({0, 1}))
    trace = simulate_traffic(overlay, [(0, 1)], 1, RoutingMode.INCREMENTAL, monitors, trials=10, seed=0)
    assert trace.monitored_count == 0


def test_simulation_is_deterministic(expander):
    monitors = MonitorSet.random(12, 4, seed=2)
    flows = random_flows(12, 5, seed=2)
    first = simulate_traffic(expander, flows, 2, RoutingMode.LOOSE, monitors, 300, seed=8, keep_plans=True)
    second = simulate_traffic(expander, flows, 2, RoutingMode.LOOSE, monitors, 300, seed=8)
    assert first.records == second.records
    assert len(first.plans) == 300 and second.plans == ()
    assert first.summary()['trials'] == 300


def test_simulation_checks_monitor_size(expander):
    with pytest.raises(InvalidParameterError):
        simulate_traffic(expander, [(0, 1)], 1, RoutingMode.INCREMENTAL, MonitorSet.nobody(5), 10, 0)


@pytest.mark.slow
def test_simulation_matches_the_product_formula(ring1021):
    monitors = MonitorSet.random(1021, 1021 - 700, seed=4)
    flows = random_flows(1021, 64, seed=4)
    trace = simulate_traffic(ring1021, flows, 2, RoutingMode.INCREMENTAL, monitors, 20_000, seed=4,
                             revisit_policy=RevisitPolicy.NON_REVISITING)
    analytic = prob_route_monitored(1021, 700, 2, 6)
    assert trace.monitored_fraction >= 0.99
    assert abs(trace.monitored_fraction - analytic) <= 0.01


@pytest.mark.slow
def test_confinement_bound_holds_over_random_placements():
    overlay = OverlayGraph.from_graph(topologies.complete(32))
    flows = random_flows(32, 200, seed=9)
    bound = confinement_bound(24 / 32, 6)
    unmonitored = []
    for seed in range(100):
        monitors = MonitorSet.random(32, 8, seed=seed)
        trace = simulate_traffic(overlay, flows, 1, RoutingMode.INCREMENTAL, monitors, 500, seed=seed,
                                 revisit_policy=RevisitPolicy.NON_REVISITING, segment_length=3)
        unmonitored.append(1.0 - trace.monitored_fraction)
    # distinct hops draw monitors without replacement, which can only beat beta^t
    assert sum(unmonitored) / len(unmonitored) <= bound
    assert max(unmonitored) <= bound + 0.08


def test_monitor_sets():
    monitors = MonitorSet.random(10, 3, seed=0)
    assert monitors.monitor_count == 3
    assert monitors.non_monitor_count == 7
    assert monitors.beta == pytest.approx(0.7)
    assert MonitorSet.random(10, 3, seed=0) == monitors
    with pytest.raises(InvalidParameterError):
        MonitorSet(3, frozenset({3}))
    with pytest.raises(InvalidParameterError):
        MonitorSet.random(3, 4, seed=0)


def test_parse_monitors():
    assert parse_monitors("1 2\n# skip\n5\n", 6).monitored == frozenset({1, 2, 5})
    with pytest.raises(GraphParseError):
        parse_monitors("1 two\n", 6)
    with pytest.raises(InvalidParameterError):
        parse_monitors("7\n", 6)


def test_parse_flows():
    assert parse_flows("0 1\n\n2 3 # note\n", 4) == [(0, 1), (2, 3)]
    with pytest.raises(GraphParseError):
        parse_flows("0 9\n", 4)
    with pytest.raises(GraphParseError):
        parse_flows("0\n", 4)
    with pytest.raises(GraphParseError):
        parse_flows("", 4)


def test_random_flows_have_distinct_endpoints():
    flows = random_flows(5, 200, seed=1)
    assert len(flows) == 200
    assert all(s != t and 0 <= s < 5 and 0 <= t < 5 for s, t in flows)


def test_wilson_interval():
    low, high = wilson_interval(0, 10)
    assert low == pytest.approx(0.0, abs=1e-12)
    assert 0.0 < high < 0.35
    low, high = wilson_interval(10, 10)
    assert high == pytest.approx(1.0, abs=1e-12)
    assert low > 0.65
    low, high = wilson_interval(500, 1000)
    assert low < 0.5 < high
    assert high - low == pytest.approx(2 * 1.959964 * (0.25 / 1000) ** 0.5, rel=0.01)
    with pytest.raises(InvalidParameterError):
        wilson_interval(0, 0)


def test_walks_on_an_expander_approach_uniform():
    overlay = OverlayGraph.from_graph(topologies.random_regular(64, 4, seed=1))
    distribution = walk_endpoint_distribution(overlay, start=0, steps=30, walks=20_000, seed=0)
    assert distribution.sum() == pytest.approx(1.0)
    assert total_variation(distribution, [1 / 64] * 64) < 0.1


def test_total_variation():
    assert total_variation([1, 0], [0, 1]) == 1.0
    assert total_variation([0.5, 0.5], [0.5, 0.5]) == 0.0
