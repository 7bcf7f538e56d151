"""
Puts routing simulation and the analytic metrics side by side for one overlay and
monitor placement, plus the formula-only scenario report.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from processing.errors import DomainError
from processing.metrics import (
    AnonymityReport,
    RbcAggregate,
    RbcTable,
    RoutingKernel,
    SystemObservation,
    anonymity_degree,
    attack_cost_report,
    chernoff_tail_bound,
    confinement_bound,
    cover_traffic_cost,
    hidden_state_probability,
    max_unmonitored_bound,
    monitor_count_estimate,
    predecessor_attack_rounds,
    prob_route_monitored,
    prob_route_monitored_independent,
    rbc_aggregate,
    rbc_table,
)
from processing.routing import (
    DEFAULT_EXTENSION_PROBABILITY,
    MonitorSet,
    RevisitPolicy,
    RoutingMode,
    TrafficTrace,
    default_segment_length,
    log_segment_length,
    simulate_traffic,
)
from processing.spanning_tree import OverlayGraph

logger = logging.getLogger(__name__)

DEFAULT_TARGET = 0.5
DEFAULT_RBC_PAIRS = 8

MODEL_WITHOUT_REPLACEMENT = "without-replacement"
MODEL_INDEPENDENT = "independent"
BACKTRACK_NOTE = ("free walks backtrack and revisit vertices, so a route exposes fewer distinct vertices than the "
                  "independent model assumes; on sparse overlays the simulated fraction can fall below it")


def _guarded(name: str, compute):
    """Evaluate a formula, turning an out-of-domain input into None."""
    try:
        return compute()
    except DomainError as oops:
        logger.warning("%s not reported: %s", name, oops)
        return None


def auditor_distribution(trace: TrafficTrace) -> Optional[AnonymityReport]:
    """
    Which monitor sees each monitored message first, as a distribution over all
    monitors. None when there are fewer than two monitors or nothing was seen.
    """
    monitors = sorted(trace.monitors.monitored)
    counts = trace.first_monitor_counts()
    seen = sum(counts.values())
    if len(monitors) < 2 or not seen:
        return None
    return anonymity_degree(counts.get(v, 0) / seen for v in monitors)


@dataclass(frozen=True)
class MetricsReport:
    overlay: OverlayGraph
    monitors: MonitorSet
    r: int
    segment_length: int
    target: float
    trace: TrafficTrace
    rbc: RbcTable
    rbc_mean: RbcAggregate
    auditors: Optional[AnonymityReport]
    mix_count: int

    @property
    def vertex_count(self) -> int:
        return self.overlay.vertex_count

    @property
    def hops(self) -> int:
        return (self.r + 1) * self.segment_length

    @property
    def monitored_prob_analytic(self) -> Optional[float]:
        return _guarded("monitored probability", lambda: prob_route_monitored(
            self.vertex_count, self.monitors.non_monitor_count, self.r, self.segment_length))

    @property
    def comparison_model(self) -> str:
        """The analytic model matching how the simulated routes treat revisits."""
        if self.trace.revisit_policy is RevisitPolicy.NON_REVISITING:
            return MODEL_WITHOUT_REPLACEMENT
        return MODEL_INDEPENDENT

    @property
    def monitored_prob_expected(self) -> Optional[float]:
        if self.comparison_model == MODEL_WITHOUT_REPLACEMENT:
            return self.monitored_prob_analytic
        return prob_route_monitored_independent(self.vertex_count, self.monitors.non_monitor_count, self.hops)

    def to_dict(self) -> dict:
        n = self.vertex_count
        c = self.monitors.non_monitor_count
        beta = self.monitors.beta
        analytic = self.monitored_prob_analytic
        independent = prob_route_monitored_independent(n, c, self.hops)
        mean = self.hops * (n - c) / n
        chernoff = _guarded("chernoff bound", lambda: chernoff_tail_bound(n, c, self.hops, mean)) if mean > 0 else None
        unmonitored = max_unmonitored_bound(n, self.segment_length, self.target)
        hidden = _guarded("hidden-state probability", lambda: hidden_state_probability(
            SystemObservation(self.trace.trials, n, self.mix_count)))
        attack = attack_cost_report(self.overlay, c, self.r) if 1 <= c < n else None
        mc = self.trace.monitored_fraction
        expected = self.monitored_prob_expected
        monitor_count = self.monitors.monitor_count
        return {
            'vertex_count': n,
            'segment_length': self.segment_length,
            'r': self.r,
            'hops': self.hops,
            'monitors': self.monitors.to_dict(),
            'monitored_prob_analytic': analytic,
            'monitored_prob_independent': independent,
            'monte_carlo': self.trace.summary(),
            'monte_carlo_model': self.comparison_model,
            'monte_carlo_expected': expected,
            'monte_carlo_gap': None if expected is None else abs(mc - expected),
            'notes': [BACKTRACK_NOTE] if self.comparison_model == MODEL_INDEPENDENT else [],
            'confinement_bound_segment': confinement_bound(beta, self.segment_length),
            'confinement_bound_route': confinement_bound(beta, self.hops),
            'max_unmonitored': unmonitored.to_dict(),
            'chernoff': None if chernoff is None else chernoff.to_dict(),
            'monitor_budget': monitor_count_estimate(n, self.segment_length),
            'hidden_state': None if hidden is None else hidden.to_dict(),
            'rbc': self.rbc.to_dict(),
            'rbc_mean': self.rbc_mean.to_dict(),
            'auditor_anonymity': None if self.auditors is None else self.auditors.to_dict(),
            'monitor_probability': {
                'one_over_monitors': 1.0 / monitor_count if monitor_count else None,
                'one_over_vertices': 1.0 / n,
            },
            'attack_cost': None if attack is None else attack.to_dict(),
        }

    def rbc_rows(self) -> List[dict]:
        mean = self.rbc_mean.delta
        return [{'vertex': v, 'delta': float(d), 'delta_mean': float(mean[v])} for v, d in enumerate(self.rbc.delta)]


def analyze_overlay(o: OverlayGraph, monitors: MonitorSet, flows: Sequence[Tuple[int, int]], r: int = 2,
                    trials: int = 10_000, seed: int = 0, mode: RoutingMode = RoutingMode.INCREMENTAL,
                    revisit_policy: RevisitPolicy = RevisitPolicy.NON_REVISITING,
                    segment_length: Optional[int] = None,
                    extension_probability: float = DEFAULT_EXTENSION_PROBABILITY,
                    kernel: str = "uniform", rbc_pairs: int = DEFAULT_RBC_PAIRS,
                    target: float = DEFAULT_TARGET, mix_count: Optional[int] = None) -> MetricsReport:
    """
    Simulate traffic against the monitor set and compute every analytic quantity
    for the same configuration.

    Parameters:
    o (OverlayGraph): the overlay
    monitors (MonitorSet): who watches
    flows (list of (s, t)): traffic pairs, cycled over the trials
    r (int): intermediates per route
    trials (int): simulated messages
    seed (int): master seed
    mode, revisit_policy: routing options
    segment_length (int or None): l, defaults to ⌊log_b n⌋ with b the average degree
    extension_probability (float): loose-mode extension chance
    kernel (str): routing kernel for the betweenness tables
    rbc_pairs (int): how many of the flows the mean betweenness averages over
    target (float): target confinement probability for the non-monitor bound
    mix_count (int or None): vertices eligible as intermediates, defaults to n

    Returns:
    MetricsReport: analytic values, Monte Carlo trace and betweenness tables
    """
    l = segment_length or default_segment_length(o)
    trace = simulate_traffic(o, flows, r, mode, monitors, trials, seed, revisit_policy, l, extension_probability)
    routing_kernel = RoutingKernel.named(o, kernel)
    s, t = flows[0]
    table = rbc_table(o, routing_kernel, s, t, r, l)
    mean = rbc_aggregate(o, routing_kernel, list(flows[:max(1, rbc_pairs)]), r, l)
    report = MetricsReport(o, monitors, r, l, target, trace, table, mean, auditor_distribution(trace),
                           mix_count or o.vertex_count)
    logger.info("analysis: %s model %s, simulated %.4f over %d trials", report.comparison_model,
                report.monitored_prob_expected, trace.monitored_fraction, trace.trials)
    return report


def monitored_vs_c_series(N: int, r: int, l: int) -> List[dict]:
    """Analytic monitored probability for every non-monitor count C = 0..N."""
    if (r + 1) * l >= N:
        return []
    return [{'C': c, 'monitored_probability': prob_route_monitored(N, c, r, l)} for c in range(N + 1)]


def confinement_vs_t_series(beta: float, t_max: int) -> List[dict]:
    return [{'t': t, 'confinement_bound': confinement_bound(beta, t)} for t in range(1, t_max + 1)]


def scenario_report(N: int = 1021, C: int = 700, r: int = 2, degree: float = 3.0, target: float = DEFAULT_TARGET,
                    attackers: Optional[int] = None, mix_count: Optional[int] = None) -> dict:
    """
    Formula-only report for a network of N vertices with average overlay degree
    `degree`; the defaults are the 1021-node, 700 non-monitor example.
    """
    l = log_segment_length(N, degree)
    hops = (r + 1) * l
    beta = C / N
    mean = hops * (N - C) / N
    attackers = attackers or C
    report = {
        'vertex_count': N,
        'non_monitor_count': C,
        'r': r,
        'degree': degree,
        'segment_length': l,
        'hops': hops,
        'beta': beta,
        'monitored_prob_analytic': _guarded("monitored probability", lambda: prob_route_monitored(N, C, r, l)),
        'monitored_prob_independent': prob_route_monitored_independent(N, C, hops),
        'confinement_bound_segment': confinement_bound(beta, l),
        'confinement_bound_route': confinement_bound(beta, hops),
        'max_unmonitored': max_unmonitored_bound(N, l, target).to_dict(),
        'chernoff': chernoff_tail_bound(N, C, hops, mean).to_dict() if mean > 0 else None,
        'monitor_budget': monitor_count_estimate(N, l),
        'path_probability': _guarded("path probability", lambda: SystemObservation(1, N, mix_count or N).path_probability),
        'cover_traffic': cover_traffic_cost(math.ceil(degree), N),
        'predecessor_rounds': predecessor_attack_rounds(N, attackers) if 1 <= attackers < N else None,
    }
    return report
