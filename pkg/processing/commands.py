"""
The operations behind each CLI subcommand. Every cmd_* takes a RunConfig and
returns a CommandResult; main.py only parses flags and writes what comes back.
"""
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple

from processing.analysis import (
    analyze_overlay,
    confinement_vs_t_series,
    monitored_vs_c_series,
    scenario_report,
)
from processing.distributed_build import VerificationConfig, orchestrate_build
from processing.errors import InvalidParameterError
from processing.graph import WeightedGraph, format_graph, parse_graph
from processing.routing import (
    MonitorSet,
    RevisitPolicy,
    RoutingMode,
    parse_flows,
    parse_monitors,
    plan_route,
    random_flows,
    simulate_traffic,
)
from processing.spanning_tree import (
    OverlayGraph,
    WeightMode,
    build_overlay,
    format_overlay,
    parse_overlay,
)
from processing.verifier import (
    cut_approximation_check,
    mixing_cover_test,
    negative_correlation_test,
    spectral_approximation_check,
)
from utils.animations.spinner import Spinner
from utils.config import Settings
from utils.file_io import dump_json_lines, open_file, save_csv, save_file
from utils.seeding import STREAM_VERIFY, derive_seed
from utils.topologies import generate

logger = logging.getLogger(__name__)

CHECKS = ('mixing', 'spectral', 'cuts', 'correlation')


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on; serialised into its output so the run can be repeated."""
    subcommand: str
    seed: int = 0
    graph: Optional[str] = None
    overlay: Optional[str] = None
    output_format: str = "json"
    timestamp: bool = True
    quiet: bool = False
    settings: Settings = field(default_factory=Settings)
    options: Dict[str, Any] = field(default_factory=dict)

    def option(self, name: str, default=None):
        value = self.options.get(name)
        return default if value is None else value

    def to_dict(self) -> dict:
        return {
            'subcommand': self.subcommand,
            'seed': self.seed,
            'graph': self.graph,
            'overlay': self.overlay,
            'format': self.output_format,
            'settings': self.settings.to_dict(),
            'options': {k: (str(v) if isinstance(v, os.PathLike) else v) for k, v in sorted(self.options.items())},
        }


@dataclass
class CommandResult:
    payload: Dict[str, Any]
    rows: List[dict] = field(default_factory=list)
    exit_code: int = 0
    text: Optional[str] = None


def _finish(config: RunConfig, payload: dict, rows: Optional[List[dict]] = None, exit_code: int = 0,
            text: Optional[str] = None) -> CommandResult:
    payload = dict(payload)
    payload['config'] = config.to_dict()
    if config.timestamp:
        payload['generated_at'] = datetime.now(timezone.utc).isoformat()
    return CommandResult(payload, rows or [], exit_code, text)


def load_base_graph(config: RunConfig) -> WeightedGraph:
    if not config.graph:
        raise InvalidParameterError("--graph is required for this command")
    return parse_graph(open_file(config.graph))


def load_overlay(config: RunConfig, g: WeightedGraph) -> OverlayGraph:
    """The overlay file if one was given, else the base graph used as its own overlay."""
    if config.overlay:
        return parse_overlay(open_file(config.overlay), g)
    return OverlayGraph.from_graph(g)


def resolve_monitors(config: RunConfig, n: int) -> MonitorSet:
    random_count = config.option('random_monitors')
    non_monitors = config.option('non_monitors')
    if random_count is not None and non_monitors is not None:
        raise InvalidParameterError("give either --random-monitors or --non-monitors, not both")
    if random_count is not None:
        return MonitorSet.random(n, random_count, config.seed)
    if non_monitors is not None:
        if not 0 <= non_monitors <= n:
            raise InvalidParameterError(f"--non-monitors must be in [0, {n}], got {non_monitors}")
        return MonitorSet.random(n, n - non_monitors, config.seed)
    source = str(config.option('monitors', 'none'))
    if source == 'all':
        return MonitorSet.everyone(n)
    if source == 'none':
        return MonitorSet.nobody(n)
    return parse_monitors(open_file(source), n)


def resolve_flows(config: RunConfig, n: int) -> List[Tuple[int, int]]:
    if config.option('flows'):
        return parse_flows(open_file(config.option('flows')), n)
    return random_flows(n, config.option('random_flows', 16), config.seed)


def _routing_options(config: RunConfig) -> dict:
    return {
        'mode': RoutingMode(config.option('mode', RoutingMode.INCREMENTAL.value)),
        'revisit_policy': RevisitPolicy(config.option('revisit', RevisitPolicy.NON_REVISITING.value)),
        'segment_length': config.option('segment_length'),
        'extension_probability': config.option('extension_probability', config.settings.extension_probability),
    }


def cmd_generate(config: RunConfig) -> CommandResult:
    g = generate(config.option('topology', 'complete'), config.option('vertices', 8), config.seed,
                 config.option('max_capacity', 1), config.option('degree'))
    payload = {'vertex_count': g.vertex_count, 'edge_count': g.edge_count, 'digest': g.digest}
    rows = [{'u': u, 'v': v, 'w': w} for (u, v), w in zip(g.edges, g.weights)]
    return _finish(config, payload, rows, text=format_graph(g))


def cmd_build(config: RunConfig) -> CommandResult:
    """
    Union of k trees, or with --distributed the doubling construction that stops
    once the mixing-rate test passes. Writes the overlay file and returns the log.
    """
    g = load_base_graph(config)
    mode = WeightMode(config.option('weight_mode', WeightMode.PLAIN.value))
    exit_code = 0
    payload: Dict[str, Any] = {'base': {'vertex_count': g.vertex_count, 'edge_count': g.edge_count, 'digest': g.digest}}
    rows: List[dict] = []
    if config.option('distributed', False):
        verification = VerificationConfig(
            method=config.option('verify_method', 'mixing'),
            cap_factor=config.option('cap_factor', config.settings.cover_cap_factor),
            neighbor_mode=config.option('neighbor_mode', 'current'),
        )
        with Spinner("Building overlay...", enabled=not config.quiet) as spinner:
            orchestration = orchestrate_build(g, verification, config.option('workers', 1), config.seed, mode,
                                              config.option('round_cap'), progress=spinner.update_message)
        overlay = orchestration.overlay
        payload['verification'] = verification.to_dict()
        payload['orchestration'] = orchestration.to_dict()
        rows = [r.to_dict() for r in orchestration.rounds]
        if orchestration.failed:
            exit_code = 1
    else:
        k = config.option('k')
        if k is None:
            raise InvalidParameterError("--k is required unless --distributed is given")
        with Spinner(f"Sampling {k} spanning trees...", enabled=not config.quiet):
            overlay = build_overlay(g, k, config.seed, mode)
        rows = [{'u': e.u, 'v': e.v, 'weight': e.weight, 'multiplicity': e.multiplicity} for e in overlay.edges]
    payload['overlay'] = overlay.to_dict()
    overlay_out = config.option('overlay_out')
    if overlay_out:
        save_file(overlay_out, format_overlay(overlay))
        payload['overlay_file'] = str(overlay_out)
    return _finish(config, payload, rows, exit_code)


def cmd_verify(config: RunConfig) -> CommandResult:
    g = load_base_graph(config)
    o = load_overlay(config, g)
    checks = [name for name in CHECKS if config.option(name, False)] or ['mixing']
    results = {}
    with Spinner("Verifying overlay...", enabled=not config.quiet):
        for name in checks:
            if name == 'mixing':
                report = mixing_cover_test(o, config.option('cap_factor', config.settings.cover_cap_factor),
                                           derive_seed(config.seed, STREAM_VERIFY, 0),
                                           config.option('neighbor_mode', 'current'), config.option('weighted', False))
                results[name] = dict(report.to_dict(), passed=report.success)
            elif name == 'spectral':
                report = spectral_approximation_check(g, o, config.option('epsilon', 0.5),
                                                      config.option('probes', config.settings.spectral_probes),
                                                      config.seed)
                results[name] = report.to_dict()
            elif name == 'cuts':
                report = cut_approximation_check(g, o, config.option('alpha', 1.0), config.settings.bruteforce_cap)
                results[name] = report.to_dict()
            else:
                report = negative_correlation_test(g, config.option('samples', 2000), config.seed)
                results[name] = report.to_dict()
    passed = all(result['passed'] for result in results.values())
    rows = [{'check': name, 'passed': result['passed']} for name, result in results.items()]
    payload = {'overlay': o.to_dict(), 'checks': results, 'passed': passed}
    return _finish(config, payload, rows, 0 if passed else 1)


def cmd_route(config: RunConfig) -> CommandResult:
    g = load_base_graph(config)
    o = load_overlay(config, g)
    options = _routing_options(config)
    plan = plan_route(o, config.option('source', 0), config.option('target', o.vertex_count - 1),
                      config.option('r', 2), options['mode'], options['revisit_policy'], config.seed,
                      options['segment_length'], options['extension_probability'])
    rows = [{'hop': i, 'vertex': v, 'walk': i < len(plan.walk_path)} for i, v in enumerate(plan.path)]
    return _finish(config, {'plan': plan.to_dict(), 'digest': plan.digest}, rows)


def cmd_simulate(config: RunConfig) -> CommandResult:
    g = load_base_graph(config)
    o = load_overlay(config, g)
    monitors = resolve_monitors(config, o.vertex_count)
    flows = resolve_flows(config, o.vertex_count)
    options = _routing_options(config)
    with Spinner("Simulating traffic...", enabled=not config.quiet):
        trace = simulate_traffic(o, flows, config.option('r', 2), options['mode'], monitors,
                                 config.option('trials', 1000), config.seed, options['revisit_policy'],
                                 options['segment_length'], options['extension_probability'])
    records = [record.to_dict() for record in trace.records]
    trace_out = config.option('trace')
    if trace_out:
        save_file(trace_out, dump_json_lines(records))
    return _finish(config, {'simulation': trace.summary(), 'flow_count': len(flows)}, records)


def cmd_analyze(config: RunConfig) -> CommandResult:
    g = load_base_graph(config)
    o = load_overlay(config, g)
    monitors = resolve_monitors(config, o.vertex_count)
    flows = resolve_flows(config, o.vertex_count)
    options = _routing_options(config)
    with Spinner("Analyzing overlay...", enabled=not config.quiet):
        report = analyze_overlay(o, monitors, flows, config.option('r', 2), config.option('trials', 10_000),
                                 config.seed, options['mode'], options['revisit_policy'], options['segment_length'],
                                 options['extension_probability'], config.option('kernel', 'uniform'),
                                 config.option('rbc_pairs', 8), config.option('target', 0.5),
                                 config.option('mix_count'))
    payload = report.to_dict()
    rows = report.rbc_rows()
    if config.option('rbc_csv'):
        save_csv(config.option('rbc_csv'), rows, ['vertex', 'delta', 'delta_mean'])
    plot_dir = config.option('plot_data')
    if plot_dir:
        n = o.vertex_count
        save_csv(os.path.join(plot_dir, 'monitored_vs_c.csv'),
                 monitored_vs_c_series(n, report.r, report.segment_length), ['C', 'monitored_probability'])
        save_csv(os.path.join(plot_dir, 'confinement_vs_t.csv'),
                 confinement_vs_t_series(monitors.beta, report.hops), ['t', 'confinement_bound'])
    return _finish(config, payload, rows)


def cmd_report(config: RunConfig) -> CommandResult:
    report = scenario_report(config.option('vertices', 1021), config.option('non_monitors', 700),
                             config.option('r', 2), config.option('degree', 3.0), config.option('target', 0.5),
                             config.option('attackers'), config.option('mix_count'))
    rows = [{'quantity': key, 'value': value} for key, value in report.items() if not isinstance(value, dict)]
    return _finish(config, report, rows)


COMMANDS = {
    'generate': cmd_generate,
    'build': cmd_build,
    'verify': cmd_verify,
    'route': cmd_route,
    'simulate': cmd_simulate,
    'analyze': cmd_analyze,
    'report': cmd_report,
}
