import logging
import sys
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import typer

from processing.commands import COMMANDS, CommandResult, RunConfig
from processing.distributed_build import METHOD_MIXING, METHOD_PARALLEL
from processing.errors import DomainError, InvalidParameterError, OverlayError
from processing.routing import RevisitPolicy, RoutingMode
from processing.spanning_tree import WeightMode
from processing.verifier import NEIGHBOR_ACCUMULATED, NEIGHBOR_CURRENT
from utils.config import Settings
from utils.file_io import dump_csv, dump_json, save_file

app = typer.Typer(add_completion=False, help="Build, verify and analyse capacity-biased expander overlays.")


class Topology(str, Enum):
    COMPLETE = "complete"
    CYCLE = "cycle"
    PATH = "path"
    RANDOM_REGULAR = "random-regular"
    RING_CHORDS = "ring-chords"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


class VerifyMethod(str, Enum):
    MIXING = METHOD_MIXING
    PARALLEL = METHOD_PARALLEL


class NeighborMode(str, Enum):
    CURRENT = NEIGHBOR_CURRENT
    ACCUMULATED = NEIGHBOR_ACCUMULATED


@dataclass
class GlobalOptions:
    seed: int
    graph: Optional[Path]
    out: Optional[Path]
    output_format: OutputFormat
    timestamp: bool
    quiet: bool
    settings: Settings


@app.callback()
def main(
    ctx: typer.Context,
    seed: int = typer.Option(0, "--seed", min=0, help="Master seed; every random choice derives from it."),
    graph: Optional[Path] = typer.Option(None, "--graph", help="Base graph, one 'u v w' edge per line."),
    out: Optional[Path] = typer.Option(None, "--out", help="Write the report here instead of stdout."),
    output_format: OutputFormat = typer.Option(OutputFormat.JSON, "--format", help="json report or csv extract."),
    no_timestamp: bool = typer.Option(False, "--no-timestamp", help="Leave generated_at out of reports."),
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Overrides OVERLAY_LOG_LEVEL."),
    quiet: bool = typer.Option(False, "--quiet", help="No progress spinner."),
):
    try:
        settings = Settings.from_env()
    except OverlayError as oops:
        typer.echo(f"error: {oops}", err=True)
        raise typer.Exit(code=3)
    level = (log_level or settings.log_level).upper()
    if not isinstance(logging.getLevelName(level), int):
        raise typer.BadParameter(f"unknown log level {level!r}", param_hint="--log-level")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    ctx.obj = GlobalOptions(seed, graph, out, output_format, not no_timestamp, quiet, settings)


def _emit(result: CommandResult, state: GlobalOptions) -> None:
    if state.output_format is OutputFormat.CSV:
        content = dump_csv(result.rows)
    elif result.text is not None:
        content = result.text
    else:
        content = dump_json(result.payload)
    if state.out is not None:
        save_file(state.out, content)
    else:
        typer.echo(content, nl=False)


def _run(ctx: typer.Context, subcommand: str, overlay: Optional[Path] = None, **options) -> None:
    state: GlobalOptions = ctx.obj
    options = {key: (value.value if isinstance(value, Enum) else value) for key, value in options.items()}
    config = RunConfig(
        subcommand=subcommand,
        seed=state.seed,
        graph=str(state.graph) if state.graph else None,
        overlay=str(overlay) if overlay else None,
        output_format=state.output_format.value,
        timestamp=state.timestamp,
        quiet=state.quiet,
        settings=state.settings,
        options=options,
    )
    try:
        result = COMMANDS[subcommand](config)
        _emit(result, state)
    except (InvalidParameterError, DomainError) as oops:
        typer.echo(f"error: {oops}", err=True)
        raise typer.Exit(code=2)
    except (OverlayError, OSError) as oops:
        typer.echo(f"error: {oops}", err=True)
        raise typer.Exit(code=3)
    if result.exit_code:
        raise typer.Exit(code=result.exit_code)


@app.command()
def generate(
    ctx: typer.Context,
    topology: Topology = typer.Option(Topology.COMPLETE, "--topology"),
    vertices: int = typer.Option(8, "--vertices", "-n", min=2),
    degree: Optional[int] = typer.Option(None, "--degree", help="Degree for random-regular graphs."),
    max_capacity: int = typer.Option(1, "--max-capacity", min=1, help="Capacities drawn from 1..max."),
):
    """Write a base graph in the edge-list format."""
    _run(ctx, 'generate', topology=topology, vertices=vertices, degree=degree, max_capacity=max_capacity)


@app.command()
def build(
    ctx: typer.Context,
    k: Optional[int] = typer.Option(None, "--k", min=1, help="Number of spanning trees."),
    distributed: bool = typer.Option(False, "--distributed", help="Double k until the mixing test passes."),
    workers: int = typer.Option(1, "--workers", min=1),
    weight_mode: WeightMode = typer.Option(WeightMode.PLAIN, "--mode"),
    verify_method: VerifyMethod = typer.Option(VerifyMethod.MIXING, "--verify-method"),
    cap_factor: Optional[float] = typer.Option(None, "--cap-factor", help="c in the c·n·ln n walk cap."),
    neighbor_mode: NeighborMode = typer.Option(NeighborMode.CURRENT, "--neighbor-mode"),
    round_cap: Optional[int] = typer.Option(None, "--round-cap", min=1),
    overlay_out: Optional[Path] = typer.Option(None, "--overlay-out", help="Where to write the overlay file."),
):
    """Build an overlay from random spanning trees."""
    _run(ctx, 'build', k=k, distributed=distributed, workers=workers, weight_mode=weight_mode,
         verify_method=verify_method, cap_factor=cap_factor, neighbor_mode=neighbor_mode, round_cap=round_cap,
         overlay_out=overlay_out)


@app.command()
def verify(
    ctx: typer.Context,
    overlay: Optional[Path] = typer.Option(None, "--overlay", help="Overlay file; defaults to the base graph itself."),
    mixing: bool = typer.Option(False, "--mixing"),
    spectral: bool = typer.Option(False, "--spectral"),
    cuts: bool = typer.Option(False, "--cuts"),
    correlation: bool = typer.Option(False, "--correlation"),
    cap_factor: Optional[float] = typer.Option(None, "--cap-factor"),
    neighbor_mode: NeighborMode = typer.Option(NeighborMode.CURRENT, "--neighbor-mode"),
    weighted: bool = typer.Option(False, "--weighted", help="Weight-proportional steps in the mixing walk."),
    epsilon: float = typer.Option(0.5, "--epsilon"),
    probes: Optional[int] = typer.Option(None, "--probes", min=1),
    alpha: float = typer.Option(1.0, "--alpha"),
    samples: int = typer.Option(2000, "--samples", min=1),
):
    """Run the selected checks (mixing by default); exit 1 if any fails."""
    _run(ctx, 'verify', overlay, mixing=mixing, spectral=spectral, cuts=cuts, correlation=correlation,
         cap_factor=cap_factor, neighbor_mode=neighbor_mode, weighted=weighted, epsilon=epsilon, probes=probes,
         alpha=alpha, samples=samples)


@app.command()
def route(
    ctx: typer.Context,
    overlay: Optional[Path] = typer.Option(None, "--overlay"),
    source: int = typer.Option(0, "--source", "-s", min=0),
    target: Optional[int] = typer.Option(None, "--target", "-t", min=0),
    r: int = typer.Option(2, "--r", min=1, help="Intermediate destinations."),
    mode: RoutingMode = typer.Option(RoutingMode.INCREMENTAL, "--mode"),
    revisit: RevisitPolicy = typer.Option(RevisitPolicy.NON_REVISITING, "--revisit"),
    segment_length: Optional[int] = typer.Option(None, "--segment-length", min=1),
    extension_probability: Optional[float] = typer.Option(None, "--extension-probability", min=0.0, max=1.0),
):
    """Plan a single route."""
    _run(ctx, 'route', overlay, source=source, target=target, r=r, mode=mode, revisit=revisit,
         segment_length=segment_length, extension_probability=extension_probability)


@app.command()
def simulate(
    ctx: typer.Context,
    overlay: Optional[Path] = typer.Option(None, "--overlay"),
    flows: Optional[Path] = typer.Option(None, "--flows", help="File of 's t' lines."),
    random_flows: Optional[int] = typer.Option(None, "--random-flows", min=1),
    trials: int = typer.Option(1000, "--trials", min=1),
    r: int = typer.Option(2, "--r", min=1),
    monitors: str = typer.Option("none", "--monitors", help="all, none, or a file of vertex ids."),
    random_monitors: Optional[int] = typer.Option(None, "--random-monitors", min=0),
    non_monitors: Optional[int] = typer.Option(None, "--non-monitors", min=0),
    mode: RoutingMode = typer.Option(RoutingMode.INCREMENTAL, "--mode"),
    revisit: RevisitPolicy = typer.Option(RevisitPolicy.NON_REVISITING, "--revisit"),
    segment_length: Optional[int] = typer.Option(None, "--segment-length", min=1),
    extension_probability: Optional[float] = typer.Option(None, "--extension-probability", min=0.0, max=1.0),
    trace: Optional[Path] = typer.Option(None, "--trace", help="Write one JSON line per trial here."),
):
    """Route many messages against a monitor set."""
    _run(ctx, 'simulate', overlay, flows=flows, random_flows=random_flows, trials=trials, r=r, monitors=monitors,
         random_monitors=random_monitors, non_monitors=non_monitors, mode=mode, revisit=revisit,
         segment_length=segment_length, extension_probability=extension_probability, trace=trace)


@app.command()
def analyze(
    ctx: typer.Context,
    overlay: Optional[Path] = typer.Option(None, "--overlay"),
    flows: Optional[Path] = typer.Option(None, "--flows"),
    random_flows: Optional[int] = typer.Option(None, "--random-flows", min=1),
    trials: int = typer.Option(10_000, "--trials", min=1),
    r: int = typer.Option(2, "--r", min=1),
    monitors: str = typer.Option("none", "--monitors"),
    random_monitors: Optional[int] = typer.Option(None, "--random-monitors", min=0),
    non_monitors: Optional[int] = typer.Option(None, "--non-monitors", min=0),
    mode: RoutingMode = typer.Option(RoutingMode.INCREMENTAL, "--mode"),
    revisit: RevisitPolicy = typer.Option(RevisitPolicy.NON_REVISITING, "--revisit"),
    segment_length: Optional[int] = typer.Option(None, "--segment-length", min=1),
    extension_probability: Optional[float] = typer.Option(None, "--extension-probability", min=0.0, max=1.0),
    kernel: str = typer.Option("uniform", "--kernel", help="uniform, weighted or metropolis."),
    rbc_pairs: int = typer.Option(8, "--rbc-pairs", min=1),
    target: float = typer.Option(0.5, "--target"),
    mix_count: Optional[int] = typer.Option(None, "--mix-count", min=1),
    rbc_csv: Optional[Path] = typer.Option(None, "--rbc-csv"),
    plot_data: Optional[Path] = typer.Option(None, "--plot-data", help="Directory for CSV plot series."),
):
    """Analytic metrics next to a Monte Carlo run, betweenness and anonymity."""
    _run(ctx, 'analyze', overlay, flows=flows, random_flows=random_flows, trials=trials, r=r, monitors=monitors,
         random_monitors=random_monitors, non_monitors=non_monitors, mode=mode, revisit=revisit,
         segment_length=segment_length, extension_probability=extension_probability, kernel=kernel,
         rbc_pairs=rbc_pairs, target=target, mix_count=mix_count, rbc_csv=rbc_csv, plot_data=plot_data)


@app.command()
def report(
    ctx: typer.Context,
    vertices: int = typer.Option(1021, "--vertices", "-n", min=2),
    non_monitors: int = typer.Option(700, "--non-monitors", min=0),
    r: int = typer.Option(2, "--r", min=1),
    degree: float = typer.Option(3.0, "--degree"),
    target: float = typer.Option(0.5, "--target"),
    attackers: Optional[int] = typer.Option(None, "--attackers", min=1),
    mix_count: Optional[int] = typer.Option(None, "--mix-count", min=1),
):
    """Formula-only report; the defaults reproduce the 1021-node example."""
    _run(ctx, 'report', vertices=vertices, non_monitors=non_monitors, r=r, degree=degree, target=target,
         attackers=attackers, mix_count=mix_count)


if __name__ == '__main__':
    app()
