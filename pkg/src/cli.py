"""
Command-line interface for the SPE process monitor.
"""

import sys
from typing import Optional, Tuple

import click
from rich.console import Console
from rich.table import Table

from . import __version__
from .process_monitor import EVAL_SPLITS, ProcessMonitor
from .utils.errors import SpeMonitorError
from .utils.logger import configure_root_logger

PE_CHOICES = ["none", "sin", "spe"]


@click.group()
@click.option('--config', '-c', help='Configuration file path')
@click.option('--seed', type=int, help='Base random seed')
@click.option('--out', 'output_dir', help='Output directory')
@click.option('--verbose', '-v', is_flag=True, help='Enable verbose logging')
@click.option('--quiet', '-q', is_flag=True, help='Suppress output')
@click.pass_context
def cli(ctx, config: Optional[str], seed: Optional[int], output_dir: Optional[str], verbose: bool, quiet: bool):
    """SPE process monitor - next-activity prediction with ontology-aware positional encodings."""
    ctx.ensure_object(dict)

    if verbose:
        log_level = "DEBUG"
    elif quiet:
        log_level = "ERROR"
    else:
        log_level = None

    ctx.obj['config_path'] = config
    ctx.obj['overrides'] = {'seed': seed, 'output_dir': output_dir}
    ctx.obj['log_level'] = log_level
    ctx.obj['quiet'] = quiet
    configure_root_logger(level=log_level or "INFO")


def _monitor(ctx) -> ProcessMonitor:
    """Build the workflow once per invocation; the configured log level applies unless -v/-q was given."""
    if 'monitor' not in ctx.obj:
        monitor = ProcessMonitor(config_path=ctx.obj.get('config_path'), overrides=ctx.obj.get('overrides'))
        if ctx.obj.get('log_level') is None:
            configure_root_logger(level=str(monitor.config['log_level']).upper())
        ctx.obj['monitor'] = monitor
    return ctx.obj['monitor']


def _say(ctx, message: str):
    if not ctx.obj.get('quiet'):
        click.echo(message)


@cli.command()
@click.pass_context
def synth(ctx):
    """Generate a synthetic ontology and event log."""
    monitor = _monitor(ctx)
    log_path, ontology_path, stats = monitor.synth()
    _say(ctx, f"Event log: {log_path}")
    _say(ctx, f"Ontology:  {ontology_path}")
    _say(ctx, f"Traces: {stats.n_traces}, events: {stats.n_events}, activities: {stats.n_activities}")


@cli.command()
@click.option('--log', 'log_path', help='Event log CSV (defaults to the configured one)')
@click.pass_context
def stats(ctx, log_path: Optional[str]):
    """Show trace-length statistics of an event log."""
    summary = _monitor(ctx).stats(log_path)
    for key, value in summary.as_dict().items():
        click.echo(f"{key}: {value:.2f}" if isinstance(value, float) else f"{key}: {value}")

    if not ctx.obj.get('quiet'):
        table = Table(title="Trace lengths")
        table.add_column("length", justify="right")
        table.add_column("traces", justify="right")
        for length, count in sorted(summary.histogram.items()):
            table.add_row(str(length), str(count))
        Console().print(table)


@cli.command()
@click.option('--pe', 'methods', multiple=True, type=click.Choice(PE_CHOICES), help='Positional encoding (repeatable)')
@click.option('--size', 'sizes', multiple=True, type=int, help='Embedding size (repeatable)')
@click.option('--fits', type=int, help='Independent fits per configuration')
@click.option('--epochs', type=int, help='Maximum epochs per fit')
@click.option('--log', 'log_path', help='Event log CSV (defaults to the configured one)')
@click.pass_context
def train(ctx, methods: Tuple[str, ...], sizes: Tuple[int, ...], fits: Optional[int],
          epochs: Optional[int], log_path: Optional[str]):
    """Train repeated fits and aggregate test accuracy@k."""
    monitor = _monitor(ctx)
    monitor.config_manager.update_config({'n_fits': fits, 'epochs': epochs})
    monitor.config = monitor.config_manager.get_config()

    rows = monitor.train(methods or None, sizes or None, log_path)
    for row in rows:
        aggregate = row.summary.aggregate
        scores = ", ".join(
            f"acc@{k} {100 * aggregate.mean[k]:.1f}±{100 * aggregate.std[k]:.1f}" for k in aggregate.ks
        )
        _say(ctx, f"{row.method:>4} d={row.model_size:<4} {scores}  checkpoint: {row.checkpoint}")
    _say(ctx, f"Results written to {monitor.output_dir}")


@cli.command(name='eval')
@click.option('--checkpoint', required=True, help='Checkpoint directory')
@click.option('--log', 'log_path', help='Event log CSV (defaults to the configured one)')
@click.option('--split', default='all', type=click.Choice(list(EVAL_SPLITS)), help='Traces to score')
@click.pass_context
def evaluate(ctx, checkpoint: str, log_path: Optional[str], split: str):
    """Score a saved checkpoint on an event log."""
    report = _monitor(ctx).evaluate(checkpoint, log_path, split)
    for name, value in report.as_dict().items():
        click.echo(f"{name}: {value:.4f}")
    click.echo(f"positions: {report.valid_positions}")


@cli.command()
@click.option('--budget', type=int, help='Number of random-search trials')
@click.option('--log', 'log_path', help='Event log CSV (defaults to the configured one)')
@click.pass_context
def tune(ctx, budget: Optional[int], log_path: Optional[str]):
    """Random search over architecture and optimizer hyperparameters."""
    monitor = _monitor(ctx)
    result = monitor.tune(budget, log_path)
    best = result.best
    _say(ctx, f"Best trial {best.index}: val_loss {best.val_loss:.4f}")
    for key, value in best.params.items():
        _say(ctx, f"  {key}: {value}")
    _say(ctx, f"Best configuration saved to {monitor.output_dir / 'best_config.yaml'}")


@cli.command(name='encode-graph')
@click.option('--ontology', help='Ontology JSON (defaults to the configured one)')
@click.option('-k', 'k', type=int, help='Number of eigenvectors')
@click.option('--output', '-o', help='Output CSV path')
@click.pass_context
def encode_graph(ctx, ontology: Optional[str], k: Optional[int], output: Optional[str]):
    """Write the Laplacian node-embedding table of an ontology."""
    table, path = _monitor(ctx).encode_graph(ontology, k, output)
    _say(ctx, f"Embedded {len(table)} nodes with k={table.k} into {path}")


@cli.command()
def version():
    """Show version information."""
    click.echo(f"SPE process monitor v{__version__}")


def main(argv=None):
    """Entry point mapping failures to exit codes: 1 usage/config, 2 data or I/O, 3 numerical."""
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
    except click.exceptions.Abort:
        click.echo("Aborted.", err=True)
        sys.exit(1)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    except SpeMonitorError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(e.exit_code)
    except OSError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == '__main__':
    main()
