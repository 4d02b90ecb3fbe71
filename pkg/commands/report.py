"""Report command: recompute metrics from a results file."""

import json

import click

from services.experiment import read_results, report_from_results, write_report

from .common import exit_on_service_error


@click.command('report')
@click.option('--results', 'results_path', type=click.Path(dir_okay=False, exists=True), required=True)
@click.option('--out', 'out_path', type=click.Path(dir_okay=False), default=None)
@exit_on_service_error
def report_cmd(results_path, out_path):
    """Aggregate per-instance results into a metrics report."""
    report = report_from_results(read_results(results_path))
    if out_path:
        write_report(out_path, report)
    click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
