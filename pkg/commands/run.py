"""
Experiment command: hypothesis generation, discrimination loop and metrics
over a dataset.
"""

import json
import logging

import click

from services.experiment import ExperimentConfig, run_experiment

from .common import exit_on_service_error

logger = logging.getLogger(__name__)


@click.command('run')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), required=True,
              help='Experiment config JSON.')
@click.option('--resume', is_flag=True, help='Skip instances already in results.jsonl.')
@exit_on_service_error
def run_cmd(config_path, resume):
    """Run an experiment from a config file."""
    config = ExperimentConfig.load(config_path)
    outcome = run_experiment(config, resume=resume)
    click.echo(json.dumps(outcome.report.to_dict(), indent=2, sort_keys=True))
