"""Replay command: rerun an experiment against a recorded transcript."""

import json
import logging
from dataclasses import replace

import click

from services.experiment import ExperimentConfig, run_experiment
from services.oracle_service import OracleConfig, OracleMode

from .common import exit_on_service_error

logger = logging.getLogger(__name__)


@click.command('replay')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), required=True)
@click.option('--transcript', type=click.Path(dir_okay=False, exists=True), required=True)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None,
              help='Output directory (defaults to <output_dir>/replay).')
@exit_on_service_error
def replay_cmd(config_path, transcript, out_dir):
    """Rerun a recorded LLM experiment without calling the model."""
    config = ExperimentConfig.load(config_path)
    oracle = OracleConfig(eta=config.oracle.eta, votes_m=config.oracle.votes_m, mode=OracleMode.REPLAY)
    config = replace(config, oracle=oracle, transcript=transcript,
                     output_dir=out_dir or f"{config.output_dir.rstrip('/')}/replay")
    outcome = run_experiment(config)
    click.echo(json.dumps(outcome.report.to_dict(), indent=2, sort_keys=True))
