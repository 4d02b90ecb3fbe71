"""
Active causal discovery toolkit

Command-line entry point: benchmark generation, the interventional
discrimination loop over hypothesis DAGs, convergence studies, the
kernel-similarity sweep and metric reports.

License: Apache License 2.0
"""

import logging

import click
from dotenv import load_dotenv

from commands import convergence_cmd, gen_cmd, kernel_cmd, replay_cmd, report_cmd, run_cmd

# Load environment variables from a .env file if it exists
load_dotenv()

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='Enable debug logging.')
def cli(verbose):
    """Active causal discovery with a noisy interventional oracle."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format=LOG_FORMAT)


cli.add_command(gen_cmd)
cli.add_command(run_cmd)
cli.add_command(convergence_cmd)
cli.add_command(kernel_cmd)
cli.add_command(report_cmd)
cli.add_command(replay_cmd)


if __name__ == '__main__':
    cli()
