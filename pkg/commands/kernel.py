"""Kernel sweep command: near-miss statistics per depth as CSV."""

import csv
import logging
import sys

import click

from services.kernel_bound import KernelSweepRow, sweep

from .common import exit_on_service_error, parse_int_range

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ['d', 'L', 'delta', 'margin_bound', 'required_b', 'rho']


@click.command('kernel')
@click.option('--d-range', 'd_range', default='3..24', show_default=True)
@click.option('--b-norm', type=float, default=1.0, show_default=True)
@click.option('--gamma', type=float, default=1.0, show_default=True)
@click.option('--kappa', type=float, default=1.0, show_default=True, help='Feature norm bound.')
@click.option('--out', 'out_path', type=click.Path(dir_okay=False), default=None,
              help='CSV path (stdout when omitted).')
@exit_on_service_error
def kernel_cmd(d_range, b_norm, gamma, kappa, out_path):
    """Sweep near-miss pairs over d and emit delta, margin bound, required B and rho."""
    rows: list[KernelSweepRow] = sweep(parse_int_range(d_range), b_norm=b_norm, gamma=gamma, kappa=kappa)
    fh = open(out_path, 'w', newline='', encoding='utf-8') if out_path else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow(row.to_dict())
    finally:
        if out_path:
            fh.close()
