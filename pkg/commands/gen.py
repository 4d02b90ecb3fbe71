"""
Dataset generation command.

Writes one JSONL file per depth plus a manifest CSV.
"""

import logging
from pathlib import Path

import click

from services.benchgen import (
    DEFAULT_DEV_N,
    DEFAULT_TEST_N,
    Density,
    GenerationPolicy,
    dataset_filename,
    generate,
    manifest,
    split_assign,
    write_jsonl,
)
from services.premise_text import CiPolicy

from .common import exit_on_service_error, parse_int_range

logger = logging.getLogger(__name__)

MANIFEST_FILE = 'manifest.csv'


@click.command('gen')
@click.option('--depths', required=True, help="Depths to generate, e.g. '7..10' or '7,12'.")
@click.option('--per-depth', type=click.IntRange(min=1), required=True, help='Instances per depth.')
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True)
@click.option('--dev-n', type=click.IntRange(min=0), default=DEFAULT_DEV_N, show_default=True)
@click.option('--test-n', type=click.IntRange(min=0), default=DEFAULT_TEST_N, show_default=True)
@click.option('--density', type=click.Choice([d.value for d in Density]), default=Density.DENSE.value,
              show_default=True)
@click.option('--policy', type=click.Choice([p.value for p in CiPolicy]), default=CiPolicy.MINIMAL.value,
              show_default=True, help='Which independence statements premises list.')
@click.option('--workers', type=click.IntRange(min=1), default=1, show_default=True)
@exit_on_service_error
def gen_cmd(depths, per_depth, seed, out_dir, dev_n, test_n, density, policy, workers):
    """Generate benchmark instances and their manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gen_policy = GenerationPolicy(density=density, ci_policy=policy)
    everything = []
    for d in parse_int_range(depths):
        instances = generate(d, per_depth, seed, gen_policy, workers=workers)
        if per_depth >= dev_n + test_n:
            instances = split_assign(instances, dev_n, test_n, seed)
        else:
            logger.warning(f"d={d}: {per_depth} instances cannot fill dev={dev_n} and test={test_n}; leaving splits unset")
        path = write_jsonl(out / dataset_filename(d), instances)
        click.echo(f"Wrote {len(instances)} instances to {path}")
        everything.extend(instances)
    (out / MANIFEST_FILE).write_text(manifest(everything).to_csv(), encoding='utf-8')
    click.echo(f"Wrote manifest to {out / MANIFEST_FILE}")
