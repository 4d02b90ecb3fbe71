"""Convergence command: Monte-Carlo success rates and posterior trajectories."""

import csv
import json
import logging
from pathlib import Path

import click

from services.acbo_loop import StopRule
from services.convergence import ConvergenceSettings, run_convergence

from .common import exit_on_service_error

logger = logging.getLogger(__name__)

SUMMARY_FILE = 'convergence_summary.json'
TRAJECTORY_FILE = 'trajectories.csv'


@click.command('convergence')
@click.option('--n', 'n_values', multiple=True, type=click.IntRange(min=2), default=(16,), show_default=True,
              help='Hypothesis counts (repeatable).')
@click.option('--eta', 'eta_values', multiple=True, type=click.FloatRange(0.0, 0.5, max_open=True),
              default=(0.1,), show_default=True, help='Per-vote oracle errors (repeatable).')
@click.option('--votes', 'votes_m', type=click.IntRange(min=1), default=1, show_default=True)
@click.option('--trials', type=click.IntRange(min=1), default=2000, show_default=True)
@click.option('--budget', 'budget_t', type=click.IntRange(min=1), default=20, show_default=True)
@click.option('--eps', 'explore_eps', type=click.FloatRange(0.0, 1.0, max_open=True), default=0.0, show_default=True)
@click.option('--stop-rule', type=click.Choice([r.value for r in StopRule]), default=StopRule.MAP_THRESHOLD.value,
              show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', 'out_dir', type=click.Path(file_okay=False), required=True)
@exit_on_service_error
def convergence_cmd(n_values, eta_values, votes_m, trials, budget_t, explore_eps, stop_rule, seed, out_dir):
    """Measure success after T* and after the budget for each (n, eta)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summaries = []
    with (out / TRAJECTORY_FILE).open('w', newline='', encoding='utf-8') as fh:
        writer = csv.DictWriter(fh, fieldnames=['n', 'eta', 'trial', 'round', 'truth_mass'], lineterminator='\n')
        writer.writeheader()
        for n in n_values:
            for eta in eta_values:
                settings = ConvergenceSettings(n=n, eta=eta, trials=trials, budget_t=budget_t, votes_m=votes_m,
                                               explore_eps=explore_eps, stop_rule=stop_rule, seed=seed)
                summary, points = run_convergence(settings)
                summaries.append(summary.to_dict())
                for point in points:
                    writer.writerow({'n': n, 'eta': eta, **point.to_dict()})
                click.echo(
                    f"n={n} eta={eta}: T*={summary.t_star} floor={summary.floor:.4f} "
                    f"success@T*={summary.success_at_t_star:.4f} success@T={summary.success_at_budget:.4f} "
                    f"mean rounds={summary.mean_rounds:.2f}"
                )
    (out / SUMMARY_FILE).write_text(json.dumps(summaries, indent=2) + '\n', encoding='utf-8')
