"""
Command package.

Exports every click subcommand for registration on the main `acbo` group.
"""

from .gen import gen_cmd
from .run import run_cmd
from .convergence import convergence_cmd
from .kernel import kernel_cmd
from .report import report_cmd
from .replay import replay_cmd

__all__ = ['gen_cmd', 'run_cmd', 'convergence_cmd', 'kernel_cmd', 'report_cmd', 'replay_cmd']
