"""Helpers shared by the subcommands."""

import functools
import logging

import click

from services.errors import CausalServiceError

logger = logging.getLogger(__name__)


def parse_int_range(text: str) -> list[int]:
    """'7..10' -> [7, 8, 9, 10]; '7,9' -> [7, 9]; '7' -> [7]."""
    values = []
    try:
        for part in text.split(','):
            part = part.strip()
            if '..' in part:
                low, high = (int(x) for x in part.split('..', 1))
                if high < low:
                    raise click.BadParameter(f"empty range {part!r}")
                values.extend(range(low, high + 1))
            elif part:
                values.append(int(part))
    except ValueError:
        raise click.BadParameter(f"expected integers like '7..10' or '7,8', got {text!r}")
    if not values:
        raise click.BadParameter("no values given")
    return values


def exit_on_service_error(func):
    """Report a CausalServiceError and exit with its family's code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except CausalServiceError as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(f"Error: {e}", err=True)
            raise SystemExit(e.exit_code)
        except OSError as e:
            logger.error(f"I/O error: {e}")
            click.echo(f"Error: {e}", err=True)
            raise SystemExit(4)

    return wrapper
