# texlayout/cli.py

import json
import sys
from functools import wraps
from typing import Optional

import click
from flask import current_app

from config import Config
from texlayout.logger import get_logger                      # Custom application logger
from texlayout.services.exceptions import AppException       # Custom exceptions for error handling
from texlayout.settings import PipelineSettings

logger = get_logger(__name__) # Logger instance for this module


def echo_json(data) -> None:
    """Prints a JSON document on stdout, keys sorted."""
    click.echo(json.dumps(data, sort_keys=True, ensure_ascii=False, indent=2))


def fail(exc: AppException) -> None:
    """Logs an AppException, prints its dict on stderr and exits with its code."""
    logger.error(f"CLI: {exc.code}: {exc.log_message}", exc_info=exc.original_exception)
    click.echo(json.dumps(exc.to_dict(), sort_keys=True, ensure_ascii=False), err=True)
    sys.exit(exc.exit_code)


def handles_app_errors(command):
    """
    Wraps a command so any AppException ends the process with its exit code
    and a JSON error on stderr; unexpected exceptions exit with 1.
    """
    @wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except AppException as e:
            fail(e)
        except (click.ClickException, click.exceptions.Exit):
            raise
        except Exception as e:
            logger.critical(f"CLI: unexpected error in '{command.__name__}': {e}", exc_info=True)
            click.echo(json.dumps({'error': type(e).__name__, 'message': str(e)}), err=True)
            sys.exit(1)
    return wrapper


def load_settings(config_file: Optional[str] = None) -> PipelineSettings:
    """
    Applies an optional `--config` file to the current app and returns the
    settings the services run with.
    """
    if config_file:
        Config.apply_file(current_app, config_file)
    return PipelineSettings.from_config(current_app.config)
