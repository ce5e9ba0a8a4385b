# run.py

import os
import sys
import json

from flask.cli import FlaskGroup

from texlayout import create_app # Imports the application factory from texlayout/__init__.py
from texlayout.services.exceptions import ConfigError

# Determine the configuration name from the TEXLAYOUT_CONFIG environment variable.
# This allows switching between 'development', 'production', 'testing' configurations
# by setting the environment variable before running a command.
# It defaults to 'production' (the 'default' entry of config.py) if unset.
config_name = os.environ.get('TEXLAYOUT_CONFIG', 'default').lower()


def _create_app():
    """Builds the app for the CLI; an invalid configuration exits with code 3."""
    try:
        return create_app(config_name)
    except ConfigError as e:
        print(json.dumps(e.to_dict(), sort_keys=True), file=sys.stderr)
        sys.exit(e.exit_code)


# The pipeline commands are registered by the blueprints; Flask's own
# `run`/`shell`/`routes` commands are left out.
cli = FlaskGroup(create_app=_create_app, add_default_commands=False,
                 help="Auto-labeling of LaTeX documents into layout genomes.")

if __name__ == '__main__':
    # e.g. `python run.py parse paper.tar.gz --out genomes/`
    cli()
