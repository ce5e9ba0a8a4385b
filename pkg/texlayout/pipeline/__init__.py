# texlayout/pipeline/__init__.py
"""
This package implements the pipeline blueprint.

It registers the dataset-building commands: `parse` (one document),
`batch` (a directory of documents), `grade` (re-grade a genome against
reference boxes), `export` (layout labels or transformation pairs) and
`split` (Tier-1 test split). Commands are defined in `commands.py`.
The blueprint carries no routes; `cli_group=None` puts its commands at the
top level of the application CLI.
"""
from flask import Blueprint

pipeline_bp = Blueprint('pipeline', __name__, cli_group=None)

from . import commands # Import commands after blueprint object is defined
