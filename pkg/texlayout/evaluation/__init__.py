# texlayout/evaluation/__init__.py
"""
Evaluation blueprint: `score` (downstream task metrics against genomes)
and `stats` (corpus summary of a batch manifest). Commands are defined in
`commands.py`.
"""
from flask import Blueprint

evaluation_bp = Blueprint('evaluation', __name__, cli_group=None)

from . import commands # Import commands after blueprint object is defined
