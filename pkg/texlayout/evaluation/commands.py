# texlayout/evaluation/commands.py

from pathlib import Path

import click

from . import evaluation_bp                                 # Import the blueprint instance from texlayout/evaluation/__init__.py
from texlayout.cli import echo_json, handles_app_errors
from texlayout.logger import get_logger                     # Custom application logger
from texlayout.services import batch_service, genome_service, metrics_service

logger = get_logger(__name__) # Logger instance for this module


@evaluation_bp.cli.command('score')
@click.argument('task', type=click.Choice(metrics_service.SCORE_TASKS))
@click.option('--pred', 'pred_path', required=True, type=click.Path(dir_okay=False, path_type=Path),
              help='Predictions as a JSON list or JSON lines.')
@click.option('--gt', 'gt_dir', type=click.Path(file_okay=False, path_type=Path),
              help='Directory of ground-truth genomes (not needed for judge).')
@handles_app_errors
def score_command(task: str, pred_path: Path, gt_dir):
    """Scores downstream predictions against the genomes of a batch."""
    if gt_dir is None and task != 'judge':
        raise click.UsageError(f"--gt is required for {task}")
    predictions = metrics_service.load_predictions(pred_path)
    genomes = genome_service.load_genomes(gt_dir) if gt_dir is not None else []
    logger.info(f"CLI: scoring {len(predictions)} {task} predictions against {len(genomes)} genomes")
    reports = metrics_service.score_task(task, predictions, genomes)
    echo_json({'task': task, 'metrics': [report.to_dict() for report in reports]})


@evaluation_bp.cli.command('stats')
@click.argument('manifest_path', metavar='MANIFEST', type=click.Path(dir_okay=False, path_type=Path))
@handles_app_errors
def stats_command(manifest_path: Path):
    """Tier, attribute, relation and page-count summary of a batch."""
    manifest = batch_service.load_manifest(manifest_path)
    genomes = batch_service.load_batch_genomes(manifest, manifest_path.parent)
    echo_json(batch_service.stats(manifest, genomes))
