# texlayout/pipeline/commands.py

import sys
from pathlib import Path

import click

from . import pipeline_bp                                   # Import the blueprint instance from texlayout/pipeline/__init__.py
from texlayout.cli import echo_json, handles_app_errors, load_settings
from texlayout.logger import get_logger                     # Custom application logger
from texlayout.models.genome import DocStatus
from texlayout.services import batch_service, export_service, genome_service
from texlayout.utils import atomic_write_bytes

logger = get_logger(__name__) # Logger instance for this module


@pipeline_bp.cli.command('parse')
@click.argument('doc', type=click.Path(path_type=Path))
@click.option('--config', 'config_file', type=click.Path(dir_okay=False), help='Extra dotenv-format settings file.')
@click.option('--out', 'out_dir', type=click.Path(file_okay=False, path_type=Path),
              help='Directory for <doc_id>.genome.json; prints the genome when omitted.')
@click.option('--refs', 'refs_path', type=click.Path(dir_okay=False, path_type=Path),
              help='Reference box file used for grading.')
@click.option('--pages', is_flag=True, help='Also write full-ink page images next to the genome.')
@handles_app_errors
def parse_command(doc: Path, config_file, out_dir, refs_path, pages: bool):
    """
    Runs the whole pipeline on one document (directory, tarball or .tex file).

    The genome is written to `--out` or printed on stdout. A document that
    fails to compile or render still yields its units and relations.
    """
    if pages and out_dir is None:
        raise click.UsageError("--pages needs --out")
    settings = load_settings(config_file)
    logger.info(f"CLI: parse '{doc}'")

    run = genome_service.process_document(doc, settings, refs_path=refs_path, render_pages=pages)
    genome = run.genome
    if genome.status != DocStatus.OK:
        logger.warning(f"CLI: {genome.doc_id} finished with status {genome.status.value}")

    if out_dir is None:
        click.echo(genome_service.serialize_genome(genome).decode('utf-8'), nl=False)
        return
    path = genome_service.write_genome(genome, out_dir)
    if pages:
        genome_service.write_pages(run.pages, Path(out_dir) / f"{genome.doc_id}.pages")
    click.echo(str(path))


@pipeline_bp.cli.command('batch')
@click.argument('input_dir', type=click.Path(file_okay=False, path_type=Path))
@click.option('--out', 'out_dir', type=click.Path(file_okay=False, path_type=Path),
              help='Output directory; defaults to <input_dir>_genomes next to the inputs.')
@click.option('--jobs', default=1, show_default=True, type=click.IntRange(min=1), help='Documents processed at once.')
@click.option('--resume/--no-resume', default=True, show_default=True, help='Skip inputs whose genome is up to date.')
@click.option('--config', 'config_file', type=click.Path(dir_okay=False), help='Extra dotenv-format settings file.')
@handles_app_errors
def batch_command(input_dir: Path, out_dir, jobs: int, resume: bool, config_file):
    """
    Processes every document of a directory and writes genomes plus a
    manifest. Exits with 2 when any document did not finish ok.
    """
    settings = load_settings(config_file)
    out_dir = out_dir or input_dir.with_name(f"{input_dir.name}_genomes")
    manifest = batch_service.batch_run(input_dir, out_dir, settings, jobs=jobs, resume=resume)

    cached = sum(1 for outcome in manifest.outcomes.values() if outcome.cached)
    echo_json({'manifest': str(out_dir / batch_service.MANIFEST_NAME),
               'status': manifest.status_counts(), 'cached': cached})
    if manifest.has_failures:
        sys.exit(2)


@pipeline_bp.cli.command('grade')
@click.argument('genome_path', metavar='GENOME', type=click.Path(dir_okay=False, path_type=Path))
@click.option('--refs', 'refs_path', required=True, type=click.Path(dir_okay=False, path_type=Path),
              help='Reference box JSON file.')
@click.option('--out', 'out_path', type=click.Path(dir_okay=False, path_type=Path),
              help='Write the re-graded genome here; prints the quality report only when omitted.')
@handles_app_errors
def grade_command(genome_path: Path, refs_path: Path, out_path):
    """Grades an existing genome against reference boxes."""
    genome = genome_service.grade_genome(genome_service.read_genome(genome_path), refs_path)
    if out_path is not None:
        atomic_write_bytes(out_path, genome_service.serialize_genome(genome))
    echo_json(genome.quality.to_dict())


@pipeline_bp.cli.command('export')
@click.argument('genome_path', metavar='GENOME', type=click.Path(dir_okay=False, path_type=Path))
@click.option('--pages-dir', type=click.Path(file_okay=False, path_type=Path),
              help='Directory of page_NNN.png images (written by parse --pages).')
@click.option('--out', 'out_dir', required=True, type=click.Path(file_okay=False, path_type=Path))
@click.option('--kind', type=click.Choice(['layout', 'transformation']), default='layout', show_default=True)
@handles_app_errors
def export_command(genome_path: Path, pages_dir, out_dir: Path, kind: str):
    """Exports YOLO layout labels or image-to-LaTeX pairs from a genome."""
    genome = genome_service.read_genome(genome_path)
    if kind == 'layout':
        paths = export_service.export_layout_labels(genome, out_dir, pages_dir)
        echo_json({'kind': kind, 'files': [str(path) for path in paths]})
        return
    if pages_dir is None:
        raise click.UsageError("--kind transformation needs --pages-dir")
    path = export_service.export_transformation_pairs(genome, pages_dir, out_dir)
    echo_json({'kind': kind, 'pairs': str(path)})


@pipeline_bp.cli.command('split')
@click.argument('manifest_path', metavar='MANIFEST', type=click.Path(dir_okay=False, path_type=Path))
@click.option('--per-discipline', default=10, show_default=True, type=click.IntRange(min=0))
@click.option('--seed', default=0, show_default=True, type=int)
@handles_app_errors
def split_command(manifest_path: Path, per_discipline: int, seed: int):
    """Samples a Tier-1 test split per discipline from a batch."""
    manifest = batch_service.load_manifest(manifest_path)
    genomes = batch_service.load_batch_genomes(manifest, manifest_path.parent)
    echo_json(export_service.select_test_split(genomes, per_discipline, seed))
