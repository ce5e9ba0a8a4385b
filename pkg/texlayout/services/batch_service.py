# texlayout/services/batch_service.py

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from texlayout.logger import get_logger                                         # Custom application logger
from texlayout.models.genome import PIPELINE_VERSION, BatchManifest, DocOutcome, DocStatus, DocumentGenome
from texlayout.services import genome_service
from texlayout.services.exceptions import (                                     # Custom exceptions for error handling
    AppException, ConfigError, IngestError, IngestFailed, SchemaViolation, SourceIOError,
)
from texlayout.settings import PipelineSettings
from texlayout.utils import atomic_write_bytes
from werkzeug.utils import secure_filename                                      # File-safe doc ids

logger = get_logger(__name__) # Logger instance for this module

MANIFEST_NAME = 'manifest.json'
INPUT_SUFFIXES = ('.tex', '.tar', '.tar.gz', '.tgz', '.gz')


def discover_inputs(input_dir) -> List[Path]:
    """
    Document inputs of a batch directory in name order: source directories,
    tarballs, gzipped files and bare .tex files. Sidecars, genomes and
    hidden entries are skipped.
    """
    input_dir = Path(input_dir)
    if not input_dir.is_dir():
        raise SourceIOError(message=f"Input directory not found: {input_dir}")
    inputs = []
    for entry in sorted(input_dir.iterdir(), key=lambda path: path.name):
        name = entry.name
        if name.startswith('.') or name == MANIFEST_NAME or name.endswith(genome_service.SIDECAR_SUFFIXES):
            continue
        if entry.is_dir() or name.lower().endswith(INPUT_SUFFIXES):
            inputs.append(entry)
    return inputs


def load_manifest(path) -> BatchManifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except OSError as e:
        raise SourceIOError(message=f"Cannot read manifest {path}: {e}", original_exception=e)
    except json.JSONDecodeError as e:
        raise SchemaViolation(message=f"Manifest {path} is not valid JSON: {e}", original_exception=e)
    try:
        return BatchManifest.from_dict(data)
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise SchemaViolation(message=f"Manifest {path} is malformed: {e}", original_exception=e)


def write_manifest(manifest: BatchManifest, out_dir) -> Path:
    text = json.dumps(manifest.to_dict(), sort_keys=True, ensure_ascii=False, indent=2, allow_nan=False)
    return atomic_write_bytes(Path(out_dir) / MANIFEST_NAME, (text + '\n').encode('utf-8'))


def _cached_outcome(doc_path: Path, previous: Optional[DocOutcome], out_dir: Path) -> Optional[DocOutcome]:
    """The previous outcome when its genome is on disk and still matches the input bytes."""
    if previous is None or previous.genome_file is None:
        return None
    genome_path = out_dir / previous.genome_file
    if not genome_path.is_file():
        return None
    try:
        genome = genome_service.read_genome(genome_path)
        digest = genome_service.source_digest_of(doc_path)
    except (IngestError, SchemaViolation) as e:
        logger.debug(f"Service: no cache hit for {doc_path.name}: {e}")
        return None
    if genome.source_digest != digest or genome.pipeline_version != PIPELINE_VERSION:
        return None
    return DocOutcome(
        status=genome.status,
        doc_id=genome.doc_id,
        tier=genome.quality.tier.value if genome.quality.tier else None,
        source_digest=genome.source_digest,
        genome_file=previous.genome_file,
        cached=True,
    )


def _process(doc_path: Path, settings: PipelineSettings):
    try:
        return genome_service.process_document(doc_path, settings)
    except IngestFailed as e:
        return e
    except ConfigError:
        raise
    except Exception as e:
        logger.error(f"Service: unexpected failure on {doc_path.name}: {e}", exc_info=True)
        return IngestFailed(message=f"Unexpected failure: {e}", original_exception=e)


def batch_run(input_dir, out_dir, settings: PipelineSettings, jobs: int = 1, resume: bool = True) -> BatchManifest:
    """
    Processes every input of a directory with a bounded worker pool.

    Workers only compute; this thread writes every genome and the manifest,
    in input order, after each document completes. With `resume`, inputs
    whose genome from a previous run still matches their source digest are
    not reprocessed and are marked `cached`.

    Args:
        input_dir (str | Path): Directory of document inputs.
        out_dir (str | Path): Receives `<doc_id>.genome.json` files and `manifest.json`.
        settings (PipelineSettings): Pipeline settings shared by all documents.
        jobs (int): Maximum documents processed at once.
        resume (bool): Reuse matching outputs of a previous run.

    Returns:
        BatchManifest: One outcome per input.

    Raises:
        SourceIOError: If the input directory does not exist.
        ConfigError: If a setting turns out unusable while processing.
    """
    inputs = discover_inputs(input_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = max(1, int(jobs))

    previous: Dict[str, DocOutcome] = {}
    manifest_path = out_dir / MANIFEST_NAME
    if resume and manifest_path.is_file():
        try:
            previous = load_manifest(manifest_path).outcomes
        except AppException as e:
            logger.warning(f"Service: ignoring unreadable previous manifest: {e}")

    manifest = BatchManifest(inputs=[path.name for path in inputs])
    pending = []
    for doc_path in inputs:
        cached = _cached_outcome(doc_path, previous.get(doc_path.name), out_dir) if resume else None
        if cached is not None:
            logger.info(f"Service: {doc_path.name} unchanged, reusing {cached.genome_file}")
            manifest.outcomes[doc_path.name] = cached
        else:
            pending.append(doc_path)
    logger.info(f"Service: batch of {len(inputs)} inputs, {len(pending)} to process with {jobs} job(s)")

    written = {outcome.genome_file for outcome in manifest.outcomes.values() if outcome.genome_file}
    with ThreadPoolExecutor(max_workers=jobs) as executor:
        futures = [(doc_path, executor.submit(_process, doc_path, settings)) for doc_path in pending]
        for doc_path, future in futures:
            result = future.result()
            if isinstance(result, IngestFailed):
                logger.warning(f"Service: {doc_path.name} failed to ingest: {result}")
                outcome = DocOutcome(status=DocStatus.INGEST_FAILED, error=str(result))
            else:
                genome = result.genome
                file_name = genome_service.genome_file_name(genome.doc_id)
                if file_name in written:
                    original = genome.doc_id
                    genome.doc_id = secure_filename(f"{original}-{doc_path.name}")
                    genome.warnings.append(f"DuplicateDocId: {original} already produced by another input")
                    file_name = genome_service.genome_file_name(genome.doc_id)
                genome_service.write_genome(genome, out_dir)
                written.add(file_name)
                outcome = DocOutcome(
                    status=genome.status,
                    doc_id=genome.doc_id,
                    tier=genome.quality.tier.value if genome.quality.tier else None,
                    source_digest=genome.source_digest,
                    genome_file=file_name,
                    timings=result.timings,
                )
            manifest.outcomes[doc_path.name] = outcome
            write_manifest(manifest, out_dir)

    write_manifest(manifest, out_dir)
    logger.info(f"Service: batch finished: {manifest.status_counts()}")
    return manifest


def load_batch_genomes(manifest: BatchManifest, genome_dir) -> List[DocumentGenome]:
    """Genomes referenced by a manifest, in input order."""
    genome_dir = Path(genome_dir)
    genomes = []
    for name in manifest.inputs:
        outcome = manifest.outcomes.get(name)
        if outcome is not None and outcome.genome_file:
            genomes.append(genome_service.read_genome(genome_dir / outcome.genome_file))
    return genomes


def _fractions(counter: Counter) -> Dict[str, float]:
    total = sum(counter.values())
    return {key: round(count / total, 9) for key, count in sorted(counter.items())} if total else {}


def stats(manifest: BatchManifest, genomes: Sequence[DocumentGenome]) -> dict:
    """
    Corpus summary of a batch.

    Returns:
        dict: `status` counts from the manifest, `tiers` as fractions of
        graded genomes (ungraded ones are counted under `ungraded`),
        `attributes` and `relations` as counts by name, and `pages` as a
        count of genomes per page count.
    """
    tiers: Counter = Counter()
    ungraded = 0
    attributes: Counter = Counter()
    relations: Counter = Counter()
    pages: Counter = Counter()
    for genome in genomes:
        if genome.quality.graded and genome.quality.tier is not None:
            tiers[genome.quality.tier.value] += 1
        else:
            ungraded += 1
        attributes.update(unit.attribute.label_name for unit in genome.units)
        relations.update(relation.kind.value for relation in genome.relations)
        if genome.page_count:
            pages[str(genome.page_count)] += 1

    return {
        'documents': len(genomes),
        'status': dict(sorted(manifest.status_counts().items())),
        'tiers': _fractions(tiers),
        'ungraded': ungraded,
        'attributes': dict(sorted(attributes.items())),
        'relations': dict(sorted(relations.items())),
        'pages': dict(sorted(pages.items(), key=lambda item: int(item[0]))),
    }
