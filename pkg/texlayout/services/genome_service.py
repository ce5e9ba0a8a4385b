# texlayout/services/genome_service.py

import io
import json
import time
from contextlib import contextmanager
from pathlib import Path
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from PIL import Image                                                              # Page PNG encoding

from texlayout.logger import document_context, get_logger                          # Custom application logger
from texlayout.models.genome import GENOME_SCHEMA_VERSION, DocStatus, DocumentGenome, GenomeUnit
from texlayout.models.page import PageImage, RenderStatus, SplitKind
from texlayout.models.quality import QualityReport
from texlayout.models.unit import AnnotatedUnit, Relation, RelationKind
from texlayout.services import ingest_service, preprocess_service, quality_service
from texlayout.services.annotate_service import annotate_document, normalize_unit_text
from texlayout.services.render_service import render_document
from texlayout.services.segment_service import segment_units
from texlayout.services.exceptions import (                                        # Custom exceptions for error handling
    AppException, CompileFailure, IngestError, IngestFailed, PageMismatch, RasterFailure,
    SchemaViolation, SegmentationError, SourceIOError
)
from texlayout.settings import PipelineSettings
from texlayout.utils import atomic_write_bytes, digest_files, make_doc_id, strip_archive_suffix

logger = get_logger(__name__) # Logger instance for this module

GENOME_SUFFIX = '.genome.json'
REFS_SUFFIX = '.refs.json'
CATEGORIES_SUFFIX = '.categories.json'
SIDECAR_SUFFIXES = (GENOME_SUFFIX, REFS_SUFFIX, CATEGORIES_SUFFIX)


@dataclass
class PipelineRun:
    """A processed document: its genome, optional page images and stage timings in seconds."""
    genome: DocumentGenome
    pages: List[PageImage] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)


def sidecar_path(doc_path, suffix: str) -> Path:
    """`papers/1234.5678.tar.gz` -> `papers/1234.5678<suffix>`."""
    doc_path = Path(doc_path)
    return doc_path.with_name(strip_archive_suffix(doc_path.name.rstrip('/')) + suffix)


def source_digest_of(doc_path) -> str:
    """Content hash of an input, as recorded in its genome and used to resume batches."""
    return digest_files(ingest_service.ingest_archive(doc_path).files.items())


def _load_categories(doc_path, warnings: List[str]) -> List[str]:
    path = sidecar_path(doc_path, CATEGORIES_SUFFIX)
    if not path.is_file():
        return []
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as e:
        warnings.append(f"BadSidecar: {path.name} ignored: {e}")
        return []
    if isinstance(data, dict):
        data = data.get('categories', [])
    if not isinstance(data, list):
        warnings.append(f"BadSidecar: {path.name} has no category list")
        return []
    return [str(category) for category in data]


def _find_references(doc_path, doc_id: str, settings: PipelineSettings, refs_path=None) -> Optional[Path]:
    candidates = [Path(refs_path)] if refs_path else [sidecar_path(doc_path, REFS_SUFFIX)]
    if not refs_path and settings.refs_dir:
        candidates.append(Path(settings.refs_dir) / f"{doc_id}{REFS_SUFFIX}")
    return next((path for path in candidates if path.is_file()), None)


def _genome_units(units: Sequence[AnnotatedUnit], status: RenderStatus, renders=None) -> List[GenomeUnit]:
    genome_units = []
    for unit in units:
        boxes, split_kind, unit_status = [], SplitKind.NONE, status
        if renders is not None:
            unit_render = renders.get(unit.unit_id)
            if unit_render is not None:
                unit_status = unit_render.status
                if unit_render.boxes is not None:
                    boxes, split_kind = list(unit_render.boxes.boxes), unit_render.boxes.split_kind
        genome_units.append(GenomeUnit(
            unit_id=unit.unit_id,
            order_index=unit.order_index,
            attribute=unit.attribute,
            env_kind=unit.env_kind,
            source_span=list(unit.source_span),
            raw_source=unit.raw_source,
            normalized_text=normalize_unit_text(unit.raw_source),
            boxes=boxes,
            split_kind=split_kind,
            render_status=unit_status,
            parent_id=unit.parent_id,
            labels_defined=list(unit.labels_defined),
            refs_used=list(unit.refs_used),
        ))
    return genome_units


@contextmanager
def _timed(timings: Dict[str, float], stage: str):
    started = time.perf_counter()
    try:
        yield
    finally:
        timings[stage] = timings.get(stage, 0.0) + time.perf_counter() - started


def process_document(doc_path, settings: PipelineSettings, refs_path=None, render_pages: bool = False) -> PipelineRun:
    """
    Runs every stage on one document: ingest, preprocess, segment, annotate,
    render and grade.

    Failures after ingestion degrade the record instead of dropping it: a
    baseline that does not compile leaves every unit compile_failed, a
    raster or pagination failure leaves them render_failed, and in both
    cases the genome keeps its units and relations and stays ungraded.

    Args:
        doc_path (str | Path): Directory, .tex file, tarball or gzip.
        settings (PipelineSettings): Pipeline settings.
        refs_path (str | Path, optional): Reference boxes; defaults to the
                                          `<doc>.refs.json` sidecar or TEXLAYOUT_REFS_DIR.
        render_pages (bool): Also rasterize the full-ink render for `pages`.

    Returns:
        PipelineRun: The genome with page images and timings.

    Raises:
        IngestFailed: If nothing can be emitted for the document.
    """
    with document_context(Path(doc_path).name):
        return _run_stages(doc_path, settings, refs_path, render_pages)


def _run_stages(doc_path, settings: PipelineSettings, refs_path, render_pages: bool) -> PipelineRun:
    timings: Dict[str, float] = {}
    warnings: List[str] = []
    logger.info(f"Service: processing {doc_path}")

    try:
        with _timed(timings, 'ingest'):
            tree = ingest_service.ingest_archive(doc_path)
            source_digest = digest_files(tree.files.items())
            selection = ingest_service.detect_main_file(tree)
            if selection.ambiguous:
                warnings.append(f"AmbiguousMainFile: chose '{selection.path}' among {list(selection.candidates)}")
            tree = ingest_service.normalize_figures(tree, settings)
        with _timed(timings, 'preprocess'):
            policy = preprocess_service.load_noise_policy(settings.noise_policy)
            src = preprocess_service.preprocess_source(tree, selection.path, policy)
        with _timed(timings, 'segment'):
            segment_warnings: List[str] = []
            drafts = segment_units(src, segment_warnings)
    except (IngestError, SegmentationError) as e:
        logger.error(f"Service: ingest of {doc_path} failed: {e.log_message}")
        raise IngestFailed(message=f"{doc_path}: {e}", errors=e.errors or {'cause': e.code}, original_exception=e)

    document_start = src.text.find('\\begin{document}')
    doc_id = make_doc_id(doc_path, src.text[:document_start] if document_start >= 0 else src.text)

    with _timed(timings, 'annotate'):
        annotate_warnings: List[str] = []
        units, relations = annotate_document(drafts, annotate_warnings)

    warnings = list(tree.warnings) + warnings + list(src.warnings) + segment_warnings + annotate_warnings
    genome = DocumentGenome(
        doc_id=doc_id,
        source_digest=source_digest,
        dpi=settings.raster_dpi,
        main_file=selection.path,
        noise_policy=src.noise_policy_applied,
        categories=_load_categories(doc_path, warnings),
    )

    pages: List[PageImage] = []
    with _timed(timings, 'render'):
        try:
            rendered = render_document(src, units, settings, tree=tree, main_file=selection.path,
                                       full_render=render_pages)
        except CompileFailure as e:
            warnings.append(f"CompileFailure: baseline did not compile ({e.cause}): {e}")
            logger.warning(f"Service: {doc_id} baseline compile failed ({e.cause}); emitting units without boxes")
            genome.status = DocStatus.COMPILE_FAILED
            genome.units = _genome_units(units, RenderStatus.COMPILE_FAILED)
        except (RasterFailure, PageMismatch) as e:
            warnings.append(f"{e.code}: {e}")
            logger.warning(f"Service: {doc_id} render failed ({e.code}); emitting units without boxes")
            genome.status = DocStatus.RENDER_FAILED
            genome.units = _genome_units(units, RenderStatus.RENDER_FAILED)
        else:
            genome.page_count = rendered.page_count
            genome.page_sizes = rendered.page_sizes
            genome.units = _genome_units(units, RenderStatus.NOT_RENDERED, rendered.units)
            relations = relations + rendered.relations
            warnings.extend(rendered.warnings)
            pages = rendered.pages

    genome.relations = sorted(relations, key=Relation.sort_key)

    with _timed(timings, 'grade'):
        if genome.status == DocStatus.OK:
            refs_file = _find_references(doc_path, doc_id, settings, refs_path)
            refs = None
            if refs_file is not None:
                try:
                    refs = quality_service.load_reference_boxes(refs_file, dpi=genome.dpi)
                except AppException as e:
                    warnings.append(f"{e.code}: reference boxes ignored: {e}")
            genome.quality = quality_service.grade(genome.all_boxes, refs, warnings)
        else:
            genome.quality = QualityReport(n_boxes=0)

    genome.warnings = warnings
    logger.info(f"Service: {doc_id} done: status={genome.status.value}, {len(genome.units)} units, "
                f"{len(genome.relations)} relations, tier={genome.quality.tier.value if genome.quality.tier else '-'}")
    return PipelineRun(genome, pages, timings)


def run_pipeline(doc_path, settings: PipelineSettings, refs_path=None) -> DocumentGenome:
    """Processes one document and returns its genome; see `process_document`."""
    return process_document(doc_path, settings, refs_path).genome


def grade_genome(genome: DocumentGenome, refs_path) -> DocumentGenome:
    """Re-grades an existing genome against a reference box file (rescaled to the genome dpi)."""
    if genome.status != DocStatus.OK:
        logger.warning(f"Service: grading {genome.doc_id} with status {genome.status.value}; it has no boxes")
    refs = quality_service.load_reference_boxes(refs_path, dpi=genome.dpi)
    genome.quality = quality_service.grade(genome.all_boxes, refs, genome.warnings)
    return genome


# --- Serialization ---

def serialize_genome(genome: DocumentGenome) -> bytes:
    """Canonical UTF-8 JSON: sorted keys, fixed float precision, trailing newline."""
    text = json.dumps(genome.to_dict(), sort_keys=True, ensure_ascii=False, indent=2, allow_nan=False)
    return (text + '\n').encode('utf-8')


def validate_genome(genome: DocumentGenome) -> Dict[str, str]:
    """Referential-integrity problems of a genome, keyed by location; empty when valid."""
    problems: Dict[str, str] = {}
    boxes_per_unit: Dict[int, int] = {}
    for position, unit in enumerate(genome.units):
        if unit.unit_id in boxes_per_unit:
            problems[f"units[{position}].unit_id"] = f"duplicate unit id {unit.unit_id}"
        boxes_per_unit[unit.unit_id] = len(unit.boxes)
        for box_index, box in enumerate(unit.boxes):
            if box.page_index >= genome.page_count:
                problems[f"units[{position}].boxes[{box_index}]"] = \
                    f"page {box.page_index} outside {genome.page_count} pages"
            elif genome.page_sizes and box.page_index < len(genome.page_sizes) \
                    and not box.fits(*genome.page_sizes[box.page_index]):
                problems[f"units[{position}].boxes[{box_index}]"] = f"box exceeds page {box.page_index} size"
    for position, unit in enumerate(genome.units):
        if unit.parent_id is not None and unit.parent_id not in boxes_per_unit:
            problems[f"units[{position}].parent_id"] = f"unknown unit {unit.parent_id}"

    for position, relation in enumerate(genome.relations):
        for end, unit_id, part in (('from', relation.from_unit, relation.from_part),
                                   ('to', relation.to_unit, relation.to_part)):
            if unit_id not in boxes_per_unit:
                problems[f"relations[{position}].{end}_unit"] = f"unknown unit {unit_id}"
            elif relation.kind == RelationKind.IDENTICAL:
                if part is None or not 0 <= part < boxes_per_unit[unit_id]:
                    problems[f"relations[{position}].{end}_part"] = f"part {part} outside unit {unit_id} boxes"
            elif part is not None:
                problems[f"relations[{position}].{end}_part"] = f"{relation.kind.value} relations carry no parts"
    return problems


def deserialize_genome(data: bytes) -> DocumentGenome:
    """
    Parses and validates a serialized genome.

    Raises:
        SchemaViolation: On malformed JSON, a wrong schema version, missing
                         or mistyped fields, or dangling references.
    """
    try:
        raw = json.loads(data.decode('utf-8') if isinstance(data, (bytes, bytearray)) else data)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaViolation(message=f"Genome is not valid UTF-8 JSON: {e}", original_exception=e)
    if not isinstance(raw, dict):
        raise SchemaViolation(message="Genome must be a JSON object")
    if raw.get('schema_version') != GENOME_SCHEMA_VERSION:
        raise SchemaViolation(message=f"Unsupported genome schema version {raw.get('schema_version')!r}",
                              errors={'schema_version': f"expected {GENOME_SCHEMA_VERSION}"})
    try:
        genome = DocumentGenome.from_dict(raw)
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise SchemaViolation(message=f"Genome does not match the schema: {e!r}", original_exception=e)

    problems = validate_genome(genome)
    if problems:
        raise SchemaViolation(message=f"Genome {genome.doc_id} has {len(problems)} integrity problem(s)", errors=problems)
    return genome


def read_genome(path) -> DocumentGenome:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise SourceIOError(message=f"Cannot read genome {path}: {e}", original_exception=e)
    return deserialize_genome(data)


def genome_file_name(doc_id: str) -> str:
    return f"{doc_id}{GENOME_SUFFIX}"


def write_genome(genome: DocumentGenome, out_dir) -> Path:
    """Atomically writes `<out_dir>/<doc_id>.genome.json`."""
    path = atomic_write_bytes(Path(out_dir) / genome_file_name(genome.doc_id), serialize_genome(genome))
    logger.debug(f"Service: wrote {path}")
    return path


def write_pages(pages: Sequence[PageImage], out_dir) -> List[Path]:
    """Writes page images as `page_000.png`, `page_001.png`, ..."""
    paths = []
    for page in pages:
        buffer = io.BytesIO()
        Image.fromarray(page.pixels).save(buffer, format='PNG', dpi=(page.dpi, page.dpi))
        paths.append(atomic_write_bytes(Path(out_dir) / f"page_{page.page_index:03d}.png", buffer.getvalue()))
    return paths


def load_genomes(genome_dir) -> List[DocumentGenome]:
    """Every `*.genome.json` under a directory, sorted by file name."""
    genome_dir = Path(genome_dir)
    if not genome_dir.is_dir():
        raise SourceIOError(message=f"Genome directory not found: {genome_dir}")
    return [read_genome(path) for path in sorted(genome_dir.glob(f"*{GENOME_SUFFIX}"))]
