# texlayout/services/render_service.py

import shutil
import contextvars
import tempfile
import threading
from pathlib import Path
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor                               # Bounded pool for variant compiles
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import fitz                                                                     # PyMuPDF, PDF rasterization
import numpy as np
from PIL import Image                                                           # Reading command-rasterizer output

from texlayout.logger import get_logger                                         # Custom application logger
from texlayout.models.page import PageImage, RenderStatus, UnitRender
from texlayout.models.source import FlatSource, SourceTree, TextEdit
from texlayout.models.unit import Relation, UnitDraft
from texlayout.services import tex_scanner                                      # Lexical helpers
from texlayout.services.bbox_service import diff_extract_boxes, unify_unit_boxes
from texlayout.services.segment_service import FLOAT_ENVIRONMENTS, document_body
from texlayout.services.exceptions import (                                     # Custom exceptions for error handling
    CompileFailure, EmptyDiff, PageMismatch, RasterFailure, RenderError, WrapFailure
)
from texlayout.settings import PipelineSettings
from texlayout.utils import (
    atomic_write_bytes, digest_files, expand_command_template, run_external, sha256_hex, tail_lines, tex_encoding
)

logger = get_logger(__name__) # Logger instance for this module

VARIANT_MARKER = "% texlayout isolation variant: target={target}\n"
DETERMINISTIC_ENV = {'SOURCE_DATE_EPOCH': '0', 'FORCE_SOURCE_DATE': '1'}

BLACK = 'black'
WHITE = 'white'

# Floats reset the colour to \normalcolor, so their switch goes inside the body.
# Values are the mandatory arguments following \begin{name}.
_INNER_SWITCH_FLOATS = {name: 0 for name in FLOAT_ENVIRONMENTS - {'longtable'}}
_INNER_SWITCH_FLOATS.update({'wrapfigure': 2, 'wraptable': 2})

# Relative order of zero-width insertions sharing one offset.
_CLOSE_PHANTOM, _RESET, _SWITCH, _OPEN_PHANTOM = range(4)

# PyMuPDF documents must not be used from several threads at once.
_FITZ_LOCK = threading.Lock()


def _switch(colour: str) -> str:
    return f"\\color{{{colour}}}"


def _float_body_offset(text: str, unit: UnitDraft) -> int:
    """Offset just after `\\begin{float}` and its own arguments."""
    begin = tex_scanner.begin_at(text, unit.start)
    position = begin.end
    mandatory = _INNER_SWITCH_FLOATS.get(unit.env_name, 0)
    while True:
        cursor = tex_scanner.skip_spaces(text, position, allow_newline=False)
        if cursor < len(text) and text[cursor] == '[':
            closing = tex_scanner.match_group(text, cursor, '[', ']')
        elif cursor < len(text) and text[cursor] == '{' and mandatory > 0:
            closing = tex_scanner.match_group(text, cursor)
            mandatory -= 1
        else:
            return position
        if closing is None:
            return position
        position = closing


def _footnote_edit(text: str, unit: UnitDraft, colour: str) -> Optional[TextEdit]:
    """`\\footnote[n]{` -> `\\footnotemark[n]\\footnotetext[n]{\\color{c}`."""
    try:
        call = tex_scanner.parse_command(text, unit.start, 'footnote', arity=1, max_optional=1, star=False)
    except tex_scanner.UnbalancedArgument:
        return None
    option = f"[{text[call.optional[0][0]:call.optional[0][1]]}]" if call.optional else ""
    body_start = call.args[0][0]
    return TextEdit(unit.start, body_start, f"\\footnotemark{option}\\footnotetext{option}{{{_switch(colour)}")


def _title_edit(text: str, unit: UnitDraft, colour: str) -> Optional[TextEdit]:
    name = next((word for word in ('icmltitle', 'title') if text.startswith('\\' + word, unit.start)), 'title')
    try:
        call = tex_scanner.parse_command(text, unit.start, name, arity=1, max_optional=1)
    except tex_scanner.UnbalancedArgument:
        return None
    return TextEdit(call.args[0][0], call.args[0][0], _switch(colour))


def _colour_source(src: FlatSource, units: Sequence[UnitDraft], colour_of: Callable[[UnitDraft], str],
                   base_colour: str, real_graphic: Callable[[int], bool], marker: str) -> FlatSource:
    """
    Inserts the colour switches and graphic phantoms shared by every render
    of a document. Only the colour names and the phantom choice vary between
    renders, so all of them paginate identically.
    """
    text = src.text
    document, _ = document_body(src)
    by_id = {unit.draft_id: unit for unit in units}
    insertions: List[Tuple[int, int, int, str]] = [(0, -1, 0, marker), (document.body_start, _SWITCH, 0, _switch(base_colour))]
    replacements: List[TextEdit] = []

    for sequence, unit in enumerate(units, start=1):
        colour = colour_of(unit)
        if unit.env_kind == 'paper-title':
            edit = _title_edit(text, unit, colour)
            if edit:
                insertions.append((edit.start, _SWITCH, sequence, edit.text))
        elif unit.env_kind == 'footnote':
            edit = _footnote_edit(text, unit, colour)
            if edit:
                replacements.append(edit)
        elif unit.env_kind == 'caption' and unit.parent_id is not None:
            insertions.append((unit.start, _SWITCH, sequence, _switch(colour)))
            insertions.append((unit.end, _RESET, -sequence, _switch(colour_of(by_id[unit.parent_id]))))
        elif unit.env_name in _INNER_SWITCH_FLOATS:
            insertions.append((_float_body_offset(text, unit), _SWITCH, sequence, _switch(colour)))
        else:
            insertions.append((unit.start, _SWITCH, sequence, _switch(colour)))
            insertions.append((unit.end, _RESET, -sequence, _switch(base_colour)))

    protected = tex_scanner.scan_regions(text).protected
    for call in tex_scanner.find_commands(text, ['includegraphics'], arity=1, max_optional=2, protected=protected):
        if real_graphic(call.start):
            continue
        insertions.append((call.start, _OPEN_PHANTOM, 0, "\\phantom{"))
        insertions.append((call.end, _CLOSE_PHANTOM, 0, "}"))

    insertions.sort(key=lambda item: (item[0], item[1], item[2]))
    edits = [TextEdit(offset, offset, inserted) for offset, _, _, inserted in insertions] + replacements
    return src.apply_edits(edits)


def _unit_by_id(units: Sequence[UnitDraft], target: int) -> UnitDraft:
    for unit in units:
        if unit.draft_id == target:
            return unit
    raise ValueError(f"Unit {target} is not part of the document")


def build_isolation_variant(src: FlatSource, units: Sequence[UnitDraft], target: int) -> FlatSource:
    """
    Source in which only unit `target` renders in black. Every other unit and
    all text outside units is white; graphics outside the target become
    \\phantom boxes of the same size.

    Args:
        src (FlatSource): Preprocessed source.
        units (list): Every unit of the document.
        target (int): Id of the unit to isolate.

    Returns:
        FlatSource: The variant source.
    """
    unit = _unit_by_id(units, target)
    return _colour_source(
        src, units,
        colour_of=lambda candidate: BLACK if candidate.draft_id == target else WHITE,
        base_colour=WHITE,
        real_graphic=lambda position: unit.start <= position < unit.end,
        marker=VARIANT_MARKER.format(target=target),
    )


def build_blank_baseline(src: FlatSource, units: Sequence[UnitDraft]) -> FlatSource:
    """Every unit white and every graphic a phantom, with the variants' switch layout."""
    return _colour_source(src, units, lambda unit: WHITE, WHITE, lambda position: False,
                          VARIANT_MARKER.format(target='none'))


def build_full_variant(src: FlatSource, units: Sequence[UnitDraft]) -> FlatSource:
    """Every unit black with real graphics; used for the page images written with --pages."""
    return _colour_source(src, units, lambda unit: BLACK, BLACK, lambda position: True,
                          VARIANT_MARKER.format(target='all'))


def _stage_tree(tree: Optional[SourceTree], src: FlatSource, workdir: Path, main_file: str) -> Path:
    """Writes the support files and the flattened main file; returns the main file path."""
    main_path = workdir / main_file
    encoding = 'utf-8'
    if tree is not None:
        for relative, content in tree.files.items():
            if relative == main_file:
                encoding = tex_encoding(content)
                continue
            destination = workdir / relative
            destination.parent.mkdir(parents=True, exist_ok=True)
            destination.write_bytes(content)
    main_path.parent.mkdir(parents=True, exist_ok=True)
    main_path.write_bytes(src.text.encode(encoding, errors='replace'))
    return main_path


def _compile_key(src: FlatSource, tree: Optional[SourceTree], main_file: str, settings: PipelineSettings,
                 passes: int, aux_seed: Optional[bytes]) -> str:
    support = digest_files((path, content) for path, content in (tree.files.items() if tree else ()) if path != main_file)
    parts = [
        src.text, support, main_file, settings.latex_engine, settings.latex_template, str(passes),
        sha256_hex(aux_seed) if aux_seed is not None else '-',
    ]
    return sha256_hex('\0'.join(parts).encode('utf-8', errors='surrogatepass'))


def compile_pdf(src: FlatSource, workdir, settings: PipelineSettings, tree: Optional[SourceTree] = None,
                main_file: str = 'main.tex', passes: Optional[int] = None,
                aux_seed: Optional[bytes] = None) -> Path:
    """
    Compiles a source with the configured LaTeX engine in `workdir`.

    Results are cached by content hash (source, support files, engine
    command, pass count and seeded .aux), so an unchanged variant is never
    compiled twice.

    Args:
        src (FlatSource): Source to compile; written as `main_file`.
        workdir (str | Path): Scratch directory owned by this compile.
        settings (PipelineSettings): Engine, template, timeout and cache location.
        tree (SourceTree, optional): Support files (figures, styles, .bbl) to stage.
        main_file (str): Relative path of the main file inside the tree.
        passes (int, optional): Engine runs; defaults to settings.latex_passes.
        aux_seed (bytes, optional): A .aux file to start from, e.g. the baseline's.

    Returns:
        Path: The produced PDF inside `workdir`.

    Raises:
        CompileFailure: Non-zero exit, timeout, missing engine, or no PDF.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    passes = passes or settings.latex_passes
    main_path = _stage_tree(tree, src, workdir, main_file)
    pdf_path = main_path.with_suffix('.pdf')
    aux_path = main_path.with_suffix('.aux')

    key = _compile_key(src, tree, main_file, settings, passes, aux_seed)
    cache_dir = settings.compile_cache_dir / 'pdf'
    cached_pdf, cached_aux = cache_dir / f"{key}.pdf", cache_dir / f"{key}.aux"
    if cached_pdf.is_file():
        logger.debug(f"Service: compile cache hit {key[:12]} for {main_file}")
        shutil.copyfile(cached_pdf, pdf_path)
        if cached_aux.is_file():
            shutil.copyfile(cached_aux, aux_path)
        return pdf_path

    if aux_seed is not None:
        aux_path.write_bytes(aux_seed)

    argv = expand_command_template(settings.latex_template, settings.latex_engine, main=main_path.name)
    for run in range(1, passes + 1):
        result = run_external(argv, cwd=main_path.parent, timeout=settings.latex_timeout, env=DETERMINISTIC_ENV)
        log_file = main_path.with_suffix('.log')
        log_tail = tail_lines(log_file.read_text(errors='replace') if log_file.is_file() else result.output)
        if result.missing_binary:
            raise CompileFailure(message=f"LaTeX engine '{settings.latex_engine}' could not be started",
                                 cause='missing-engine', log_tail=result.output)
        if result.timed_out:
            raise CompileFailure(message=f"LaTeX engine timed out after {settings.latex_timeout:g}s (pass {run})",
                                 cause='timeout', log_tail=log_tail)
        if not result.ok:
            raise CompileFailure(message=f"LaTeX engine exited with status {result.returncode} (pass {run})",
                                 cause='exit', log_tail=log_tail, log_message=log_tail)

    if not pdf_path.is_file():
        raise CompileFailure(message="LaTeX engine finished without producing a PDF", cause='no-pdf')

    atomic_write_bytes(cached_pdf, pdf_path.read_bytes())
    if aux_path.is_file():
        atomic_write_bytes(cached_aux, aux_path.read_bytes())
    logger.debug(f"Service: compiled {main_file} in {passes} pass(es), cached as {key[:12]}")
    return pdf_path


def _rasterize_pymupdf(pdf: Path, dpi: int) -> List[PageImage]:
    try:
        with _FITZ_LOCK, fitz.open(pdf) as document:
            pages = []
            for index, page in enumerate(document):
                pix = page.get_pixmap(dpi=dpi, colorspace=fitz.csGRAY, alpha=False)
                grid = np.frombuffer(pix.samples, dtype=np.uint8).reshape(pix.height, pix.stride)[:, :pix.width]
                pages.append(PageImage(index, dpi, grid.copy()))
            return pages
    except Exception as e:
        logger.error(f"Service: PyMuPDF failed on {pdf}: {e}", exc_info=True)
        raise RasterFailure(message=f"Could not rasterize {pdf.name}: {e}", original_exception=e)


def _page_number(path: Path) -> Tuple[int, str]:
    digits = ''.join(ch for ch in path.stem.rsplit('-', 1)[-1] if ch.isdigit())
    return (int(digits) if digits else 0, path.name)


def _rasterize_command(pdf: Path, dpi: int, settings: PipelineSettings) -> List[PageImage]:
    with tempfile.TemporaryDirectory(prefix='texlayout-raster-', dir=settings.scratch_root) as out_dir:
        argv = expand_command_template(settings.rasterizer, '', pdf=pdf, dpi=dpi, out=Path(out_dir) / 'page')
        result = run_external(argv, cwd=out_dir, timeout=settings.latex_timeout)
        if not result.ok:
            raise RasterFailure(message=f"Rasterizer command failed: {tail_lines(result.output, 5)}")
        images = sorted((path for path in Path(out_dir).iterdir() if path.suffix.lower() in ('.png', '.pgm', '.ppm')),
                        key=_page_number)
        pages = []
        for index, path in enumerate(images):
            with Image.open(path) as image:
                pages.append(PageImage(index, dpi, np.asarray(image.convert('L'), dtype=np.uint8)))
        return pages


def rasterize(pdf, dpi: int, settings: Optional[PipelineSettings] = None) -> List[PageImage]:
    """
    One grayscale PageImage per PDF page, in page order.

    Raises:
        RasterFailure: If the PDF is unreadable or has no pages.
    """
    settings = settings or PipelineSettings()
    pdf = Path(pdf)
    if not pdf.is_file():
        raise RasterFailure(message=f"PDF not found: {pdf}")
    if settings.rasterizer == 'pymupdf':
        pages = _rasterize_pymupdf(pdf, dpi)
    else:
        pages = _rasterize_command(pdf, dpi, settings)
    if not pages:
        raise RasterFailure(message=f"{pdf.name} has no pages")
    logger.debug(f"Service: rasterized {len(pages)} pages of {pdf.name} at {dpi} dpi")
    return pages


@dataclass
class DocumentRender:
    """Render result for one document."""
    page_count: int
    page_sizes: List[List[int]] = field(default_factory=list)
    units: Dict[int, UnitRender] = field(default_factory=dict)
    relations: List[Relation] = field(default_factory=list)
    pages: List[PageImage] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


class _Renderer:
    """Shared state of one document's render: scratch dir, baseline and settings."""

    def __init__(self, src: FlatSource, units: Sequence[UnitDraft], tree: Optional[SourceTree],
                 main_file: str, settings: PipelineSettings, scratch: Path):
        self.src = src
        self.units = list(units)
        self.tree = tree
        self.main_file = main_file
        self.settings = settings
        self.scratch = scratch
        self.baseline_pages: List[PageImage] = []
        self.aux_seed: Optional[bytes] = None

    def render_baseline(self) -> None:
        baseline = build_blank_baseline(self.src, self.units)
        pdf = compile_pdf(baseline, self.scratch / 'baseline', self.settings, self.tree, self.main_file)
        aux = pdf.with_suffix('.aux')
        self.aux_seed = aux.read_bytes() if aux.is_file() else None
        self.baseline_pages = rasterize(pdf, self.settings.raster_dpi, self.settings)

    def render_unit(self, unit: UnitDraft) -> Tuple[UnitRender, List[Relation]]:
        variant = build_isolation_variant(self.src, self.units, unit.draft_id)
        try:
            pdf = compile_pdf(variant, self.scratch / f"unit-{unit.draft_id:05d}", self.settings, self.tree,
                              self.main_file, passes=1, aux_seed=self.aux_seed)
        except CompileFailure as e:
            raise WrapFailure(message=f"Variant for unit {unit.draft_id} did not compile: {e}",
                              log_message=e.log_tail, original_exception=e)
        pages = rasterize(pdf, self.settings.raster_dpi, self.settings)
        boxes = diff_extract_boxes(pages, self.baseline_pages, self.settings.diff_threshold,
                                   self.settings.column_gap_ratio)
        unit_boxes, relations = unify_unit_boxes(unit.draft_id, boxes)
        return UnitRender(unit.draft_id, RenderStatus.OK, unit_boxes), relations

    def render_full(self) -> List[PageImage]:
        full = build_full_variant(self.src, self.units)
        pdf = compile_pdf(full, self.scratch / 'full', self.settings, self.tree, self.main_file,
                          passes=1, aux_seed=self.aux_seed)
        return rasterize(pdf, self.settings.raster_dpi, self.settings)


def render_document(src: FlatSource, units: Sequence[UnitDraft], settings: PipelineSettings,
                    tree: Optional[SourceTree] = None, main_file: str = 'main.tex',
                    full_render: bool = False) -> DocumentRender:
    """
    Renders the shared baseline, then one isolation variant per unit on a
    bounded worker pool, diffing each against the baseline.

    Per-unit failures (WrapFailure, RasterFailure, EmptyDiff) mark only that
    unit render_failed and add a warning.

    Args:
        src (FlatSource): Preprocessed source.
        units (list): All units, children included.
        settings (PipelineSettings): Render settings.
        tree (SourceTree, optional): Support files staged next to the main file.
        main_file (str): Relative path of the main file.
        full_render (bool): Also rasterize the all-black render into `pages`.

    Returns:
        DocumentRender: Per-unit outcomes, Identical relations and page count.

    Raises:
        CompileFailure: If the baseline does not compile.
        RasterFailure: If the baseline cannot be rasterized.
        PageMismatch: If any variant paginates differently from the baseline.
    """
    Path(settings.scratch_root).mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix='texlayout-', dir=settings.scratch_root))
    renderer = _Renderer(src, units, tree, main_file, settings, scratch)
    try:
        renderer.render_baseline()
        result = DocumentRender(page_count=len(renderer.baseline_pages),
                                page_sizes=[[page.width, page.height] for page in renderer.baseline_pages])
        logger.info(f"Service: baseline rendered, {result.page_count} pages; rendering {len(units)} variants "
                    f"with {settings.render_workers} workers")

        with ThreadPoolExecutor(max_workers=settings.render_workers, thread_name_prefix='texlayout-render') as pool:
            # copied contexts keep the document tag on worker log lines
            futures = [(unit, pool.submit(contextvars.copy_context().run, renderer.render_unit, unit)) for unit in units]
            for unit, future in futures:
                try:
                    unit_render, relations = future.result()
                except PageMismatch:
                    raise
                except (WrapFailure, RasterFailure, EmptyDiff) as e:
                    message = f"{e.code}: unit {unit.draft_id}: {e}"
                    logger.warning(f"Service: {message}")
                    result.warnings.append(message)
                    result.units[unit.draft_id] = UnitRender(unit.draft_id, RenderStatus.RENDER_FAILED, error=message)
                    continue
                except Exception as e:
                    message = f"WrapFailure: unit {unit.draft_id}: unexpected error: {e}"
                    logger.error(f"Service: {message}", exc_info=True)
                    result.warnings.append(message)
                    result.units[unit.draft_id] = UnitRender(unit.draft_id, RenderStatus.RENDER_FAILED, error=message)
                    continue
                result.units[unit.draft_id] = unit_render
                result.relations.extend(relations)

        if full_render:
            try:
                result.pages = renderer.render_full()
            except RenderError as e:
                message = f"{e.code}: full-ink render failed: {e}"
                logger.warning(f"Service: {message}")
                result.warnings.append(message)

        rendered = sum(1 for unit_render in result.units.values() if unit_render.status == RenderStatus.OK)
        logger.info(f"Service: rendered {rendered}/{len(units)} units")
        return result
    finally:
        if settings.keep_scratch:
            logger.info(f"Service: scratch kept at {scratch}")
        else:
            shutil.rmtree(scratch, ignore_errors=True)
