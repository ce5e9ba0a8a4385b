# texlayout/services/ingest_service.py

import io
import os
import gzip
import json
import zlib
import shutil
import tarfile
import posixpath
import tempfile
from pathlib import Path
from dataclasses import dataclass
from typing import Dict, List, Optional

from PIL import Image                                                                  # Placeholder PNGs

from texlayout.logger import get_logger                                                # Custom application logger
from texlayout.models.source import SourceTree, is_safe_relative_path, file_extension  # Source types
from texlayout.services import tex_scanner                                             # Lexical helpers
from texlayout.services.exceptions import (                                            # Custom exceptions
    SourceIOError, MalformedArchive, EmptySource, NoMainFile, ConversionFailed
)
from texlayout.settings import PipelineSettings
from texlayout.utils import (
    decode_tex_bytes, tex_encoding, sha256_hex, atomic_write_bytes, expand_command_template, run_external, tail_lines
)

logger = get_logger(__name__) # Logger instance for this module

_DOCUMENT_CLASS_COMMANDS = ('documentclass', 'documentstyle')

RASTER_FIGURE_EXTENSIONS = ('png', 'pdf', 'jpg', 'jpeg', 'eps', 'ps')

# Cap on a single gzipped .tex once decompressed.
MAX_GZIP_SOURCE_BYTES = 64 * 1024 * 1024


def _placeholder_png() -> bytes:
    buffer = io.BytesIO()
    Image.new('L', (1, 1), color=255).save(buffer, format='PNG')
    return buffer.getvalue()


def _clean_member_name(name: str) -> str:
    while name.startswith('./'):
        name = name[2:]
    return name


def _read_readme_hint(files: Dict[str, bytes]) -> Optional[str]:
    """
    arXiv bundles may carry a 00README.json (or the older 00README.XXX)
    naming the top-level file.
    """
    if '00README.json' in files:
        try:
            readme = json.loads(files['00README.json'].decode('utf-8'))
            for source in readme.get('sources', []):
                if source.get('usage') == 'toplevel' and source.get('filename') in files:
                    return source['filename']
        except (ValueError, AttributeError) as e:
            logger.debug(f"Service: ignoring unreadable 00README.json: {e}")
    for name in ('00README.XXX', '00README'):
        if name in files:
            for line in decode_tex_bytes(files[name]).splitlines():
                parts = line.split()
                if len(parts) >= 2 and parts[1] == 'toplevelfile' and parts[0] in files:
                    return parts[0]
    return None


def _load_directory(root: Path, warnings: List[str]) -> Dict[str, bytes]:
    files = {}
    for directory, subdirectories, filenames in os.walk(root):
        subdirectories.sort()
        for filename in sorted(filenames):
            full_path = Path(directory) / filename
            if full_path.is_symlink():
                warnings.append(f"UnsafePath: skipped symbolic link {full_path.relative_to(root).as_posix()}")
                continue
            relative = full_path.relative_to(root).as_posix()
            try:
                files[relative] = full_path.read_bytes()
            except OSError as e:
                raise SourceIOError(
                    message=f"Could not read '{relative}' in {root}",
                    log_message=f"Service: read failed for {full_path}: {e}",
                    original_exception=e,
                ) from e
    return files


def _load_tar(archive_path: Path, warnings: List[str]) -> Dict[str, bytes]:
    files = {}
    with tarfile.open(archive_path, mode='r:*') as archive:
        for member in archive:
            if not member.isfile():
                continue
            name = _clean_member_name(member.name)
            if not is_safe_relative_path(name):
                warnings.append(f"UnsafePath: skipped archive member '{member.name}'")
                logger.warning(f"Service: skipping unsafe archive member '{member.name}' in {archive_path}")
                continue
            extracted = archive.extractfile(member)
            if extracted is None:
                continue
            files[posixpath.normpath(name)] = extracted.read()
    return files


def ingest_archive(path) -> SourceTree:
    """
    Loads a LaTeX source tree from a directory, a (gzipped) tarball, a
    gzipped single .tex file or a bare .tex file.

    Args:
        path (str | Path): The source location.

    Returns:
        SourceTree: Every regular file, with figures identified by extension.

    Raises:
        SourceIOError: If the path is missing or unreadable.
        MalformedArchive: If the tar/gzip container is corrupt.
        EmptySource: If no .tex file is present.
    """
    source_path = Path(path)
    logger.debug(f"Service: ingest_archive called for '{source_path}'")
    if not source_path.exists():
        raise SourceIOError(message=f"Source path does not exist: {source_path}")

    warnings: List[str] = []
    if source_path.is_dir():
        files = _load_directory(source_path, warnings)
    else:
        files = _load_archive_file(source_path, warnings)

    tree = SourceTree(files=files, root_hint=_read_readme_hint(files), warnings=warnings)
    if not tree.tex_files:
        raise EmptySource(message=f"No .tex file found in {source_path}")

    for warning in warnings:
        logger.warning(f"Service: {warning}")
    logger.info(f"Service: ingested {len(tree.files)} files ({len(tree.figures)} figures) from '{source_path}'")
    return tree


def _load_archive_file(source_path: Path, warnings: List[str]) -> Dict[str, bytes]:
    try:
        raw = source_path.read_bytes()
    except OSError as e:
        raise SourceIOError(message=f"Could not read {source_path}", original_exception=e) from e

    if file_extension(source_path.name) == 'tex':
        return {source_path.name: raw}

    try:
        if tarfile.is_tarfile(source_path):
            return _load_tar(source_path, warnings)
    except (tarfile.TarError, EOFError, zlib.error, OSError) as e:
        raise MalformedArchive(
            message=f"Corrupt archive: {source_path}",
            log_message=f"Service: tar read failed for {source_path}: {e}",
            original_exception=e,
        ) from e

    # arXiv serves single-file submissions as plain gzip of the .tex
    try:
        with gzip.GzipFile(fileobj=io.BytesIO(raw)) as stream:
            content = stream.read(MAX_GZIP_SOURCE_BYTES + 1)
    except (OSError, EOFError, zlib.error) as e:
        raise MalformedArchive(
            message=f"Not a directory, tar archive or gzip file: {source_path}",
            original_exception=e,
        ) from e
    if len(content) > MAX_GZIP_SOURCE_BYTES:
        raise MalformedArchive(
            message=f"{source_path} expands beyond {MAX_GZIP_SOURCE_BYTES} bytes",
            errors={'size': f"> {MAX_GZIP_SOURCE_BYTES}"},
        )
    logger.debug(f"Service: {source_path} is a gzipped single file; storing it as main.tex")
    return {'main.tex': content}


@dataclass(frozen=True)
class MainFileSelection:
    """The chosen main file and how it was chosen."""
    path: str
    ambiguous: bool = False
    candidates: tuple = ()

    def __str__(self) -> str:
        return self.path


def _declares_document_class(text: str) -> bool:
    protected = tex_scanner.scan_regions(text).protected
    return next(tex_scanner.iter_command_names(text, _DOCUMENT_CLASS_COMMANDS, protected), None) is not None


def _has_document_begin(text: str) -> bool:
    protected = tex_scanner.RangeSet(tex_scanner.scan_regions(text).protected)
    return any(token.kind == 'begin' and token.name == 'document'
               for token in tex_scanner.environment_tokens(text, protected=protected))


def detect_main_file(tree: SourceTree) -> MainFileSelection:
    """
    Picks the file carrying the document-class declaration. With several
    candidates the tree's root hint wins, then a candidate containing
    \\begin{document}, then the lexicographically smallest path.

    Raises:
        NoMainFile: If no file declares a document class.
    """
    texts = {path: decode_tex_bytes(tree.files[path]) for path in tree.tex_files}
    candidates = sorted(path for path, text in texts.items() if _declares_document_class(text))
    if not candidates:
        raise NoMainFile(message=f"None of {len(texts)} .tex files declares a document class")

    if len(candidates) == 1:
        return MainFileSelection(candidates[0], False, tuple(candidates))

    if tree.root_hint in candidates:
        logger.debug(f"Service: main file '{tree.root_hint}' chosen from the bundle's README hint")
        return MainFileSelection(tree.root_hint, False, tuple(candidates))

    with_body = [path for path in candidates if _has_document_begin(texts[path])]
    chosen = (with_body or candidates)[0]
    logger.warning(f"Service: {len(candidates)} main-file candidates {candidates}; chose '{chosen}'")
    return MainFileSelection(chosen, True, tuple(candidates))


# --- Figure normalization ---

def _graphics_prefixes(texts: Dict[str, str]) -> List[str]:
    prefixes = ['']
    for text in texts.values():
        protected = tex_scanner.scan_regions(text).protected
        for call in tex_scanner.find_commands(text, ['graphicspath'], arity=1, max_optional=0, protected=protected):
            body_start, body_end = call.args[0]
            position = tex_scanner.skip_spaces(text, body_start)
            while position < body_end and text[position] == '{':
                closing = tex_scanner.match_group(text, position)
                if closing is None or closing > body_end:
                    break
                prefixes.append(text[position + 1:closing - 1])
                position = tex_scanner.skip_spaces(text, closing)
    return prefixes


def _resolve_graphic(argument: str, base_dirs: List[str], prefixes: List[str], files: Dict[str, bytes]) -> Optional[str]:
    argument = argument.strip().strip('"')
    has_extension = file_extension(argument) in RASTER_FIGURE_EXTENSIONS
    for base_dir in base_dirs:
        for prefix in prefixes:
            candidate = posixpath.normpath(posixpath.join(base_dir, prefix, argument))
            if has_extension:
                if candidate in files:
                    return candidate
                continue
            for extension in RASTER_FIGURE_EXTENSIONS:
                if f"{candidate}.{extension}" in files:
                    return f"{candidate}.{extension}"
    return None


def _png_name(path: str) -> str:
    return posixpath.splitext(path)[0] + '.png'


def convert_figure(data: bytes, extension: str, settings: PipelineSettings) -> bytes:
    """
    Converts one graphic to PNG through the external converter contract,
    caching results by content hash.

    Raises:
        ConversionFailed: If the converter fails, times out or writes nothing.
    """
    cache_file = settings.compile_cache_dir / 'figures' / f"{sha256_hex(data)}.{extension}.png"
    if cache_file.exists():
        return cache_file.read_bytes()

    scratch_root = Path(settings.scratch_root)
    scratch_root.mkdir(parents=True, exist_ok=True)
    workdir = Path(tempfile.mkdtemp(prefix='texlayout-figure-', dir=scratch_root))
    try:
        input_file = workdir / f"input.{extension}"
        output_file = workdir / "output.png"
        input_file.write_bytes(data)
        argv = expand_command_template(settings.figure_template, settings.figure_converter,
                                       in_=input_file, out=output_file)
        result = run_external(argv, workdir, settings.figure_timeout)
        if result.timed_out:
            raise ConversionFailed(message=f"converter timed out after {settings.figure_timeout}s")
        if not result.ok:
            raise ConversionFailed(message=f"converter exited with {result.returncode}: {tail_lines(result.output, 3)}")
        if not output_file.exists():
            # multi-page inputs come out as output-0.png, output-1.png, ...
            first_page = workdir / "output-0.png"
            if not first_page.exists():
                raise ConversionFailed(message="converter produced no PNG")
            output_file = first_page
        png = output_file.read_bytes()
        atomic_write_bytes(cache_file, png)
        return png
    finally:
        if not settings.keep_scratch:
            shutil.rmtree(workdir, ignore_errors=True)


def normalize_figures(tree: SourceTree, settings: PipelineSettings) -> SourceTree:
    """
    Converts every non-PNG graphic to PNG and rewrites the \\includegraphics
    arguments that point at it. A failed conversion substitutes a 1x1 white
    PNG and adds a ConversionFailed warning, so compilation still succeeds.

    Args:
        tree (SourceTree): Ingested tree.
        settings (PipelineSettings): Converter command, template and timeout.

    Returns:
        SourceTree: A new tree; the input is unchanged.
    """
    to_convert = [path for path in tree.figures if file_extension(path) != 'png']
    if not to_convert:
        logger.debug("Service: normalize_figures found only PNG assets")
        return tree

    files = dict(tree.files)
    warnings: List[str] = []
    renamed: Dict[str, str] = {}
    for path in to_convert:
        new_path = _png_name(path)
        if new_path in tree.files and new_path not in to_convert:
            # a PNG rendition already ships with the source
            renamed[path] = new_path
            del files[path]
            continue
        try:
            files[new_path] = convert_figure(tree.files[path], file_extension(path), settings)
        except ConversionFailed as e:
            warnings.append(f"ConversionFailed: {path}: {e.user_facing_message}")
            logger.warning(f"Service: figure conversion failed for '{path}': {e.user_facing_message}")
            files[new_path] = _placeholder_png()
        del files[path]
        renamed[path] = new_path

    texts = {path: decode_tex_bytes(tree.files[path]) for path in tree.tex_files}
    prefixes = _graphics_prefixes(texts)
    for tex_path, text in texts.items():
        edits = []
        for call in tex_scanner.find_commands(text, ['includegraphics'], arity=1,
                                              protected=tex_scanner.scan_regions(text).protected):
            start, end = call.args[0]
            base_dirs = [posixpath.dirname(tex_path), '']
            if tree.root_hint:
                base_dirs.insert(0, posixpath.dirname(tree.root_hint))
            resolved = _resolve_graphic(text[start:end], base_dirs, prefixes, tree.files)
            if resolved in renamed:
                argument = text[start:end].strip()
                stem = posixpath.splitext(argument)[0] if file_extension(argument) in RASTER_FIGURE_EXTENSIONS else argument
                edits.append((start, end, f"{stem}.png"))
        if edits:
            for start, end, replacement in sorted(edits, reverse=True):
                text = text[:start] + replacement + text[end:]
            files[tex_path] = text.encode(tex_encoding(tree.files[tex_path]))

    logger.info(f"Service: normalized {len(renamed)} figures ({len(warnings)} conversion failures)")
    return tree.with_files(files, warnings)
