# texlayout/services/preprocess_service.py

import posixpath
from functools import lru_cache
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from dotenv import dotenv_values                                            # Policy file format

from texlayout.logger import get_logger                                     # Custom application logger
from texlayout.models.source import FlatSource, OriginSpan, SourceTree, TextEdit
from texlayout.services import tex_scanner                                  # Lexical helpers
from texlayout.services.exceptions import ConfigError, IncludeCycle, SourceIOError
from texlayout.utils import decode_tex_bytes

logger = get_logger(__name__) # Logger instance for this module

_INCLUDE_COMMANDS = ('input', 'include')
_USEPACKAGE = ('usepackage', 'RequirePackage')
_COLOR_PACKAGES = {'xcolor', 'color'}
_HYPERREF_COLOR_KEYS = ('linkcolor', 'citecolor', 'urlcolor', 'filecolor', 'menucolor', 'runcolor', 'anchorcolor')
_FORCED_HYPERREF_OPTIONS = ['colorlinks=false'] + [f"{key}=black" for key in _HYPERREF_COLOR_KEYS] + ['pdfborder={0 0 0}']


@dataclass(frozen=True)
class NoisePolicy:
    """
    A named, versioned list of layout-only commands to delete.

    Attributes:
        policy_id (str): Identifier recorded on every FlatSource it touches.
        commands (dict): Command name -> number of mandatory brace arguments.
        verbatim_environments (tuple): Environments left untouched by comment
                                       stripping and noise removal.
    """
    policy_id: str
    commands: Tuple[Tuple[str, int], ...]
    verbatim_environments: Tuple[str, ...] = tex_scanner.DEFAULT_VERBATIM_ENVIRONMENTS

    @property
    def command_arity(self) -> Dict[str, int]:
        return dict(self.commands)


def _split_list(value: Optional[str]) -> List[str]:
    return [item.strip() for item in (value or '').split(',') if item.strip()]


@lru_cache(maxsize=16)
def load_noise_policy(path: str) -> NoisePolicy:
    """
    Reads a dotenv-format policy file with POLICY_ID, NOISE_COMMANDS and
    VERBATIM_ENVIRONMENTS keys.

    Raises:
        ConfigError: If the file is missing, has no POLICY_ID, or lists a
                     cross-reference command.
    """
    try:
        values = dotenv_values(path)
    except OSError as e:
        raise ConfigError(message=f"Noise policy file could not be read: {path}", original_exception=e) from e
    if not values.get('POLICY_ID'):
        raise ConfigError(message=f"Noise policy {path} has no POLICY_ID")

    commands = []
    for entry in _split_list(values.get('NOISE_COMMANDS')):
        name, _, arity = entry.partition(':')
        name = name.lstrip('\\')
        try:
            commands.append((name, int(arity) if arity else 1))
        except ValueError as e:
            raise ConfigError(message=f"Bad NOISE_COMMANDS entry '{entry}' in {path}", original_exception=e) from e

    protected = {'ref', 'eqref', 'autoref', 'cref', 'Cref', 'label', 'cite', 'footnote', 'caption'}
    clashes = sorted(protected.intersection(name for name, _ in commands))
    if clashes:
        raise ConfigError(message=f"Noise policy {path} must not remove {clashes}", errors={'NOISE_COMMANDS': clashes})

    verbatim = tuple(_split_list(values.get('VERBATIM_ENVIRONMENTS'))) or tex_scanner.DEFAULT_VERBATIM_ENVIRONMENTS
    policy = NoisePolicy(values['POLICY_ID'], tuple(commands), verbatim)
    logger.debug(f"Service: loaded noise policy '{policy.policy_id}' with {len(commands)} commands from {path}")
    return policy


# --- Include expansion ---

def _include_target(text: str, offset: int, name: str) -> Optional[Tuple[int, str]]:
    """Parses `\\input{x}`, `\\include{x}` or the primitive `\\input x` form."""
    position = offset + 1 + len(name)
    cursor = tex_scanner.skip_spaces(text, position, allow_newline=False)
    if cursor < len(text) and text[cursor] == '{':
        closing = tex_scanner.match_group(text, cursor)
        if closing is None:
            return None
        return closing, text[cursor + 1:closing - 1].strip()
    if name == 'input' and cursor > position:
        stop = cursor
        while stop < len(text) and not text[stop].isspace() and text[stop] not in '{}\\%':
            stop += 1
        if stop > cursor:
            return stop, text[cursor:stop]
    return None


def _resolve_include(argument: str, including_file: str, main: str, files: Dict[str, bytes]) -> Optional[str]:
    names = [argument] if argument.endswith('.tex') else [argument + '.tex', argument]
    for base in (posixpath.dirname(main), posixpath.dirname(including_file)):
        for name in names:
            candidate = posixpath.normpath(posixpath.join(base, name))
            if candidate in files:
                return candidate
    return None


def expand_inputs(tree: SourceTree, main: str) -> FlatSource:
    """
    Splices every \\input / \\include target into the main file,
    recursively, recording the provenance of each flat range. Commands inside
    comments or verbatim regions are left alone. Targets resolve relative to
    the main file's directory first, then the including file's, with `.tex`
    inferred when missing.

    Args:
        tree (SourceTree): Ingested tree.
        main (str): Relative path of the main file.

    Returns:
        FlatSource: The flattened stream; missing targets become empty
                    splices with a MissingInclude warning.

    Raises:
        SourceIOError: If main is not in the tree.
        IncludeCycle: If a file includes itself directly or indirectly.
    """
    main = str(main)
    if main not in tree.files:
        raise SourceIOError(message=f"Main file '{main}' is not part of the source tree")

    warnings: List[str] = []

    def expand(path: str, stack: List[str]) -> Tuple[str, List[OriginSpan]]:
        text = decode_tex_bytes(tree.files[path])
        protected = tex_scanner.scan_regions(text).protected
        pieces: List[str] = []
        spans: List[OriginSpan] = []
        length = 0
        cursor = 0

        def emit_local(start: int, end: int):
            nonlocal length
            if end <= start:
                return
            spans.append(OriginSpan(length, length + end - start, path,
                                    tex_scanner.line_number(text, start), tex_scanner.line_number(text, end - 1)))
            pieces.append(text[start:end])
            length += end - start

        for name, offset in tex_scanner.iter_command_names(text, _INCLUDE_COMMANDS, protected):
            if offset < cursor:
                continue
            parsed = _include_target(text, offset, name)
            if parsed is None:
                continue
            call_end, argument = parsed
            if '#' in argument:
                # macro parameter inside a definition body
                continue
            emit_local(cursor, offset)
            cursor = call_end

            target = _resolve_include(argument, path, main, tree.files)
            if target is None:
                message = f"MissingInclude: \\{name}{{{argument}}} in {path} line {tex_scanner.line_number(text, offset)}"
                warnings.append(message)
                logger.warning(f"Service: {message}")
                continue
            if target in stack:
                raise IncludeCycle(chain=stack + [target])

            child_text, child_spans = expand(target, stack + [target])
            for span in child_spans:
                spans.append(OriginSpan(span.flat_start + length, span.flat_end + length,
                                        span.file, span.line_start, span.line_end))
            pieces.append(child_text)
            length += len(child_text)

        emit_local(cursor, len(text))
        return ''.join(pieces), spans

    flat_text, origin = expand(main, [main])
    logger.info(f"Service: expanded '{main}' into {len(flat_text)} characters from {len({span.file for span in origin})} files")
    return FlatSource(text=flat_text, origin_map=tuple(origin), warnings=tuple(warnings))


# --- Comment stripping ---

def strip_comments(src: FlatSource, verbatim_environments: Sequence[str] = tex_scanner.DEFAULT_VERBATIM_ENVIRONMENTS) -> FlatSource:
    """
    Removes every unescaped `%` through end of line. The newline is kept,
    except for lines holding nothing but a comment, which disappear whole.
    Verbatim regions, `\\verb` and URL arguments are untouched.
    """
    text = src.text
    regions = tex_scanner.scan_regions(text, verbatim_environments)
    edits = []
    for start, end in regions.comments:
        line_start = text.rfind('\n', 0, start) + 1
        if text[line_start:start].strip() == '' and end < len(text):
            edits.append(TextEdit(line_start, end + 1))
        elif text[line_start:start].strip() == '' and line_start > 0:
            # last line of the text: drop the preceding newline instead
            edits.append(TextEdit(line_start - 1, end))
        else:
            edits.append(TextEdit(start, end))
    if not edits:
        return src
    logger.debug(f"Service: strip_comments removed {len(edits)} comments")
    return _apply_non_overlapping(src, edits)


def _apply_non_overlapping(src: FlatSource, edits: List[TextEdit], warnings: Sequence[str] = (),
                           noise_policy_applied: Optional[str] = None) -> FlatSource:
    kept = []
    cursor = -1
    for edit in sorted(edits, key=lambda item: (item.start, item.end)):
        if edit.start < cursor:
            continue
        kept.append(edit)
        cursor = max(cursor, edit.end)
    return src.apply_edits(kept, warnings=warnings, noise_policy_applied=noise_policy_applied)


# --- Noise tokens ---

def remove_noise_tokens(src: FlatSource, policy: NoisePolicy) -> FlatSource:
    """
    Deletes the policy's layout-only commands with their optional and
    brace-balanced arguments. A command whose argument cannot be scanned is
    left in place with an UnbalancedBraces warning. Cross-reference commands
    are never touched.

    Args:
        src (FlatSource): Comment-free source.
        policy (NoisePolicy): The policy to apply; its id is recorded.

    Returns:
        FlatSource: The cleaned source.
    """
    text = src.text
    arity = policy.command_arity
    protected = tex_scanner.scan_regions(text, policy.verbatim_environments).verbatim
    edits = []
    warnings = []
    for name, offset in tex_scanner.iter_command_names(text, arity.keys(), protected):
        try:
            call = tex_scanner.parse_command(text, offset, name, arity[name], max_optional=1)
        except tex_scanner.UnbalancedArgument as e:
            message = f"UnbalancedBraces: {e} (line {tex_scanner.line_number(text, offset)}); token kept"
            warnings.append(message)
            logger.warning(f"Service: {message}")
            continue
        edits.append(TextEdit(call.start, call.end))

    logger.debug(f"Service: remove_noise_tokens removed {len(edits)} tokens under policy '{policy.policy_id}'")
    return _apply_non_overlapping(src, edits, warnings=warnings, noise_policy_applied=policy.policy_id)


# --- hyperref ---

def _split_options(body: str) -> List[str]:
    """Splits a key=value list at top-level commas."""
    options, depth, current = [], 0, []
    for character in body:
        if character == '{':
            depth += 1
        elif character == '}':
            depth -= 1
        if character == ',' and depth == 0:
            options.append(''.join(current).strip())
            current = []
        else:
            current.append(character)
    options.append(''.join(current).strip())
    return [option for option in options if option]


def _neutral_hyperref_options(body: str) -> str:
    kept = []
    for option in _split_options(body):
        key = option.split('=', 1)[0].strip()
        if key in ('colorlinks', 'pdfborder', 'hidelinks', 'allcolors') or key.endswith('color'):
            continue
        kept.append(option)
    return ','.join(kept + _FORCED_HYPERREF_OPTIONS)


def neutralize_hyperref(src: FlatSource) -> FlatSource:
    """
    Forces hyperref to draw links without colour or borders: the package
    options and every \\hypersetup get colorlinks=false, black link colours
    and a zero pdfborder. Sources without hyperref are returned unchanged.
    """
    text = src.text
    protected = tex_scanner.scan_regions(text).verbatim
    edits = []

    for call in tex_scanner.find_commands(text, _USEPACKAGE, arity=1, protected=protected):
        packages = [package.strip() for package in call.arg_text(text).split(',')]
        if 'hyperref' not in packages:
            continue
        options = text[call.optional[0][0]:call.optional[0][1]] if call.optional else ''
        if packages == ['hyperref']:
            edits.append(TextEdit(call.start, call.end,
                                  f"\\{call.name}[{_neutral_hyperref_options(options)}]{{hyperref}}"))
        else:
            others = ','.join(package for package in packages if package != 'hyperref')
            option_text = f"[{options}]" if call.optional else ''
            edits.append(TextEdit(call.start, call.end,
                                  f"\\{call.name}{option_text}{{{others}}}"
                                  f"\\{call.name}[{_neutral_hyperref_options('')}]{{hyperref}}"))

    for call in tex_scanner.find_commands(text, ['hypersetup'], arity=1, max_optional=0, protected=protected):
        edits.append(TextEdit(call.start, call.end, f"\\hypersetup{{{_neutral_hyperref_options(call.arg_text(text))}}}"))

    if not edits:
        return src
    logger.debug(f"Service: neutralize_hyperref rewrote {len(edits)} hyperref commands")
    return _apply_non_overlapping(src, edits)


# --- Required packages ---

def integrate_packages(src: FlatSource) -> FlatSource:
    """
    Makes sure a colour package is loaded so the isolation renders can switch
    text colour: inserts `\\usepackage{xcolor}` right before
    \\begin{document} when neither xcolor nor color is loaded.
    """
    text = src.text
    protected = tex_scanner.scan_regions(text).verbatim
    for call in tex_scanner.find_commands(text, _USEPACKAGE, arity=1, protected=protected):
        if _COLOR_PACKAGES.intersection(package.strip() for package in call.arg_text(text).split(',')):
            return src
    document = tex_scanner.find_environment(text, 'document')
    if document is None:
        return src
    logger.debug("Service: integrate_packages added xcolor to the preamble")
    return src.apply_edits([TextEdit(document.start, document.start, "\\usepackage{xcolor}\n")])


def preprocess_source(tree: SourceTree, main: str, policy: NoisePolicy) -> FlatSource:
    """
    Runs the whole preprocessing chain on one document: expand, strip
    comments, remove noise, neutralize hyperref and integrate packages.
    """
    flat = expand_inputs(tree, main)
    flat = strip_comments(flat, policy.verbatim_environments)
    flat = remove_noise_tokens(flat, policy)
    flat = neutralize_hyperref(flat)
    flat = integrate_packages(flat)
    logger.info(f"Service: preprocessed '{main}' to {len(flat.text)} characters ({len(flat.warnings)} warnings)")
    return flat
