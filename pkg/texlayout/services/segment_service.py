# texlayout/services/segment_service.py

from dataclasses import dataclass
from typing import List, Optional, Tuple

from texlayout.logger import get_logger                           # Custom application logger
from texlayout.models.source import FlatSource
from texlayout.models.unit import UnitDraft
from texlayout.services import tex_scanner                         # Lexical helpers
from texlayout.services.exceptions import SegmentationError        # Custom exceptions

logger = get_logger(__name__) # Logger instance for this module

SECTION_LEVELS = {
    'part': -1, 'chapter': 0, 'section': 1, 'subsection': 2,
    'subsubsection': 3, 'paragraph': 4, 'subparagraph': 5,
}

FLOAT_ENVIRONMENTS = frozenset({
    'figure', 'figure*', 'table', 'table*', 'algorithm', 'algorithm*', 'wrapfigure', 'wraptable',
    'sidewaysfigure', 'sidewaystable', 'SCfigure', 'SCtable', 'listing', 'longtable',
})
MATH_ENVIRONMENTS = frozenset({
    'equation', 'equation*', 'align', 'align*', 'gather', 'gather*', 'multline', 'multline*',
    'eqnarray', 'eqnarray*', 'flalign', 'flalign*', 'alignat', 'alignat*', 'displaymath', 'dmath', 'dmath*',
})
LIST_ENVIRONMENTS = frozenset({'itemize', 'enumerate', 'description', 'compactitem', 'compactenum', 'compactdesc'})
CODE_ENVIRONMENTS = frozenset({'verbatim', 'verbatim*', 'Verbatim', 'lstlisting', 'minted'})
ALGORITHM_ENVIRONMENTS = frozenset({'algorithmic', 'algorithmic*', 'algorithm2e'})
TABULAR_ENVIRONMENTS = frozenset({'tabular', 'tabular*', 'tabularx', 'tabulary'})
UNIT_ENVIRONMENTS = (FLOAT_ENVIRONMENTS | MATH_ENVIRONMENTS | LIST_ENVIRONMENTS | CODE_ENVIRONMENTS
                     | ALGORITHM_ENVIRONMENTS | TABULAR_ENVIRONMENTS | {'abstract'})
TRANSPARENT_ENVIRONMENTS = frozenset({
    'center', 'flushleft', 'flushright', 'multicols', 'multicols*', 'minipage', 'landscape',
    'small', 'footnotesize', 'scriptsize', 'large', 'Large', 'raggedright', 'raggedleft',
    'spacing', 'singlespace', 'onehalfspace', 'doublespace', 'frontmatter', 'mainmatter',
})
SKIPPED_ENVIRONMENTS = frozenset({'thebibliography', 'comment'})
FOOTNOTE_PARENT_KINDS = ('paragraph', 'env:abstract') + tuple(f"env:{name}" for name in sorted(LIST_ENVIRONMENTS))

# command -> (mandatory arity, optional arguments)
SKIPPED_COMMANDS = {
    'maketitle': (0, 0), 'tableofcontents': (0, 0), 'listoffigures': (0, 0), 'listoftables': (0, 0),
    'appendix': (0, 0), 'printbibliography': (0, 1), 'bibliography': (1, 0), 'bibliographystyle': (1, 0),
    'author': (1, 1), 'date': (1, 0), 'affiliation': (1, 1), 'institute': (1, 0), 'address': (1, 0),
    'email': (1, 0), 'newcommand': (2, 2), 'renewcommand': (2, 2), 'providecommand': (2, 2),
    'newtheorem': (2, 2), 'newenvironment': (3, 2), 'renewenvironment': (3, 2), 'DeclareMathOperator': (2, 0),
    'setcounter': (2, 0), 'captionsetup': (1, 1), 'graphicspath': (1, 0), 'hypersetup': (1, 0),
    'bibliographystyle*': (1, 0), 'frontmatter': (0, 0), 'mainmatter': (0, 0), 'backmatter': (0, 0),
}
TITLE_COMMANDS = ('title', 'icmltitle')
CAPTION_COMMANDS = {'caption': 1, 'captionof': 2}

# Control symbols that print nothing.
_INVISIBLE_SYMBOLS = frozenset(',;:!> \\')
_INVISIBLE_CHARACTERS = frozenset('{}[]~ \t\n')


@dataclass
class _Block:
    start: int
    end: int
    env_kind: str
    level: Optional[int] = None


def _visible(excerpt: str) -> bool:
    return any(character not in _INVISIBLE_CHARACTERS for character in excerpt)


def _has_visible_content(text: str, start: int, end: int) -> bool:
    """Whether text[start:end] prints anything besides commands, labels and grouping."""
    position = start
    for mark in tex_scanner.marks(text, start, end):
        if mark.kind == 'char' or mark.start < position:
            continue
        if mark.kind == 'control' and not _is_word(mark.value) and mark.value not in _INVISIBLE_SYMBOLS:
            return True
        if _visible(text[position:mark.start]):
            return True
        position = mark.end
        if mark.value == 'label':
            try:
                position = tex_scanner.parse_command(text[:end], mark.start, 'label', arity=1, max_optional=0, star=False).end
            except tex_scanner.UnbalancedArgument:
                pass
        elif mark.kind == 'control' and text.startswith('*', position):
            position += 1
    return _visible(text[position:end])


def _is_word(name: str) -> bool:
    return bool(name) and (name[0] == '@' or name[0].isalpha())


def _nested_ranges(text: str, start: int, end: int, names=None) -> List[Tuple[int, int]]:
    """Ranges of environments nested inside text[start:end], optionally filtered by name."""
    ranges = []
    position = start
    while position < end:
        head = next((token for token in tex_scanner.environment_tokens(text, position, end) if token.kind == 'begin'), None)
        if head is None:
            return ranges
        if names is None or names(head.name):
            env = tex_scanner.match_environment(text, head.start, limit=end)
            ranges.append((env.start, env.end))
            position = env.end
        else:
            position = head.end
    return ranges


def _child_commands(unit: UnitDraft, commands, excluded_env) -> List[Tuple[int, int, str]]:
    text = unit.raw_source
    body_start = 0
    begin = tex_scanner.begin_at(text, 0)
    if begin:
        body_start = begin.end
    excluded = tex_scanner.RangeSet(_nested_ranges(text, body_start, len(text), excluded_env))
    protected = tex_scanner.scan_regions(text).verbatim
    found = []
    for name, arity in commands.items():
        for call in tex_scanner.find_commands(text, [name], arity=arity, max_optional=1, protected=protected):
            if call.start < body_start or excluded.contains(call.start):
                continue
            found.append((unit.start + call.start, unit.start + call.end, name))
    found.sort()
    kept = []
    for child in found:
        if kept and child[0] < kept[-1][1]:
            continue
        kept.append(child)
    return kept


def extract_caption_children(unit: UnitDraft) -> List[UnitDraft]:
    """
    One child draft per top-level \\caption of a float unit. Captions inside
    sub-figures or nested floats belong to those and are not returned.
    Child ids are left at -1 for the caller to number.
    """
    if unit.env_name not in FLOAT_ENVIRONMENTS:
        return []
    excluded = lambda name: name.startswith('sub') or name in FLOAT_ENVIRONMENTS
    children = _child_commands(unit, CAPTION_COMMANDS, excluded)
    return [
        UnitDraft(-1, -1, (start, end), 'caption', unit.raw_source[start - unit.start:end - unit.start], unit.draft_id)
        for start, end, _ in children
    ]


def extract_footnote_children(unit: UnitDraft) -> List[UnitDraft]:
    """One child draft per \\footnote in a paragraph, list or abstract unit."""
    if unit.env_kind not in FOOTNOTE_PARENT_KINDS:
        return []
    children = _child_commands(unit, {'footnote': 1}, lambda name: False)
    return [
        UnitDraft(-1, -1, (start, end), 'footnote', unit.raw_source[start - unit.start:end - unit.start], unit.draft_id)
        for start, end, _ in children
    ]


class _Segmenter:
    """Walks the document body at top level and collects blocks in source order."""

    def __init__(self, text: str, warnings: List[str]):
        self.text = text
        self.warnings = warnings
        self.blocks: List[_Block] = []
        self.protected = tex_scanner.RangeSet(tex_scanner.scan_regions(text).verbatim)
        self.verbatim_starts = {start for start, _ in self.protected}
        self.paragraph_start: Optional[int] = None

    def warn(self, message: str):
        self.warnings.append(message)
        logger.warning(f"Service: {message}")

    def _mark_prose(self, start: int, end: int):
        if self.paragraph_start is not None:
            return
        excerpt = self.text[start:end]
        stripped = len(excerpt) - len(excerpt.lstrip())
        if stripped < len(excerpt):
            self.paragraph_start = start + stripped

    def flush(self, end: int):
        if self.paragraph_start is None:
            return
        start = self.paragraph_start
        self.paragraph_start = None
        excerpt = self.text[start:end]
        end = start + len(excerpt.rstrip())
        if end > start and _has_visible_content(self.text, start, end):
            self.blocks.append(_Block(start, end, 'paragraph'))

    def add_block(self, block: _Block, token_start: int):
        self.flush(token_start)
        self.blocks.append(block)

    def walk(self, start: int, end: int):
        position = start
        while position < end:
            position = self._step(position, end)
        self.flush(end)

    def _step(self, position: int, end: int) -> int:
        """
        Reads tokens from `position` until one starts a block or skips ahead;
        returns the offset to resume from. Everything read before it is prose.
        """
        text = self.text
        inline_closer = None
        for mark in tex_scanner.marks(text, position, end):
            region = self.protected.enclosing(mark.start)
            if region is not None and mark.start not in self.verbatim_starts:
                self._mark_prose(position, region[1])
                return max(min(region[1], end), mark.end)

            if inline_closer is not None:
                if (mark.kind, mark.value) == inline_closer:
                    self._mark_prose(position, mark.end)
                    inline_closer = None
                continue

            if mark.kind == 'char':
                if mark.value == '\n':
                    blank_end = tex_scanner.blank_line_end(text, mark.start, end)
                    if blank_end is not None:
                        self._mark_prose(position, mark.start)
                        self.flush(mark.start)
                        return blank_end
                elif mark.value == '$':
                    if text.startswith('$', mark.end) and mark.end < end:
                        self._mark_prose(position, mark.start)
                        return self._display_math(mark.start, '$$', end)
                    inline_closer = ('char', '$')
                continue
            if mark.kind != 'control':
                continue

            if mark.value == 'begin':
                self._mark_prose(position, mark.start)
                return self._environment(mark.start, end)
            if mark.value == '[':
                self._mark_prose(position, mark.start)
                return self._display_math(mark.start, '\\[', end)
            if mark.value == '(':
                inline_closer = ('control', ')')
                continue
            if mark.value in SECTION_LEVELS or mark.value in TITLE_COMMANDS \
                    or mark.value in CAPTION_COMMANDS or mark.value in SKIPPED_COMMANDS:
                self._mark_prose(position, mark.start)
                resume = self._command(mark.start, mark.value, end)
                if resume is not None:
                    return resume

        self._mark_prose(position, end)
        return end

    def _display_math(self, start: int, token: str, limit: int) -> int:
        closer = '\\]' if token == '\\[' else '$$'
        position = start + len(token)
        while True:
            found = self.text.find(closer, position, limit)
            if found == -1:
                self.warn(f"UnclosedEnvironment: display math at offset {start} never closes; truncated at the end of the body")
                self.add_block(_Block(start, limit, 'math:display'), start)
                return limit
            if not tex_scanner.is_escaped(self.text, found):
                self.add_block(_Block(start, found + len(closer), 'math:display'), start)
                return found + len(closer)
            position = found + 1

    def _environment(self, start: int, limit: int) -> int:
        env = tex_scanner.match_environment(self.text, start, limit=limit, protected=self.protected)
        if env is None:
            self._mark_prose(start, start + 1)
            return start + len('\\begin')
        if not env.closed:
            self.warn(f"UnclosedEnvironment: \\begin{{{env.name}}} at offset {start} has no \\end; truncated at the end of the body")

        if env.name in UNIT_ENVIRONMENTS:
            self.add_block(_Block(env.start, env.end, f"env:{env.name}"), start)
        elif env.name in TRANSPARENT_ENVIRONMENTS:
            self.flush(start)
            self.walk(env.body_start, env.body_end)
        elif env.name in SKIPPED_ENVIRONMENTS:
            self.flush(start)
        else:
            # unknown environments (theorems, proofs, custom blocks) read as prose
            self._mark_prose(start, env.end)
        return max(env.end, start + 1)

    def _trailing_label_end(self, position: int, limit: int) -> int:
        cursor = tex_scanner.skip_spaces(self.text, position)
        if cursor >= limit or not self.text.startswith('\\label', cursor):
            return position
        head = next(tex_scanner.marks(self.text, cursor, limit), None)
        if head is None or head.kind != 'control' or head.value != 'label':
            return position
        try:
            return tex_scanner.parse_command(self.text[:limit], cursor, 'label', arity=1, max_optional=0, star=False).end
        except tex_scanner.UnbalancedArgument:
            return position

    def _command(self, start: int, name: str, limit: int) -> Optional[int]:
        """Emits the block a structural command opens; None when it reads as prose."""
        text = self.text[:limit]
        try:
            if name in SECTION_LEVELS:
                call = tex_scanner.parse_command(text, start, name, arity=1, max_optional=1)
                end = self._trailing_label_end(call.end, limit)
                self.add_block(_Block(start, end, f"section:{name}", level=SECTION_LEVELS[name]), start)
                return end
            if name in TITLE_COMMANDS:
                call = tex_scanner.parse_command(text, start, name, arity=1, max_optional=1)
                self.add_block(_Block(start, call.end, 'paper-title'), start)
                return call.end
            if name in CAPTION_COMMANDS:
                call = tex_scanner.parse_command(text, start, name, arity=CAPTION_COMMANDS[name], max_optional=1)
                self.add_block(_Block(start, call.end, 'caption'), start)
                return call.end
            arity, optional = SKIPPED_COMMANDS[name]
            call = tex_scanner.parse_command(text, start, name, arity=arity, max_optional=optional)
            self.flush(start)
            return max(call.end, start + 1)
        except tex_scanner.UnbalancedArgument as e:
            self.warn(f"UnbalancedBraces: {e}")
        self._mark_prose(start, start + 1 + len(name))
        return None


def document_body(src: FlatSource) -> Tuple[tex_scanner.EnvSpan, List[str]]:
    """
    Locates the single document environment.

    Raises:
        SegmentationError: If there is no \\begin{document} or more than one.
    """
    text = src.text
    verbatim = tex_scanner.scan_regions(text).verbatim
    begins, ends = tex_scanner.count_environment_tokens(text, 'document', verbatim)
    if begins != 1 or ends > 1:
        raise SegmentationError(
            message=f"Expected exactly one document environment, found {begins} \\begin and {ends} \\end",
            errors={'document': f"{begins} begin / {ends} end"},
        )
    warnings = []
    document = tex_scanner.find_environment(text, 'document', protected=tex_scanner.RangeSet(verbatim))
    if not document.closed:
        warnings.append("UnclosedEnvironment: \\begin{document} has no \\end{document}; body runs to the end of the source")
    return document, warnings


def segment_units(src: FlatSource, warnings: Optional[List[str]] = None) -> List[UnitDraft]:
    """
    Splits the document into reading-ordered unit drafts: a preamble \\title,
    sectioning commands, unit environments (floats, display math, lists,
    code, algorithms, abstract, tabulars), orphan captions and blank-line
    separated paragraphs. Caption children follow their float and footnote
    children follow their paragraph, list or abstract.

    Args:
        src (FlatSource): Preprocessed source.
        warnings (list, optional): Receives UnclosedEnvironment and
                                   UnbalancedBraces messages.

    Returns:
        list: UnitDrafts with draft_id == order_index.

    Raises:
        SegmentationError: If the source has no single document environment.
    """
    warnings = warnings if warnings is not None else []
    document, body_warnings = document_body(src)
    warnings.extend(body_warnings)
    text = src.text

    segmenter = _Segmenter(text, warnings)
    protected = tex_scanner.scan_regions(text[:document.start]).protected
    for call in tex_scanner.find_commands(text[:document.start], TITLE_COMMANDS, arity=1, protected=protected, warnings=warnings):
        segmenter.blocks.append(_Block(call.start, call.end, 'paper-title'))
        break
    segmenter.walk(document.body_start, document.body_end)

    drafts: List[UnitDraft] = []
    for block in segmenter.blocks:
        parent = UnitDraft(len(drafts), len(drafts), (block.start, block.end), block.env_kind,
                           text[block.start:block.end], level=block.level)
        drafts.append(parent)
        for child in extract_caption_children(parent) + extract_footnote_children(parent):
            child.draft_id = child.order_index = len(drafts)
            drafts.append(child)

    logger.info(f"Service: segmented {len(drafts)} units "
                f"({sum(1 for draft in drafts if draft.is_child)} children, {len(warnings)} warnings)")
    return drafts
