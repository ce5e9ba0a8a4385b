# texlayout/services/tex_scanner.py
"""
Lexical helpers over raw LaTeX text, built on TexSoup's tokenizer.

TexSoup splits the source into category-coded tokens whose concatenation is
the original text, so every helper here can report plain character offsets
and the stages built on top can edit the flat source without losing
provenance. Nothing is expanded; braces, brackets and environments are
matched on the token stream.
"""

import bisect
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Sequence, Tuple

from TexSoup.category import categorize                         # Category codes per character
from TexSoup.tokens import tokenize                              # Category codes -> LaTeX tokens

from texlayout.logger import get_logger
from texlayout.services.exceptions import SegmentationError

logger = get_logger(__name__)

Range = Tuple[int, int]

DEFAULT_VERBATIM_ENVIRONMENTS = ('verbatim', 'verbatim*', 'lstlisting', 'algorithmic', 'minted', 'comment')

# Characters the helpers below act on; everything else is plain text.
STRUCTURAL_CHARACTERS = frozenset('{}[]$\n')
_URL_COMMANDS = ('url', 'href', 'path')
_INLINE_VERBATIM_COMMANDS = ('verb', 'lstinline')


@dataclass(frozen=True)
class Lexeme:
    """One TexSoup token with its offset in the scanned text."""
    kind: str
    text: str
    start: int

    @property
    def end(self) -> int:
        return self.start + len(self.text)


def lex(text: str, start: int = 0, end: Optional[int] = None) -> Iterator[Lexeme]:
    """
    Lazily tokenizes text[start:end].

    Raises:
        SegmentationError: If TexSoup cannot tokenize the text.
    """
    end = len(text) if end is None else end
    position = start
    if start >= end:
        return
    try:
        for token in tokenize(categorize(text[start:end])):
            piece = token.text
            if not piece:
                continue
            yield Lexeme(getattr(token.category, 'name', 'Text'), piece, position)
            position += len(piece)
    except (AssertionError, IndexError, TypeError, ValueError) as e:
        raise SegmentationError(
            message=f"LaTeX tokenizer failed near offset {position}",
            errors={'offset': position},
            original_exception=e,
        ) from e


@dataclass(frozen=True)
class Mark:
    """
    A structural element of the source.

    `kind` is 'control' (a control word or symbol; `value` is its name without
    the backslash), 'comment' (`value` is the comment text) or 'char' (one of
    STRUCTURAL_CHARACTERS).
    """
    kind: str
    start: int
    end: int
    value: str


def _is_letter(character: str) -> bool:
    return character == '@' or (character.isascii() and character.isalpha())


def _control_name(rest: str) -> str:
    if not rest or not _is_letter(rest[0]):
        return rest[:1]
    length = 1
    while length < len(rest) and _is_letter(rest[length]):
        length += 1
    return rest[:length]


def _structural(piece: str, offset: int) -> Iterator[Mark]:
    for index, character in enumerate(piece):
        if character in STRUCTURAL_CHARACTERS:
            yield Mark('char', offset + index, offset + index + 1, character)


def marks(text: str, start: int = 0, end: Optional[int] = None) -> Iterator[Mark]:
    """Control sequences, comments and structural characters of text[start:end], in order."""
    lexemes = lex(text, start, end)
    for lexeme in lexemes:
        if lexeme.text.startswith('%'):
            newline = lexeme.text.find('\n')
            comment = lexeme.text if newline == -1 else lexeme.text[:newline]
            yield Mark('comment', lexeme.start, lexeme.start + len(comment), comment)
            yield from _structural(lexeme.text[len(comment):], lexeme.start + len(comment))
            continue
        if not lexeme.text.startswith('\\'):
            yield from _structural(lexeme.text, lexeme.start)
            continue

        rest, rest_start = lexeme.text[1:], lexeme.start + 1
        if not rest:
            # TexSoup emits the escape and the command name as separate tokens
            following = next(lexemes, None)
            if following is None:
                return
            rest, rest_start = following.text, following.start
        name = _control_name(rest)
        yield Mark('control', lexeme.start, rest_start + len(name), name)
        yield from _structural(rest[len(name):], rest_start + len(name))


def is_escaped(text: str, index: int) -> bool:
    """True when the character at index is preceded by an odd run of backslashes."""
    backslashes = 0
    position = index - 1
    while position >= 0 and text[position] == '\\':
        backslashes += 1
        position -= 1
    return backslashes % 2 == 1


def line_number(text: str, index: int) -> int:
    return text.count('\n', 0, index) + 1


def skip_spaces(text: str, position: int, allow_newline: bool = True) -> int:
    """Skips blanks between a command and its arguments (never a blank line)."""
    newlines = 0
    while position < len(text) and text[position] in ' \t\n':
        if text[position] == '\n':
            newlines += 1
            if not allow_newline or newlines > 1:
                break
        position += 1
    return position


def match_group(text: str, position: int, opening: str = '{', closing: str = '}') -> Optional[int]:
    """
    Returns the index just past the group closing the `opening` character at
    `position`, or None when it never closes. Escaped delimiters and comments
    are skipped; inside [..] groups brace groups are skipped as a whole.
    """
    if position >= len(text) or text[position] != opening:
        return None
    depth = 0
    braces = 0
    for mark in marks(text, position):
        if mark.kind != 'char':
            continue
        character = mark.value
        if opening != '{':
            if character == '{':
                braces += 1
                continue
            if character == '}':
                braces -= 1
                if braces < 0:
                    return None
                continue
            if braces:
                continue
        if character == opening:
            depth += 1
        elif character == closing:
            depth -= 1
            if depth == 0:
                return mark.end
    return None


@dataclass(frozen=True)
class CommandCall:
    """
    One parsed command occurrence.

    Attributes:
        name (str): Command name without backslash.
        start (int): Offset of the backslash.
        end (int): Offset just past the last consumed argument.
        star (bool): Whether a `*` followed the name.
        optional (tuple): Content ranges of [..] arguments.
        args (tuple): Content ranges of {..} arguments (inside the braces).
    """
    name: str
    start: int
    end: int
    star: bool = False
    optional: Tuple[Range, ...] = ()
    args: Tuple[Range, ...] = ()

    def arg_text(self, text: str, index: int = 0) -> str:
        start, end = self.args[index]
        return text[start:end]


class UnbalancedArgument(Exception):
    """An expected argument is missing or its braces never close."""

    def __init__(self, name: str, position: int):
        super().__init__(f"\\{name} at offset {position} has a missing or unbalanced argument")
        self.name = name
        self.position = position


def parse_command(text: str, start: int, name: str, arity: int = 1,
                  max_optional: int = 1, star: bool = True) -> CommandCall:
    """
    Parses `\\name*[opt]{arg}...` starting at the backslash.

    Args:
        text: Source text.
        start: Offset of the backslash.
        name: Command name already matched at `start`.
        arity: Number of mandatory brace arguments to consume.
        max_optional: Number of leading bracket arguments accepted.
        star: Whether a star form is accepted.

    Returns:
        CommandCall: The parsed call.

    Raises:
        UnbalancedArgument: If a mandatory argument is missing or unbalanced.
    """
    position = start + 1 + len(name)
    has_star = False
    if star and position < len(text) and text[position] == '*':
        has_star = True
        position += 1

    optional = []
    for _ in range(max_optional):
        cursor = skip_spaces(text, position)
        if cursor < len(text) and text[cursor] == '[':
            closing = match_group(text, cursor, '[', ']')
            if closing is None:
                raise UnbalancedArgument(name, start)
            optional.append((cursor + 1, closing - 1))
            position = closing
        else:
            break

    args = []
    for _ in range(arity):
        cursor = skip_spaces(text, position)
        closing = match_group(text, cursor)
        if closing is None:
            raise UnbalancedArgument(name, start)
        args.append((cursor + 1, closing - 1))
        position = closing

    return CommandCall(name, start, position, has_star, tuple(optional), tuple(args))


class RangeSet:
    """Sorted, non-overlapping half-open ranges with containment lookup."""

    def __init__(self, ranges: Iterable[Range] = ()):
        self.ranges: List[Range] = sorted(ranges)
        self._starts = [start for start, _ in self.ranges]

    def enclosing(self, position: int) -> Optional[Range]:
        index = bisect.bisect_right(self._starts, position) - 1
        if index >= 0 and self.ranges[index][0] <= position < self.ranges[index][1]:
            return self.ranges[index]
        return None

    def contains(self, position: int) -> bool:
        return self.enclosing(position) is not None

    def overlaps(self, start: int, end: int) -> bool:
        index = bisect.bisect_left(self._starts, end)
        return any(range_start < end and start < range_end for range_start, range_end in self.ranges[max(0, index - 1):index])

    def gaps(self, start: int, end: int) -> Iterator[Range]:
        """Maximal sub-ranges of [start, end) outside every range."""
        position = start
        for range_start, range_end in self.ranges:
            if range_end <= position:
                continue
            if range_start >= end:
                break
            if range_start > position:
                yield position, range_start
            position = max(position, range_end)
        if position < end:
            yield position, end

    def __iter__(self):
        return iter(self.ranges)

    def __len__(self):
        return len(self.ranges)


def marks_outside(text: str, protected: Optional[RangeSet], start: int = 0, end: Optional[int] = None) -> Iterator[Mark]:
    """Like `marks`, but protected ranges are never tokenized."""
    end = len(text) if end is None else end
    if not protected:
        yield from marks(text, start, end)
        return
    for gap_start, gap_end in protected.gaps(start, end):
        yield from marks(text, gap_start, gap_end)


def iter_command_names(text: str, names: Optional[Iterable[str]] = None,
                       protected: Sequence[Range] = ()) -> Iterator[Tuple[str, int]]:
    """Yields (name, offset) of control words outside protected ranges, optionally filtered."""
    wanted = set(names) if names is not None else None
    for mark in marks_outside(text, RangeSet(protected)):
        if mark.kind != 'control' or not _is_letter(mark.value[:1]):
            continue
        if wanted is not None and mark.value not in wanted:
            continue
        yield mark.value, mark.start


def find_commands(text: str, names: Iterable[str], arity: int = 1, max_optional: int = 1,
                  protected: Sequence[Range] = (), warnings: Optional[List[str]] = None) -> List[CommandCall]:
    """
    Parses every occurrence of the named commands. Occurrences whose
    arguments fail to parse are skipped and reported in `warnings`.
    """
    calls = []
    for name, offset in iter_command_names(text, names, protected):
        try:
            calls.append(parse_command(text, offset, name, arity, max_optional))
        except UnbalancedArgument as e:
            logger.debug(str(e))
            if warnings is not None:
                warnings.append(f"UnbalancedBraces: {e}")
    return calls


@dataclass(frozen=True)
class EnvToken:
    """`\\begin{name}` or `\\end{name}`; `end` is past the closing brace."""
    kind: str
    name: str
    start: int
    end: int


def _env_token(text: str, mark: Mark, limit: int) -> Optional[EnvToken]:
    cursor = skip_spaces(text, mark.end)
    if cursor >= limit:
        return None
    closing = match_group(text, cursor)
    if closing is None or closing > limit:
        return None
    name = text[cursor + 1:closing - 1].strip()
    if not name or '{' in name or '}' in name:
        return None
    return EnvToken(mark.value, name, mark.start, closing)


def environment_tokens(text: str, start: int = 0, end: Optional[int] = None,
                       protected: Optional[RangeSet] = None) -> Iterator[EnvToken]:
    """Every environment delimiter in text[start:end] outside protected ranges."""
    end = len(text) if end is None else end
    for mark in marks_outside(text, protected, start, end):
        if mark.kind == 'control' and mark.value in ('begin', 'end'):
            token = _env_token(text, mark, end)
            if token is not None:
                yield token


def begin_at(text: str, position: int) -> Optional[EnvToken]:
    """The `\\begin{name}` starting exactly at `position`, if any."""
    mark = next(marks(text, position), None)
    if mark is None or mark.start != position or mark.kind != 'control' or mark.value != 'begin':
        return None
    return _env_token(text, mark, len(text))


@dataclass
class LexicalRegions:
    """Comment ranges and verbatim-like ranges of a text."""
    comments: List[Range] = field(default_factory=list)
    verbatim: List[Range] = field(default_factory=list)

    @property
    def protected(self) -> List[Range]:
        return sorted(self.comments + self.verbatim)


def _match_raw_braces(text: str, position: int) -> Optional[int]:
    """Brace matching that ignores backslashes, as URLs are read verbatim."""
    depth = 0
    for index in range(position, len(text)):
        if text[index] == '{':
            depth += 1
        elif text[index] == '}':
            depth -= 1
            if depth == 0:
                return index + 1
        elif text[index] == '\n' and index + 1 < len(text) and text[index + 1] == '\n':
            return None
    return None


def _verbatim_region(text: str, mark: Mark, verbatim_names) -> Optional[Range]:
    length = len(text)
    if mark.value == 'begin':
        token = _env_token(text, mark, length)
        if token is None or token.name not in verbatim_names:
            return None
        closer = f"\\end{{{token.name}}}"
        closing = text.find(closer, token.end)
        return mark.start, (length if closing == -1 else closing + len(closer))

    if mark.value in _INLINE_VERBATIM_COMMANDS:
        delimiter_at = mark.end
        if mark.value == 'verb' and text.startswith('*', delimiter_at):
            delimiter_at += 1
        if delimiter_at >= length:
            return mark.start, length
        if text[delimiter_at] == '{' and mark.value == 'lstinline':
            return mark.start, (_match_raw_braces(text, delimiter_at) or length)
        closing = text.find(text[delimiter_at], delimiter_at + 1)
        return mark.start, (length if closing == -1 else closing + 1)

    if mark.value in _URL_COMMANDS:
        brace_at = skip_spaces(text, mark.end)
        if brace_at < length and text[brace_at] == '{':
            closing = _match_raw_braces(text, brace_at)
            if closing is not None:
                return brace_at, closing
    return None


def scan_regions(text: str, verbatim_environments: Iterable[str] = DEFAULT_VERBATIM_ENVIRONMENTS) -> LexicalRegions:
    """
    Finds comments and verbatim-like regions. A verbatim environment runs
    from its \\begin to the end of the first matching \\end. `\\verb`,
    `\\lstinline` and the argument of `\\url`, `\\href` and `\\path` are
    verbatim as well, so a `%` inside them is kept. Tokenizing restarts after
    each verbatim region, whose content is never read as LaTeX.
    """
    verbatim_names = set(verbatim_environments)
    regions = LexicalRegions()
    position = 0
    while position < len(text):
        resume = None
        for mark in marks(text, position):
            if mark.kind == 'comment':
                regions.comments.append((mark.start, mark.end))
            elif mark.kind == 'control':
                region = _verbatim_region(text, mark, verbatim_names)
                if region is not None:
                    regions.verbatim.append(region)
                    resume = max(region[1], mark.end)
                    break
        if resume is None:
            break
        position = resume
    return regions


@dataclass(frozen=True)
class EnvSpan:
    """
    A matched environment. `end` is past `\\end{name}`; `closed` is False when
    the environment was truncated at `limit`.
    """
    name: str
    start: int
    body_start: int
    body_end: int
    end: int
    closed: bool = True


def match_environment(text: str, start: int, limit: Optional[int] = None,
                      protected: Optional[RangeSet] = None,
                      verbatim_environments: Iterable[str] = DEFAULT_VERBATIM_ENVIRONMENTS) -> Optional[EnvSpan]:
    """
    Matches the environment whose \\begin is at `start`, honouring nesting of
    environments with the same name. Verbatim-like environments end at the
    first `\\end{name}`, as in `scan_regions`.
    """
    limit = len(text) if limit is None else limit
    head = begin_at(text, start)
    if head is None:
        return None

    if head.name in verbatim_environments:
        closer = f"\\end{{{head.name}}}"
        found = text.find(closer, head.end, limit)
        if found == -1:
            return EnvSpan(head.name, start, head.end, limit, limit, False)
        return EnvSpan(head.name, start, head.end, found, found + len(closer), True)

    depth = 1
    for token in environment_tokens(text, head.end, limit, protected):
        if token.name != head.name:
            continue
        depth += 1 if token.kind == 'begin' else -1
        if depth == 0:
            return EnvSpan(head.name, start, head.end, token.start, token.end, True)
    return EnvSpan(head.name, start, head.end, limit, limit, False)


def find_environment(text: str, name: str, start: int = 0, protected: Optional[RangeSet] = None) -> Optional[EnvSpan]:
    """First occurrence of environment `name` at or after `start`."""
    for token in environment_tokens(text, start, protected=protected):
        if token.kind == 'begin' and token.name == name:
            return match_environment(text, token.start, protected=protected)
    return None


def count_environment_tokens(text: str, name: str, protected: Sequence[Range] = ()) -> Tuple[int, int]:
    """(number of \\begin{name}, number of \\end{name}) outside protected ranges."""
    begins = ends = 0
    for token in environment_tokens(text, protected=RangeSet(protected)):
        if token.name != name:
            continue
        if token.kind == 'begin':
            begins += 1
        else:
            ends += 1
    return begins, ends


def blank_line_end(text: str, newline: int, limit: Optional[int] = None) -> Optional[int]:
    """If the newline at `newline` opens a blank line, the offset just past it."""
    limit = len(text) if limit is None else limit
    position = newline + 1
    while position < limit and text[position] in ' \t':
        position += 1
    if position < limit and text[position] == '\n':
        return position + 1
    return None
