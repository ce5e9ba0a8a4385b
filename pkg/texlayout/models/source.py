# texlayout/models/source.py

import bisect
import posixpath
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

from texlayout.logger import get_logger

logger = get_logger(__name__)

FIGURE_EXTENSIONS = frozenset({'png', 'jpg', 'jpeg', 'pdf', 'eps', 'ps'})


def is_safe_relative_path(path: str) -> bool:
    """True for POSIX relative paths that stay inside the tree."""
    if not path or path.startswith('/') or '\\' in path:
        return False
    normalized = posixpath.normpath(path)
    return not (normalized == '..' or normalized.startswith('../') or normalized.startswith('/'))


def file_extension(path: str) -> str:
    return posixpath.splitext(path)[1].lower().lstrip('.')


@dataclass
class SourceTree:
    """
    The raw LaTeX source of one paper.

    Attributes:
        files (dict): Relative POSIX path -> raw bytes.
        figures (list): Paths of graphic assets, sorted.
        root_hint (str, optional): Relative path of the main file when known.
        warnings (list): Soft errors raised while loading or converting.
    """
    files: Dict[str, bytes]
    figures: List[str] = field(default_factory=list)
    root_hint: Optional[str] = None
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self):
        bad_paths = [path for path in self.files if not is_safe_relative_path(path)]
        if bad_paths:
            raise ValueError(f"SourceTree paths must be relative and stay inside the tree: {bad_paths}")
        if not self.figures:
            self.figures = sorted(path for path in self.files if file_extension(path) in FIGURE_EXTENSIONS)

    @property
    def tex_files(self) -> List[str]:
        return sorted(path for path in self.files if file_extension(path) == 'tex')

    def with_files(self, files: Dict[str, bytes], warnings: Sequence[str] = ()) -> "SourceTree":
        return SourceTree(
            files=dict(files),
            figures=sorted(path for path in files if file_extension(path) in FIGURE_EXTENSIONS),
            root_hint=self.root_hint,
            warnings=list(self.warnings) + list(warnings),
        )


@dataclass(frozen=True)
class OriginSpan:
    """Provenance of one contiguous range of the flat text."""
    flat_start: int
    flat_end: int
    file: str
    line_start: int
    line_end: int

    def to_dict(self) -> dict:
        return {
            'flat_start': self.flat_start, 'flat_end': self.flat_end,
            'file': self.file, 'line_start': self.line_start, 'line_end': self.line_end,
        }


@dataclass(frozen=True)
class TextEdit:
    """Replace text[start:end] with `text`. start == end is a pure insertion."""
    start: int
    end: int
    text: str = ""


@dataclass(frozen=True)
class FlatSource:
    """
    A single LaTeX character stream with its provenance.

    Attributes:
        text (str): The flattened source.
        origin_map (tuple): Sorted, non-overlapping OriginSpans covering `text`.
        noise_policy_applied (str, optional): Id of the token-removal policy, once applied.
        warnings (tuple): Soft errors accumulated by the preprocessing chain.
    """
    text: str
    origin_map: tuple = ()
    noise_policy_applied: Optional[str] = None
    warnings: tuple = ()

    @classmethod
    def from_text(cls, text: str, file: str = "<memory>") -> "FlatSource":
        if not text:
            return cls(text="", origin_map=())
        return cls(text=text, origin_map=(OriginSpan(0, len(text), file, 1, text.count('\n') + 1),))

    def origin_at(self, index: int) -> OriginSpan:
        """
        Resolves a character index to the origin span that produced it.

        Raises:
            IndexError: If index is outside the text.
        """
        if not 0 <= index < len(self.text):
            raise IndexError(f"index {index} outside flat text of length {len(self.text)}")
        starts = [span.flat_start for span in self.origin_map]
        position = bisect.bisect_right(starts, index) - 1
        return self.origin_map[position]

    def with_warnings(self, *warnings: str) -> "FlatSource":
        if not warnings:
            return self
        return replace(self, warnings=self.warnings + tuple(warnings))

    def apply_edits(self, edits: Sequence[TextEdit], warnings: Sequence[str] = (),
                    noise_policy_applied: Optional[str] = None) -> "FlatSource":
        """
        Applies non-overlapping edits and remaps the origin map so it still
        covers the new text. Insertions at a span boundary belong to the span
        that starts there; text replacing a range belongs to the span where
        the range starts.

        Args:
            edits: Edits in any order; pure insertions at the same position
                   keep their relative order.
            warnings: Extra warnings to append.
            noise_policy_applied: Overrides the recorded policy id when given.

        Returns:
            FlatSource: The edited source.

        Raises:
            ValueError: If two edits overlap.
        """
        ordered = [edit for _, edit in sorted(enumerate(edits), key=lambda item: (item[1].start, item[1].end, item[0]))]
        pieces = []
        cursor = 0
        placed = []  # (old_start, old_end, new_start, new_end)
        new_length = 0
        for edit in ordered:
            if edit.start < cursor or edit.end < edit.start or edit.end > len(self.text):
                raise ValueError(f"Overlapping or out-of-range edit {edit} (cursor {cursor})")
            pieces.append(self.text[cursor:edit.start])
            new_length += edit.start - cursor
            placed.append((edit.start, edit.end, new_length, new_length + len(edit.text)))
            pieces.append(edit.text)
            new_length += len(edit.text)
            cursor = edit.end
        pieces.append(self.text[cursor:])
        new_text = ''.join(pieces)
        old_length = len(self.text)

        def remap(position: int) -> int:
            if position >= old_length:
                return len(new_text)
            delta = 0
            for old_start, old_end, new_start, new_end in placed:
                if old_start == position:
                    break
                if old_start < position < old_end:
                    return new_start
                if old_end <= position:
                    delta += (new_end - new_start) - (old_end - old_start)
                    continue
                break
            return position + delta

        new_map = []
        for span in self.origin_map:
            start, end = remap(span.flat_start), remap(span.flat_end)
            if end > start:
                new_map.append(replace(span, flat_start=start, flat_end=end))
        if not new_map and new_text:
            new_map.append(OriginSpan(0, len(new_text), "<generated>", 1, new_text.count('\n') + 1))

        return FlatSource(
            text=new_text,
            origin_map=tuple(new_map),
            noise_policy_applied=noise_policy_applied if noise_policy_applied is not None else self.noise_policy_applied,
            warnings=self.warnings + tuple(warnings),
        )
