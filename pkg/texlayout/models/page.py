# texlayout/models/page.py

from enum import Enum
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from texlayout.logger import get_logger

logger = get_logger(__name__)


@dataclass(eq=False)
class PageImage:
    """
    One rasterized page.

    Attributes:
        page_index (int): 0-based page number.
        dpi (int): Rendering resolution shared by every page of a document.
        pixels (np.ndarray): uint8 grayscale grid, shape (height, width),
                             0 = black and 255 = white.
    """
    page_index: int
    dpi: int
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 2 or self.pixels.shape[0] == 0 or self.pixels.shape[1] == 0:
            raise ValueError(f"Page {self.page_index} must be a non-empty 2-D grayscale grid, got {self.pixels.shape}")

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, PageImage):
            return NotImplemented
        return (self.page_index == other.page_index and self.dpi == other.dpi
                and np.array_equal(self.pixels, other.pixels))


@dataclass(frozen=True, order=True)
class BBox:
    """Pixel box, origin top-left, half-open on the max edge."""
    page_index: int
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError(f"Degenerate box {self}")
        if self.page_index < 0 or self.x0 < 0 or self.y0 < 0:
            raise ValueError(f"Box outside page: {self}")

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def fits(self, width: int, height: int) -> bool:
        return self.x1 <= width and self.y1 <= height

    def scaled(self, factor) -> "BBox":
        """Box scaled by a rational factor, rounding half up."""
        from texlayout.utils import round_half_up
        return BBox(
            self.page_index,
            round_half_up(self.x0 * factor), round_half_up(self.y0 * factor),
            max(round_half_up(self.x1 * factor), round_half_up(self.x0 * factor) + 1),
            max(round_half_up(self.y1 * factor), round_half_up(self.y0 * factor) + 1),
        )

    def to_dict(self) -> dict:
        return {'page_index': self.page_index, 'x0': self.x0, 'y0': self.y0, 'x1': self.x1, 'y1': self.y1}

    @classmethod
    def from_dict(cls, data: dict) -> "BBox":
        return cls(int(data['page_index']), int(data['x0']), int(data['y0']), int(data['x1']), int(data['y1']))


class SplitKind(str, Enum):
    NONE = 'none'
    CROSS_COLUMN = 'cross_column'
    CROSS_PAGE = 'cross_page'


class RenderStatus(str, Enum):
    OK = 'ok'
    RENDER_FAILED = 'render_failed'
    COMPILE_FAILED = 'compile_failed'
    NOT_RENDERED = 'not_rendered'


@dataclass
class UnitBoxes:
    """
    The rendered regions of one unit. A unit split across columns and across
    pages is reported as cross_page.
    """
    unit_id: int
    boxes: List[BBox] = field(default_factory=list)
    split_kind: SplitKind = SplitKind.NONE

    @staticmethod
    def split_kind_for(boxes: List[BBox]) -> SplitKind:
        pages = [box.page_index for box in boxes]
        if len(set(pages)) >= 2:
            return SplitKind.CROSS_PAGE
        if len(pages) >= 2:
            return SplitKind.CROSS_COLUMN
        return SplitKind.NONE


@dataclass
class UnitRender:
    """Per-unit render outcome: its boxes (possibly empty) and status."""
    unit_id: int
    status: RenderStatus
    boxes: Optional[UnitBoxes] = None
    error: Optional[str] = None
