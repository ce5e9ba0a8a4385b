# texlayout/services/bbox_service.py

from itertools import combinations
from typing import List, Sequence, Tuple

import numpy as np

from texlayout.logger import get_logger                            # Custom application logger
from texlayout.models.page import BBox, PageImage, UnitBoxes
from texlayout.models.unit import Relation, RelationKind
from texlayout.services.exceptions import EmptyDiff, PageMismatch  # Custom exceptions for error handling

logger = get_logger(__name__) # Logger instance for this module


def difference_mask(variant: PageImage, baseline: PageImage, threshold: int = 16) -> np.ndarray:
    """Boolean grid of pixels whose gray levels differ by more than `threshold`."""
    return np.abs(variant.pixels.astype(np.int16) - baseline.pixels.astype(np.int16)) > threshold


def _column_groups(columns: np.ndarray, max_gap: float) -> List[Tuple[int, int]]:
    """
    Half-open x ranges of inked columns, merging runs separated by at most
    `max_gap` empty columns.
    """
    inked = np.flatnonzero(columns)
    if inked.size == 0:
        return []
    groups = []
    start = previous = int(inked[0])
    for x in inked[1:]:
        x = int(x)
        if x - previous - 1 > max_gap:
            groups.append((start, previous + 1))
            start = x
        previous = x
    groups.append((start, previous + 1))
    return groups


def page_boxes(mask: np.ndarray, page_index: int, column_gap_ratio: float = 0.05) -> List[BBox]:
    """
    Tight boxes around the differing pixels of one page, one per column group.

    Args:
        mask (np.ndarray): Boolean (height, width) difference grid.
        page_index (int): Page the mask belongs to.
        column_gap_ratio (float): Empty horizontal run, as a fraction of page
                                  width, above which ink is split into columns.

    Returns:
        list: BBoxes ordered left to right; empty when nothing differs.
    """
    width = mask.shape[1]
    boxes = []
    for x0, x1 in _column_groups(mask.any(axis=0), column_gap_ratio * width):
        rows = np.flatnonzero(mask[:, x0:x1].any(axis=1))
        boxes.append(BBox(page_index, x0, int(rows[0]), x1, int(rows[-1]) + 1))
    return boxes


def diff_extract_boxes(variant_pages: Sequence[PageImage], baseline_pages: Sequence[PageImage],
                       threshold: int = 16, column_gap_ratio: float = 0.05) -> List[BBox]:
    """
    Subtracts the blank baseline from a unit's isolation render and boxes the ink.

    Args:
        variant_pages (list): Pages of the unit's isolation variant.
        baseline_pages (list): Pages of the all-white baseline.
        threshold (int): Gray-level difference (0-255) counted as ink.
        column_gap_ratio (float): Column split ratio, see `page_boxes`.

    Returns:
        list: BBoxes in page order, then left to right.

    Raises:
        PageMismatch: If page counts or page sizes differ.
        EmptyDiff: If no pixel differs on any page.
    """
    if len(variant_pages) != len(baseline_pages):
        raise PageMismatch(
            message=f"Variant has {len(variant_pages)} pages, baseline has {len(baseline_pages)}",
            errors={'pages': f"{len(variant_pages)} != {len(baseline_pages)}"},
        )

    boxes: List[BBox] = []
    for variant, baseline in zip(variant_pages, baseline_pages):
        if variant.pixels.shape != baseline.pixels.shape:
            raise PageMismatch(
                message=f"Page {variant.page_index} is {variant.width}x{variant.height} in the variant "
                        f"but {baseline.width}x{baseline.height} in the baseline",
                errors={f"page[{variant.page_index}]": "size differs"},
            )
        boxes.extend(page_boxes(difference_mask(variant, baseline, threshold), variant.page_index, column_gap_ratio))

    if not boxes:
        raise EmptyDiff(message="No pixel differs between the variant and the baseline")
    logger.debug(f"Service: diff produced {len(boxes)} boxes over {len(variant_pages)} pages")
    return boxes


def unify_unit_boxes(unit_id: int, boxes: Sequence[BBox]) -> Tuple[UnitBoxes, List[Relation]]:
    """
    Groups one unit's boxes and links every pair of its parts with an
    Identical relation (a complete graph over the parts).
    """
    ordered = sorted(boxes)
    relations = [
        Relation(unit_id, unit_id, RelationKind.IDENTICAL, from_part=i, to_part=j)
        for i, j in combinations(range(len(ordered)), 2)
    ]
    return UnitBoxes(unit_id, ordered, UnitBoxes.split_kind_for(ordered)), relations
