# texlayout/services/quality_service.py

import json
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

from texlayout.logger import get_logger                                # Custom application logger
from texlayout.models.page import BBox
from texlayout.models.quality import QualityReport, ReferenceBox, ReferenceBoxSet, Tier
from texlayout.services.exceptions import SchemaViolation, SourceIOError

logger = get_logger(__name__) # Logger instance for this module

TIER1_MAX_INTRA = Fraction(5, 10000)    # 0.05 %
TIER2_MAX_INTRA = Fraction(1, 100)      # 1 %
TIER1_MIN_ALIGN = Fraction(60, 100)
TIER2_MIN_ALIGN = Fraction(35, 100)


def intersection_area(b1: BBox, b2: BBox) -> int:
    if b1.page_index != b2.page_index:
        return 0
    width = min(b1.x1, b2.x1) - max(b1.x0, b2.x0)
    height = min(b1.y1, b2.y1) - max(b1.y0, b2.y0)
    return max(width, 0) * max(height, 0)


def jaccard(b1: BBox, b2: BBox) -> Fraction:
    """Exact intersection-over-union; boxes on different pages score 0."""
    overlap = intersection_area(b1, b2)
    return Fraction(overlap, b1.area + b2.area - overlap)


def iou_intra(boxes: Sequence[BBox]) -> Fraction:
    """
    Mean Jaccard over all ordered pairs of distinct boxes of one document.
    Fewer than two boxes score 0.
    """
    count = len(boxes)
    if count < 2:
        return Fraction(0)
    total = sum((jaccard(boxes[i], boxes[j]) for i in range(count) for j in range(i + 1, count)), Fraction(0))
    return 2 * total / (count * (count - 1))


def iou_align(boxes: Sequence[BBox], refs: ReferenceBoxSet, warnings: Optional[List[str]] = None) -> Fraction:
    """
    For each reference box, the best Jaccard against the annotated boxes
    (ties resolved to the earliest box), averaged over the references.

    Args:
        boxes (list): Annotated boxes in unit order.
        refs (ReferenceBoxSet): Reference boxes at the same dpi.
        warnings (list, optional): Receives a NoReferences message when refs is empty.

    Returns:
        Fraction: The alignment score in [0, 1].
    """
    references = refs.bboxes
    if not references:
        message = "NoReferences: the reference box set is empty; IoU_align is 0"
        logger.warning(f"Service: {message}")
        if warnings is not None:
            warnings.append(message)
        return Fraction(0)
    total = Fraction(0)
    for reference in references:
        best = Fraction(0)
        for box in boxes:
            score = jaccard(box, reference)
            if score > best:
                best = score
        total += best
    return total / len(references)


def assign_tier(intra, align) -> Tier:
    """
    Tier1: intra < 0.05 % and align > 60 %.
    Tier2: 0.05 % <= intra < 1 % and align > 35 %.
    Tier3: everything else. Values on a threshold fall to the lower tier.
    """
    intra, align = Fraction(intra), Fraction(align)
    if intra < TIER1_MAX_INTRA and align > TIER1_MIN_ALIGN:
        return Tier.TIER1
    if TIER1_MAX_INTRA <= intra < TIER2_MAX_INTRA and align > TIER2_MIN_ALIGN:
        return Tier.TIER2
    return Tier.TIER3


def load_reference_boxes(path, dpi: Optional[int] = None) -> ReferenceBoxSet:
    """
    Reads a reference box file and rescales it to `dpi`.

    The file is either a JSON list of boxes or an object
    `{"provider": str, "dpi": int, "boxes": [...]}`; each box is
    `{page_index, x0, y0, x1, y1, label?}`. A bare list is taken at 150 dpi.

    Raises:
        SourceIOError: If the file cannot be read.
        SchemaViolation: If the JSON does not have that shape.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except OSError as e:
        raise SourceIOError(message=f"Cannot read reference boxes {path}: {e}", original_exception=e)
    except json.JSONDecodeError as e:
        raise SchemaViolation(message=f"Reference box file {path} is not valid JSON: {e}", original_exception=e)

    if isinstance(data, list):
        data = {'boxes': data}
    if not isinstance(data, dict) or not isinstance(data.get('boxes'), list):
        raise SchemaViolation(message=f"Reference box file {path} has no 'boxes' list", errors={'boxes': 'missing'})

    boxes = []
    for index, entry in enumerate(data['boxes']):
        try:
            boxes.append(ReferenceBox(BBox.from_dict(entry), entry.get('label')))
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            raise SchemaViolation(message=f"Invalid reference box #{index} in {path}: {e}",
                                  errors={f"boxes[{index}]": str(e)}, original_exception=e)

    try:
        ref_set = ReferenceBoxSet(boxes=boxes, provider=str(data.get('provider', 'unknown')), dpi=int(data.get('dpi', 150)))
    except (TypeError, ValueError) as e:
        raise SchemaViolation(message=f"Invalid dpi in {path}", errors={'dpi': str(e)}, original_exception=e)
    if ref_set.dpi <= 0:
        raise SchemaViolation(message=f"Invalid dpi {ref_set.dpi} in {path}", errors={'dpi': 'must be positive'})

    logger.debug(f"Service: loaded {len(boxes)} reference boxes from {path} ({ref_set.provider}, {ref_set.dpi} dpi)")
    return ref_set.rescaled(dpi) if dpi else ref_set


def grade(boxes: Sequence[BBox], refs: Optional[ReferenceBoxSet] = None,
          warnings: Optional[List[str]] = None) -> QualityReport:
    """
    Builds the QualityReport of one document. Without references only
    IoU_intra is computed and the report stays ungraded.
    """
    boxes = list(boxes)
    intra = iou_intra(boxes)
    if refs is None:
        return QualityReport(n_boxes=len(boxes), iou_intra=float(intra))
    align = iou_align(boxes, refs, warnings)
    tier = assign_tier(intra, align)
    logger.info(f"Service: graded {len(boxes)} boxes against {len(refs.boxes)} references "
                f"({refs.provider}): intra={float(intra):.6f} align={float(align):.4f} -> {tier.value}")
    return QualityReport(
        n_boxes=len(boxes), iou_intra=float(intra), iou_align=float(align),
        tier=tier, n_refs=len(refs.boxes), graded=True, provider=refs.provider,
    )
