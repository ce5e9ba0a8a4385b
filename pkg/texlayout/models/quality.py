# texlayout/models/quality.py

from enum import Enum
from fractions import Fraction
from dataclasses import dataclass, field
from typing import List, Optional

from texlayout.logger import get_logger
from texlayout.models.page import BBox
from texlayout.utils import canonical_float

logger = get_logger(__name__)


class Tier(str, Enum):
    TIER1 = 'Tier1'
    TIER2 = 'Tier2'
    TIER3 = 'Tier3'


@dataclass(frozen=True)
class ReferenceBox:
    box: BBox
    label: Optional[str] = None


@dataclass
class ReferenceBoxSet:
    """
    Boxes from an external layout detector for one document.

    Attributes:
        boxes (list): ReferenceBox entries at `dpi`.
        provider (str): Tag of the detector that produced them.
        dpi (int): Resolution the coordinates are expressed at.
    """
    boxes: List[ReferenceBox] = field(default_factory=list)
    provider: str = "unknown"
    dpi: int = 150

    @property
    def bboxes(self) -> List[BBox]:
        return [ref.box for ref in self.boxes]

    def rescaled(self, dpi: int) -> "ReferenceBoxSet":
        if dpi == self.dpi:
            return self
        factor = Fraction(dpi, self.dpi)
        return ReferenceBoxSet(
            boxes=[ReferenceBox(ref.box.scaled(factor), ref.label) for ref in self.boxes],
            provider=self.provider,
            dpi=dpi,
        )


@dataclass
class QualityReport:
    """
    Annotation quality of one document. `tier` stays None and `graded`
    False until a reference box set has been applied.
    """
    n_boxes: int = 0
    iou_intra: float = 0.0
    iou_align: float = 0.0
    tier: Optional[Tier] = None
    n_refs: int = 0
    graded: bool = False
    provider: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            'n_boxes': self.n_boxes,
            'iou_intra': canonical_float(self.iou_intra),
            'iou_align': canonical_float(self.iou_align),
            'tier': self.tier.value if self.tier else None,
            'n_refs': self.n_refs,
            'graded': self.graded,
            'provider': self.provider,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "QualityReport":
        tier = data.get('tier')
        return cls(
            n_boxes=int(data['n_boxes']),
            iou_intra=float(data['iou_intra']),
            iou_align=float(data['iou_align']),
            tier=Tier(tier) if tier else None,
            n_refs=int(data['n_refs']),
            graded=bool(data['graded']),
            provider=data.get('provider'),
        )
