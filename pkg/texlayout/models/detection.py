# texlayout/models/detection.py

from dataclasses import dataclass
from typing import Hashable

from texlayout.models.page import BBox
from texlayout.models.unit import AttributeLabel
from texlayout.utils import canonical_float


@dataclass(frozen=True)
class Detection:
    """A predicted layout box. `doc_id` and the box page pick the image it belongs to."""
    box: BBox
    label: AttributeLabel
    score: float
    doc_id: Hashable = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"Detection score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class GroundTruthBox:
    box: BBox
    label: AttributeLabel
    doc_id: Hashable = None


@dataclass(frozen=True)
class ScoreReport:
    metric: str
    value: float
    support: int

    def to_dict(self) -> dict:
        return {'metric': self.metric, 'value': canonical_float(self.value), 'support': self.support}
