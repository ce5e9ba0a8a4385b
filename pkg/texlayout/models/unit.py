# texlayout/models/unit.py

from enum import Enum
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Tuple

from texlayout.logger import get_logger

logger = get_logger(__name__)


class AttributeLabel(Enum):
    """
    The 13 layout attributes a unit can carry. Values are the fixed dataset
    indices; 6 ("others") and 11 ("reference") are reserved and never used.
    """
    ALGORITHM = (0, 'Algorithm')
    CAPTION = (1, 'Caption')
    EQUATION = (2, 'Equation')
    FIGURE = (3, 'Figure')
    FOOTNOTE = (4, 'Footnote')
    LIST = (5, 'List')
    TABLE = (7, 'Table')
    TEXT = (8, 'Text')
    TEXT_EQ = (9, 'Text-EQ')
    TITLE = (10, 'Title')
    PAPER_TITLE = (12, 'PaperTitle')
    CODE = (13, 'Code')
    ABSTRACT = (14, 'Abstract')

    @property
    def index(self) -> int:
        return self.value[0]

    @property
    def label_name(self) -> str:
        return self.value[1]

    @classmethod
    def from_index(cls, index: int) -> "AttributeLabel":
        for member in cls:
            if member.index == index:
                return member
        raise ValueError(f"{index} is not an attribute index")

    @classmethod
    def from_name(cls, name: str) -> "AttributeLabel":
        for member in cls:
            if member.label_name == name:
                return member
        raise ValueError(f"'{name}' is not an attribute name")

    @classmethod
    def parse(cls, value) -> "AttributeLabel":
        """Accepts an AttributeLabel, an index, a digit string or a name."""
        if isinstance(value, cls):
            return value
        if isinstance(value, int) and not isinstance(value, bool):
            return cls.from_index(value)
        text = str(value).strip()
        if text.lstrip('-').isdigit():
            return cls.from_index(int(text))
        return cls.from_name(text)

    def to_dict(self) -> dict:
        return {'index': self.index, 'name': self.label_name}


FLOAT_ATTRIBUTES = frozenset({AttributeLabel.FIGURE, AttributeLabel.TABLE, AttributeLabel.ALGORITHM})


class RelationKind(str, Enum):
    IDENTICAL = 'Identical'
    TITLE_ADJACENT = 'TitleAdjacent'
    SUBORDINATE = 'Subordinate'
    NON_TITLE_ADJACENT = 'NonTitleAdjacent'
    EXPLICITLY_REFERRED = 'ExplicitlyReferred'
    IMPLICITLY_REFERRED = 'ImplicitlyReferred'


@dataclass(frozen=True)
class Relation:
    """
    A typed directed edge between two units. Identical edges join two box
    instances of the same unit, so they carry part indices into the unit's
    box list; all other kinds leave the parts unset.
    """
    from_unit: int
    to_unit: int
    kind: RelationKind
    from_part: Optional[int] = None
    to_part: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.kind, RelationKind):
            object.__setattr__(self, 'kind', RelationKind(self.kind))
        if (self.from_unit, self.from_part) == (self.to_unit, self.to_part):
            raise ValueError(f"Self-loop relation on unit {self.from_unit} (part {self.from_part})")

    def sort_key(self) -> Tuple:
        return (
            self.from_unit, self.to_unit, self.kind.value,
            -1 if self.from_part is None else self.from_part,
            -1 if self.to_part is None else self.to_part,
        )

    def to_dict(self) -> dict:
        data = {'from_unit': self.from_unit, 'to_unit': self.to_unit, 'kind': self.kind.value}
        if self.from_part is not None:
            data['from_part'] = self.from_part
        if self.to_part is not None:
            data['to_part'] = self.to_part
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Relation":
        return cls(
            from_unit=int(data['from_unit']),
            to_unit=int(data['to_unit']),
            kind=RelationKind(data['kind']),
            from_part=data.get('from_part'),
            to_part=data.get('to_part'),
        )


@dataclass
class UnitDraft:
    """
    One segmented unit before classification.

    Attributes:
        draft_id (int): Stable id, equal to order_index.
        order_index (int): 0-based reading-order position.
        source_span (tuple): Half-open (start, end) range in the flat source.
        env_kind (str): Block kind, e.g. 'section:subsection', 'env:figure',
                        'math:display', 'caption', 'footnote', 'paragraph',
                        'paper-title'.
        raw_source (str): The flat-source slice at source_span.
        parent_id (int, optional): Containing unit for caption and footnote children.
        level (int, optional): Sectioning depth for section units.
    """
    draft_id: int
    order_index: int
    source_span: Tuple[int, int]
    env_kind: str
    raw_source: str
    parent_id: Optional[int] = None
    level: Optional[int] = None

    @property
    def start(self) -> int:
        return self.source_span[0]

    @property
    def end(self) -> int:
        return self.source_span[1]

    @property
    def env_name(self) -> Optional[str]:
        """Environment name for 'env:<name>' kinds."""
        if self.env_kind.startswith('env:'):
            return self.env_kind[4:]
        return None

    @property
    def is_child(self) -> bool:
        return self.parent_id is not None


@dataclass(kw_only=True)
class AnnotatedUnit(UnitDraft):
    """A classified unit together with its cross-reference keys."""
    attribute: AttributeLabel
    labels_defined: List[str] = field(default_factory=list)
    refs_used: List[str] = field(default_factory=list)
    footnote_marks: int = 0

    @property
    def unit_id(self) -> int:
        return self.draft_id

    @classmethod
    def from_draft(cls, draft: UnitDraft, attribute: AttributeLabel, **extra) -> "AnnotatedUnit":
        values = {name: getattr(draft, name) for name in UnitDraft.__dataclass_fields__}
        values.update(extra)
        return cls(attribute=attribute, **values)

    def to_dict(self) -> dict:
        data = asdict(self)
        data['source_span'] = list(self.source_span)
        data['attribute'] = self.attribute.to_dict()
        return data
