# texlayout/models/genome.py

from enum import Enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from texlayout.logger import get_logger
from texlayout.models.page import BBox, RenderStatus, SplitKind
from texlayout.models.quality import QualityReport
from texlayout.models.unit import AttributeLabel, Relation
from texlayout.utils import canonical_float

logger = get_logger(__name__)

PIPELINE_VERSION = "texlayout-1.0"
GENOME_SCHEMA_VERSION = 1


class DocStatus(str, Enum):
    OK = 'ok'
    RENDER_FAILED = 'render_failed'
    COMPILE_FAILED = 'compile_failed'
    INGEST_FAILED = 'ingest_failed'


@dataclass
class GenomeUnit:
    """
    One unit as stored in a genome record.

    Attributes:
        unit_id (int): Id referenced by relations, equal to order_index.
        order_index (int): Reading-order position.
        attribute (AttributeLabel): Layout attribute.
        env_kind (str): Segmenter block kind.
        source_span (list): [start, end) in the flat source.
        raw_source (str): LaTeX excerpt.
        normalized_text (str): Excerpt without label/ref commands, whitespace collapsed.
        boxes (list): Rendered regions at the genome dpi.
        split_kind (SplitKind): How the boxes are split.
        render_status (RenderStatus): Render outcome for this unit.
        parent_id (int, optional): Parent unit of a caption or footnote.
        labels_defined (list): \\label keys owned by the unit.
        refs_used (list): Reference keys used by the unit.
    """
    unit_id: int
    order_index: int
    attribute: AttributeLabel
    env_kind: str
    source_span: List[int]
    raw_source: str
    normalized_text: str
    boxes: List[BBox] = field(default_factory=list)
    split_kind: SplitKind = SplitKind.NONE
    render_status: RenderStatus = RenderStatus.NOT_RENDERED
    parent_id: Optional[int] = None
    labels_defined: List[str] = field(default_factory=list)
    refs_used: List[str] = field(default_factory=list)

    def to_dict(self, dpi: int) -> dict:
        return {
            'unit_id': self.unit_id,
            'order_index': self.order_index,
            'attribute': self.attribute.to_dict(),
            'env_kind': self.env_kind,
            'source_span': list(self.source_span),
            'raw_source': self.raw_source,
            'normalized_text': self.normalized_text,
            'boxes': [dict(box.to_dict(), dpi=dpi) for box in self.boxes],
            'split_kind': self.split_kind.value,
            'render_status': self.render_status.value,
            'parent_id': self.parent_id,
            'labels_defined': list(self.labels_defined),
            'refs_used': list(self.refs_used),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GenomeUnit":
        attribute = AttributeLabel.from_index(int(data['attribute']['index']))
        if attribute.label_name != data['attribute']['name']:
            raise ValueError(f"attribute name '{data['attribute']['name']}' does not match index {attribute.index}")
        return cls(
            unit_id=int(data['unit_id']),
            order_index=int(data['order_index']),
            attribute=attribute,
            env_kind=str(data['env_kind']),
            source_span=[int(value) for value in data['source_span']],
            raw_source=str(data['raw_source']),
            normalized_text=str(data['normalized_text']),
            boxes=[BBox.from_dict(box) for box in data['boxes']],
            split_kind=SplitKind(data['split_kind']),
            render_status=RenderStatus(data['render_status']),
            parent_id=data.get('parent_id'),
            labels_defined=list(data.get('labels_defined', [])),
            refs_used=list(data.get('refs_used', [])),
        )


@dataclass
class DocumentGenome:
    """The complete per-document record: units, relations, boxes and quality."""
    doc_id: str
    source_digest: str
    units: List[GenomeUnit] = field(default_factory=list)
    relations: List[Relation] = field(default_factory=list)
    quality: QualityReport = field(default_factory=QualityReport)
    status: DocStatus = DocStatus.OK
    dpi: int = 150
    page_count: int = 0
    page_sizes: List[List[int]] = field(default_factory=list)
    main_file: Optional[str] = None
    noise_policy: Optional[str] = None
    categories: List[str] = field(default_factory=list)
    pipeline_version: str = PIPELINE_VERSION
    warnings: List[str] = field(default_factory=list)

    def unit(self, unit_id: int) -> GenomeUnit:
        for unit in self.units:
            if unit.unit_id == unit_id:
                return unit
        raise KeyError(unit_id)

    @property
    def all_boxes(self) -> List[BBox]:
        return [box for unit in self.units for box in unit.boxes]

    def to_dict(self) -> dict:
        return {
            'schema_version': GENOME_SCHEMA_VERSION,
            'doc_id': self.doc_id,
            'source_digest': self.source_digest,
            'status': self.status.value,
            'dpi': self.dpi,
            'page_count': self.page_count,
            'page_sizes': [list(size) for size in self.page_sizes],
            'main_file': self.main_file,
            'noise_policy': self.noise_policy,
            'categories': list(self.categories),
            'pipeline_version': self.pipeline_version,
            'units': [unit.to_dict(self.dpi) for unit in self.units],
            'relations': [relation.to_dict() for relation in sorted(self.relations, key=Relation.sort_key)],
            'quality': self.quality.to_dict(),
            'warnings': list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DocumentGenome":
        return cls(
            doc_id=str(data['doc_id']),
            source_digest=str(data['source_digest']),
            units=[GenomeUnit.from_dict(unit) for unit in data['units']],
            relations=[Relation.from_dict(relation) for relation in data['relations']],
            quality=QualityReport.from_dict(data['quality']),
            status=DocStatus(data['status']),
            dpi=int(data['dpi']),
            page_count=int(data['page_count']),
            page_sizes=[[int(width), int(height)] for width, height in data.get('page_sizes', [])],
            main_file=data.get('main_file'),
            noise_policy=data.get('noise_policy'),
            categories=list(data.get('categories', [])),
            pipeline_version=str(data['pipeline_version']),
            warnings=list(data.get('warnings', [])),
        )


@dataclass
class DocOutcome:
    """Result of one batch input. Timings are seconds per stage."""
    status: DocStatus
    doc_id: Optional[str] = None
    tier: Optional[str] = None
    source_digest: Optional[str] = None
    genome_file: Optional[str] = None
    cached: bool = False
    error: Optional[str] = None
    timings: Dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_timings: bool = True) -> dict:
        data = {
            'status': self.status.value,
            'doc_id': self.doc_id,
            'tier': self.tier,
            'source_digest': self.source_digest,
            'genome_file': self.genome_file,
            'cached': self.cached,
            'error': self.error,
        }
        if include_timings:
            data['timings'] = {stage: canonical_float(seconds, 6) for stage, seconds in sorted(self.timings.items())}
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "DocOutcome":
        return cls(
            status=DocStatus(data['status']),
            doc_id=data.get('doc_id'),
            tier=data.get('tier'),
            source_digest=data.get('source_digest'),
            genome_file=data.get('genome_file'),
            cached=bool(data.get('cached', False)),
            error=data.get('error'),
            timings={stage: float(value) for stage, value in data.get('timings', {}).items()},
        )


@dataclass
class BatchManifest:
    """One outcome per input path, keyed by the path as given to the batch."""
    inputs: List[str] = field(default_factory=list)
    outcomes: Dict[str, DocOutcome] = field(default_factory=dict)
    pipeline_version: str = PIPELINE_VERSION

    @property
    def has_failures(self) -> bool:
        return any(outcome.status != DocStatus.OK for outcome in self.outcomes.values())

    def status_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for outcome in self.outcomes.values():
            counts[outcome.status.value] = counts.get(outcome.status.value, 0) + 1
        return counts

    def to_dict(self, include_timings: bool = True) -> dict:
        return {
            'pipeline_version': self.pipeline_version,
            'inputs': list(self.inputs),
            'outcomes': {path: self.outcomes[path].to_dict(include_timings) for path in sorted(self.outcomes)},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BatchManifest":
        return cls(
            inputs=list(data['inputs']),
            outcomes={path: DocOutcome.from_dict(outcome) for path, outcome in data['outcomes'].items()},
            pipeline_version=data.get('pipeline_version', PIPELINE_VERSION),
        )
