# texlayout/services/annotate_service.py

from typing import Callable, Dict, List, Optional, Sequence, Tuple

from texlayout.logger import get_logger                                        # Custom application logger
from texlayout.models.unit import (
    AnnotatedUnit, AttributeLabel, Relation, RelationKind, UnitDraft
)
from texlayout.services import tex_scanner                                      # Lexical helpers
from texlayout.services.segment_service import (
    ALGORITHM_ENVIRONMENTS, CODE_ENVIRONMENTS, LIST_ENVIRONMENTS, MATH_ENVIRONMENTS, TABULAR_ENVIRONMENTS
)
from texlayout.utils import normalize_whitespace

logger = get_logger(__name__) # Logger instance for this module

REF_COMMANDS = ('ref', 'eqref', 'autoref', 'cref', 'Cref', 'pageref', 'vref', 'nameref')

_ALGORITHM_KINDS = ALGORITHM_ENVIRONMENTS | {'algorithm', 'algorithm*'}
_CODE_KINDS = CODE_ENVIRONMENTS | {'listing'}
_TABLE_KINDS = TABULAR_ENVIRONMENTS | {'table', 'table*', 'wraptable', 'sidewaystable', 'SCtable', 'longtable'}
_FIGURE_KINDS = {'figure', 'figure*', 'wrapfigure', 'sidewaysfigure', 'SCfigure'}


def _env_in(names) -> Callable[[UnitDraft], bool]:
    return lambda unit: unit.env_name in names


def _has_inline_math(unit: UnitDraft) -> bool:
    text = unit.raw_source
    protected = tex_scanner.RangeSet(tex_scanner.scan_regions(text).verbatim)
    for mark in tex_scanner.marks_outside(text, protected):
        if mark.kind == 'char' and mark.value == '$':
            return True
        if mark.kind == 'control' and mark.value in ('(', 'ensuremath'):
            return True
        if mark.kind == 'control' and mark.value == 'begin':
            head = tex_scanner.begin_at(text, mark.start)
            if head is not None and head.name == 'math':
                return True
    return False


# Ordered rule cascade; the first matching rule decides.
CLASSIFICATION_RULES: List[Tuple[AttributeLabel, Callable[[UnitDraft], bool]]] = [
    (AttributeLabel.PAPER_TITLE, lambda unit: unit.env_kind == 'paper-title'),
    (AttributeLabel.ABSTRACT, lambda unit: unit.env_name == 'abstract'),
    (AttributeLabel.TITLE, lambda unit: unit.env_kind.startswith('section:')),
    (AttributeLabel.CAPTION, lambda unit: unit.env_kind == 'caption'),
    (AttributeLabel.ALGORITHM, _env_in(_ALGORITHM_KINDS)),
    (AttributeLabel.CODE, _env_in(_CODE_KINDS)),
    (AttributeLabel.TABLE, _env_in(_TABLE_KINDS)),
    (AttributeLabel.FIGURE, _env_in(_FIGURE_KINDS)),
    (AttributeLabel.LIST, _env_in(LIST_ENVIRONMENTS)),
    (AttributeLabel.EQUATION, lambda unit: unit.env_kind == 'math:display' or unit.env_name in MATH_ENVIRONMENTS),
    (AttributeLabel.FOOTNOTE, lambda unit: unit.env_kind == 'footnote'),
    (AttributeLabel.TEXT_EQ, _has_inline_math),
]


def classify_unit(unit: UnitDraft) -> AttributeLabel:
    """
    Assigns one of the 13 layout attributes with a deterministic rule
    cascade: PaperTitle > Abstract > Title > Caption > Algorithm > Code >
    Table > Figure > List > Equation > Footnote > Text-EQ > Text.
    """
    for attribute, rule in CLASSIFICATION_RULES:
        if rule(unit):
            return attribute
    return AttributeLabel.TEXT


def normalize_unit_text(raw_source: str) -> str:
    """The unit text without \\label and \\ref-family commands, whitespace collapsed."""
    calls = tex_scanner.find_commands(raw_source, ('label',) + REF_COMMANDS, arity=1, max_optional=0)
    kept, position = [], 0
    for call in calls:
        kept.append(raw_source[position:call.start])
        position = max(position, call.end)
    kept.append(raw_source[position:])
    return normalize_whitespace(''.join(kept))


def _keys(text: str, calls) -> List[str]:
    keys = []
    for call in calls:
        for key in call.arg_text(text).split(','):
            key = key.strip()
            if key and key not in keys:
                keys.append(key)
    return keys


def annotate_units(drafts: Sequence[UnitDraft], warnings: Optional[List[str]] = None) -> List[AnnotatedUnit]:
    """
    Classifies every draft and collects its \\label keys, reference keys and
    footnote marks. Labels inside a float's captions belong to the float;
    labels and references inside a footnote belong to the footnote. A label
    defined twice keeps its first owner and warns about the rest.

    Args:
        drafts: Segmented drafts in reading order.
        warnings (list, optional): Receives DuplicateLabel messages.

    Returns:
        list: AnnotatedUnits in the same order.
    """
    warnings = warnings if warnings is not None else []
    children: Dict[int, List[UnitDraft]] = {}
    for draft in drafts:
        if draft.parent_id is not None:
            children.setdefault(draft.parent_id, []).append(draft)

    owners: Dict[str, int] = {}
    units = []
    for draft in drafts:
        text = draft.raw_source
        protected = tex_scanner.scan_regions(text).verbatim
        own_children = children.get(draft.draft_id, [])
        footnote_spans = tex_scanner.RangeSet(child.source_span for child in own_children if child.env_kind == 'footnote')
        child_spans = tex_scanner.RangeSet(child.source_span for child in own_children)

        labels: List[str] = []
        if draft.env_kind != 'caption':
            label_calls = [call for call in tex_scanner.find_commands(text, ['label'], max_optional=0, protected=protected)
                           if not footnote_spans.contains(draft.start + call.start)]
            for key in _keys(text, label_calls):
                if key in owners:
                    message = f"DuplicateLabel: '{key}' in unit {draft.draft_id} already defined in unit {owners[key]}"
                    warnings.append(message)
                    logger.warning(f"Service: {message}")
                    continue
                owners[key] = draft.draft_id
                labels.append(key)

        ref_calls = [call for call in tex_scanner.find_commands(text, REF_COMMANDS, max_optional=0, protected=protected)
                     if not child_spans.contains(draft.start + call.start)]
        marks = [call for call in tex_scanner.find_commands(text, ['footnotemark'], arity=0, protected=protected)
                 if not child_spans.contains(draft.start + call.start)]
        footnote_marks = sum(1 for child in own_children if child.env_kind == 'footnote') + len(marks)

        units.append(AnnotatedUnit.from_draft(
            draft, classify_unit(draft),
            labels_defined=labels, refs_used=_keys(text, ref_calls), footnote_marks=footnote_marks,
        ))

    logger.debug(f"Service: annotated {len(units)} units, {len(owners)} labels")
    return units


def _is_title(unit: AnnotatedUnit) -> bool:
    return unit.attribute == AttributeLabel.TITLE


def _level(unit: AnnotatedUnit) -> int:
    return unit.level if unit.level is not None else 1


def extract_sequential_relations(units: Sequence[AnnotatedUnit]) -> List[Relation]:
    """
    Reading-order relations:
    TitleAdjacent between a title and the next title of the same level
    before any higher-level title; NonTitleAdjacent between consecutive
    Text/Text-EQ/Equation units, where only a title breaks the chain and
    every other unit is skipped; Subordinate from each
    top-level unit to the nearest preceding title (or the document title),
    and from each title to its enclosing title.
    """
    relations: List[Relation] = []
    top_level = [unit for unit in units if unit.parent_id is None]
    titles = [unit for unit in top_level if _is_title(unit)]
    paper_title = next((unit for unit in top_level if unit.attribute == AttributeLabel.PAPER_TITLE), None)

    for index, title in enumerate(titles):
        for later in titles[index + 1:]:
            if _level(later) < _level(title):
                break
            if _level(later) == _level(title):
                relations.append(Relation(title.unit_id, later.unit_id, RelationKind.TITLE_ADJACENT))
                break

    flowing = {AttributeLabel.TEXT, AttributeLabel.TEXT_EQ, AttributeLabel.EQUATION}
    previous: Optional[AnnotatedUnit] = None
    for unit in top_level:
        if unit.attribute in flowing:
            if previous is not None:
                relations.append(Relation(previous.unit_id, unit.unit_id, RelationKind.NON_TITLE_ADJACENT))
            previous = unit
        elif _is_title(unit) or unit.attribute == AttributeLabel.PAPER_TITLE:
            previous = None

    open_titles: List[AnnotatedUnit] = []
    for unit in top_level:
        if unit.attribute == AttributeLabel.PAPER_TITLE:
            continue
        if _is_title(unit):
            while open_titles and _level(open_titles[-1]) >= _level(unit):
                open_titles.pop()
            parent = open_titles[-1] if open_titles else paper_title
            open_titles.append(unit)
        else:
            parent = open_titles[-1] if open_titles else paper_title
        if parent is not None:
            relations.append(Relation(unit.unit_id, parent.unit_id, RelationKind.SUBORDINATE))

    logger.debug(f"Service: {len(relations)} sequential relations")
    return relations


def extract_reference_relations(units: Sequence[AnnotatedUnit], warnings: Optional[List[str]] = None) -> List[Relation]:
    """
    ExplicitlyReferred edges: unit A -> unit B for every reference key used
    in A and defined in B (one edge per pair), plus parent -> footnote for
    every footnote. Unresolved keys become UnresolvedRef warnings.
    """
    warnings = warnings if warnings is not None else []
    owners: Dict[str, int] = {}
    for unit in units:
        for key in unit.labels_defined:
            owners.setdefault(key, unit.unit_id)

    relations: List[Relation] = []
    seen = set()
    for unit in units:
        for key in unit.refs_used:
            target = owners.get(key)
            if target is None:
                message = f"UnresolvedRef: '{key}' used in unit {unit.unit_id} is never defined"
                warnings.append(message)
                logger.warning(f"Service: {message}")
                continue
            if target == unit.unit_id or (unit.unit_id, target) in seen:
                continue
            seen.add((unit.unit_id, target))
            relations.append(Relation(unit.unit_id, target, RelationKind.EXPLICITLY_REFERRED))

    for unit in units:
        if unit.attribute == AttributeLabel.FOOTNOTE and unit.parent_id is not None \
                and (unit.parent_id, unit.unit_id) not in seen:
            seen.add((unit.parent_id, unit.unit_id))
            relations.append(Relation(unit.parent_id, unit.unit_id, RelationKind.EXPLICITLY_REFERRED))
    return relations


def extract_caption_relations(units: Sequence[AnnotatedUnit], warnings: Optional[List[str]] = None) -> List[Relation]:
    """ImplicitlyReferred edges from each caption to its float; orphan captions only warn."""
    warnings = warnings if warnings is not None else []
    relations = []
    for unit in units:
        if unit.attribute != AttributeLabel.CAPTION:
            continue
        if unit.parent_id is None:
            message = f"OrphanCaption: caption unit {unit.unit_id} is outside any float"
            warnings.append(message)
            logger.warning(f"Service: {message}")
            continue
        relations.append(Relation(unit.unit_id, unit.parent_id, RelationKind.IMPLICITLY_REFERRED))
    return relations


def annotate_document(drafts: Sequence[UnitDraft], warnings: Optional[List[str]] = None) -> Tuple[List[AnnotatedUnit], List[Relation]]:
    """Annotation of one document: attributes plus every non-Identical relation."""
    warnings = warnings if warnings is not None else []
    units = annotate_units(drafts, warnings)
    relations = (extract_sequential_relations(units)
                 + extract_reference_relations(units, warnings)
                 + extract_caption_relations(units, warnings))
    logger.info(f"Service: annotated {len(units)} units with {len(relations)} relations")
    return units, relations
