# tests/test_annotate.py

import pytest

from texlayout.models.unit import AttributeLabel, Relation, RelationKind, UnitDraft
from texlayout.services import annotate_service
from texlayout.services.segment_service import segment_units

from conftest import GOLDEN_ATTRIBUTES, GOLDEN_TEX, preprocessed

R = RelationKind


def drafts_of(*blocks):
    """UnitDrafts from (env_kind, raw_source[, parent_id[, level]]) tuples laid out back to back."""
    drafts, offset = [], 0
    for index, block in enumerate(blocks):
        env_kind, raw = block[0], block[1]
        parent_id = block[2] if len(block) > 2 else None
        level = block[3] if len(block) > 3 else None
        drafts.append(UnitDraft(index, index, (offset, offset + len(raw)), env_kind, raw, parent_id, level))
        offset += len(raw) + 1
    return drafts


@pytest.fixture(scope='module')
def golden():
    return annotate_service.annotate_document(segment_units(preprocessed(GOLDEN_TEX)))


def test_golden_attributes(golden):
    units, _ = golden

    assert [unit.attribute.label_name for unit in units] == GOLDEN_ATTRIBUTES


def test_golden_labels_and_references(golden):
    units, _ = golden

    assert units[2].labels_defined == ['sec:intro']
    assert units[4].labels_defined == ['fig:one']
    assert units[5].labels_defined == []
    assert units[6].labels_defined == ['eq:energy']
    assert units[3].refs_used == ['fig:one']
    assert units[9].refs_used == ['eq:energy']


def test_golden_relations(golden):
    _, relations = golden

    assert {(relation.from_unit, relation.to_unit, relation.kind) for relation in relations} == {
        (2, 8, R.TITLE_ADJACENT),
        (3, 6, R.NON_TITLE_ADJACENT), (6, 7, R.NON_TITLE_ADJACENT),
        (1, 0, R.SUBORDINATE), (2, 0, R.SUBORDINATE), (3, 2, R.SUBORDINATE), (4, 2, R.SUBORDINATE),
        (6, 2, R.SUBORDINATE), (7, 2, R.SUBORDINATE), (8, 0, R.SUBORDINATE), (9, 8, R.SUBORDINATE),
        (3, 4, R.EXPLICITLY_REFERRED), (7, 2, R.EXPLICITLY_REFERRED), (9, 6, R.EXPLICITLY_REFERRED),
        (5, 4, R.IMPLICITLY_REFERRED),
    }
    assert len(relations) == 15


@pytest.mark.parametrize('env_kind, raw, expected', [
    ('env:table', '\\begin{table}$x$\\end{table}', AttributeLabel.TABLE),
    ('env:tabular', '\\begin{tabular}{c}a\\end{tabular}', AttributeLabel.TABLE),
    ('env:lstlisting', '\\begin{lstlisting}x\\end{lstlisting}', AttributeLabel.CODE),
    ('env:algorithm', '\\begin{algorithm}x\\end{algorithm}', AttributeLabel.ALGORITHM),
    ('env:enumerate', '\\begin{enumerate}\\item $a$\\end{enumerate}', AttributeLabel.LIST),
    ('env:align*', '\\begin{align*}a\\end{align*}', AttributeLabel.EQUATION),
    ('math:display', '\\[ a \\]', AttributeLabel.EQUATION),
    ('footnote', '\\footnote{$x$}', AttributeLabel.FOOTNOTE),
    ('paragraph', 'Inline \\(a\\) math.', AttributeLabel.TEXT_EQ),
    ('paragraph', 'A price of \\$5.', AttributeLabel.TEXT),
    ('paragraph', 'Code \\verb|$x$| only.', AttributeLabel.TEXT),
    ('section:subsection', '\\subsection{On $x$}', AttributeLabel.TITLE),
])
def test_classification_cascade(env_kind, raw, expected):
    assert annotate_service.classify_unit(UnitDraft(0, 0, (0, len(raw)), env_kind, raw)) == expected


def test_normalize_unit_text_drops_labels_and_references():
    assert annotate_service.normalize_unit_text('See \\ref{a} and\n\\label{b}   x') == 'See and x'


def test_duplicate_label_keeps_first_owner():
    warnings = []
    drafts = drafts_of(('math:display', '\\[ a \\label{k} \\]'), ('math:display', '\\[ b \\label{k} \\]'))

    units = annotate_service.annotate_units(drafts, warnings)

    assert units[0].labels_defined == ['k']
    assert units[1].labels_defined == []
    assert warnings == ["DuplicateLabel: 'k' in unit 1 already defined in unit 0"]


def test_unresolved_reference_warns_without_edge():
    warnings = []
    units = annotate_service.annotate_units(drafts_of(('paragraph', 'See \\ref{nowhere}.')))

    relations = annotate_service.extract_reference_relations(units, warnings)

    assert relations == []
    assert warnings[0].startswith("UnresolvedRef: 'nowhere'")


def test_repeated_references_yield_one_edge():
    units = annotate_service.annotate_units(drafts_of(
        ('math:display', '\\[ a \\label{eq} \\]'),
        ('paragraph', 'By \\eqref{eq} and again \\ref{eq}, also \\cref{eq,eq}.'),
    ))

    assert annotate_service.extract_reference_relations(units) == [Relation(1, 0, R.EXPLICITLY_REFERRED)]


def test_footnote_parent_refers_to_footnote():
    drafts = segment_units(preprocessed(
        '\\documentclass{article}\n\\begin{document}\nClaim\\footnote{See \\ref{x}.} holds.\n\\end{document}\n'
    ))

    units = annotate_service.annotate_units(drafts)
    relations = annotate_service.extract_reference_relations(units, [])

    assert units[0].footnote_marks == 1
    assert units[0].refs_used == []
    assert units[1].refs_used == ['x']
    assert Relation(0, 1, R.EXPLICITLY_REFERRED) in relations


def test_orphan_caption_only_warns():
    warnings = []
    units = annotate_service.annotate_units(drafts_of(('caption', '\\caption{Alone.}')))

    assert annotate_service.extract_caption_relations(units, warnings) == []
    assert warnings[0].startswith('OrphanCaption')


def test_title_hierarchy_relations():
    units = annotate_service.annotate_units(drafts_of(
        ('section:section', '\\section{A}', None, 1),
        ('paragraph', 'a'),
        ('section:subsection', '\\subsection{A.1}', None, 2),
        ('paragraph', 'b'),
        ('section:subsection', '\\subsection{A.2}', None, 2),
        ('section:section', '\\section{B}', None, 1),
    ))

    relations = {(r.from_unit, r.to_unit, r.kind) for r in annotate_service.extract_sequential_relations(units)}

    assert relations == {
        (0, 5, R.TITLE_ADJACENT), (2, 4, R.TITLE_ADJACENT),
        (1, 0, R.SUBORDINATE), (2, 0, R.SUBORDINATE), (3, 2, R.SUBORDINATE), (4, 0, R.SUBORDINATE),
    }


def test_non_title_adjacency_skips_other_units_and_breaks_on_titles():
    units = annotate_service.annotate_units(drafts_of(
        ('paragraph', 'one'),
        ('env:figure', '\\begin{figure}x\\end{figure}'),
        ('math:display', '\\[ y \\]'),
        ('env:itemize', '\\begin{itemize}\\item z\\end{itemize}'),
        ('paragraph', 'two'),
        ('env:verbatim', '\\begin{verbatim}\\end{verbatim}'),
        ('paragraph', 'three'),
        ('section:section', '\\section{Next}', None, 1),
        ('paragraph', 'four'),
    ))

    adjacent = [(r.from_unit, r.to_unit) for r in annotate_service.extract_sequential_relations(units)
                if r.kind == R.NON_TITLE_ADJACENT]

    assert adjacent == [(0, 2), (2, 4), (4, 6)]
