# tests/test_segment.py

import pytest

from texlayout.models.source import FlatSource
from texlayout.services.exceptions import SegmentationError
from texlayout.services.segment_service import segment_units

from conftest import GOLDEN_TEX, preprocessed


def body(content: str) -> FlatSource:
    return FlatSource.from_text('\\documentclass{article}\n\\begin{document}\n' + content + '\n\\end{document}\n')


def test_golden_document_units_in_reading_order():
    src = preprocessed(GOLDEN_TEX)

    drafts = segment_units(src)

    assert [draft.env_kind for draft in drafts] == [
        'paper-title', 'env:abstract', 'section:section', 'paragraph', 'env:figure', 'caption',
        'env:equation', 'paragraph', 'section:section', 'paragraph',
    ]
    assert [draft.draft_id for draft in drafts] == list(range(10))
    assert all(draft.order_index == draft.draft_id for draft in drafts)
    assert all(src.text[draft.start:draft.end] == draft.raw_source for draft in drafts)


def test_golden_document_structure_details():
    drafts = segment_units(preprocessed(GOLDEN_TEX))

    assert drafts[0].raw_source == '\\title{A Study of Layouts}'
    assert drafts[2].raw_source == '\\section{Introduction}\\label{sec:intro}'
    assert drafts[2].level == 1
    assert drafts[5].raw_source == '\\caption{A plot.}'
    assert drafts[5].parent_id == 4
    assert drafts[7].raw_source == 'As shown in Section~\\ref{sec:intro}.'
    assert all(draft.parent_id is None for draft in drafts if draft.draft_id != 5)


def test_blank_lines_separate_paragraphs():
    drafts = segment_units(body('First paragraph.\n\nSecond paragraph.\n   \nThird.'))

    assert [draft.raw_source for draft in drafts] == ['First paragraph.', 'Second paragraph.', 'Third.']


def test_section_levels():
    drafts = segment_units(body('\\section{A}\n\\subsection{B}\n\\paragraph{C} text'))

    assert [(draft.env_kind, draft.level) for draft in drafts[:3]] == [
        ('section:section', 1), ('section:subsection', 2), ('section:paragraph', 4),
    ]


def test_footnotes_become_children_of_their_paragraph():
    drafts = segment_units(body('Claim\\footnote{Proof elsewhere.} holds.'))

    assert [draft.env_kind for draft in drafts] == ['paragraph', 'footnote']
    assert drafts[1].raw_source == '\\footnote{Proof elsewhere.}'
    assert drafts[1].parent_id == 0


def test_subfigure_captions_stay_inside_the_float():
    drafts = segment_units(body(
        '\\begin{figure}\n'
        '\\begin{subfigure}{0.4\\linewidth}\\caption{Inner.}\\end{subfigure}\n'
        '\\caption{Outer.}\n'
        '\\end{figure}'
    ))

    captions = [draft for draft in drafts if draft.env_kind == 'caption']
    assert [caption.raw_source for caption in captions] == ['\\caption{Outer.}']


def test_orphan_caption_is_a_top_level_unit():
    drafts = segment_units(body('\\caption{Lonely.}'))

    assert drafts[0].env_kind == 'caption'
    assert drafts[0].parent_id is None


def test_transparent_and_math_environments():
    drafts = segment_units(body(
        '\\begin{center}\nCentered prose.\n\\end{center}\n\n'
        '\\[ a + b \\]\n\n'
        '\\begin{theorem}Unknown blocks read as prose.\\end{theorem}\n\n'
        '\\begin{itemize}\n\\item one\n\\end{itemize}'
    ))

    assert [draft.env_kind for draft in drafts] == ['paragraph', 'math:display', 'paragraph', 'env:itemize']
    assert drafts[0].raw_source == 'Centered prose.'


def test_escaped_dollar_does_not_open_math():
    drafts = segment_units(body('It costs \\$5.\n\nNext.'))

    assert [draft.raw_source for draft in drafts] == ['It costs \\$5.', 'Next.']


def test_unclosed_environment_is_truncated_with_warning():
    warnings = []

    drafts = segment_units(body('\\begin{itemize}\n\\item never closed'), warnings)

    assert drafts[0].env_kind == 'env:itemize'
    assert drafts[0].raw_source.endswith('never closed\n')
    assert any(warning.startswith('UnclosedEnvironment') for warning in warnings)


@pytest.mark.parametrize('text', [
    '\\documentclass{article}\nNo body at all.',
    '\\begin{document}a\\end{document}\\begin{document}b\\end{document}',
])
def test_document_environment_must_be_unique(text):
    with pytest.raises(SegmentationError):
        segment_units(FlatSource.from_text(text))
