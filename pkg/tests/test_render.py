# tests/test_render.py

from pathlib import Path

import numpy as np
import pytest

from texlayout.models.page import BBox, PageImage, RenderStatus, SplitKind
from texlayout.models.unit import Relation, RelationKind
from texlayout.services import render_service
from texlayout.services.annotate_service import annotate_units
from texlayout.services.exceptions import CompileFailure, PageMismatch
from texlayout.services.segment_service import segment_units

from conftest import FAKE_PAGE_SIZE, GOLDEN_TEX, fake_unit_box, preprocessed, requires_latex


@pytest.fixture(scope='module')
def golden_src():
    return preprocessed(GOLDEN_TEX)


@pytest.fixture(scope='module')
def golden_units(golden_src):
    return annotate_units(segment_units(golden_src))


def _without_marker(text: str) -> str:
    return text.split('\n', 1)[1]


def test_isolation_variant_colours_only_the_target(golden_src, golden_units):
    variant = render_service.build_isolation_variant(golden_src, golden_units, 3)

    assert variant.text.startswith('% texlayout isolation variant: target=3\n')
    assert variant.text.count('\\color{black}') == 1
    assert '\\color{black}Layouts matter' in variant.text
    assert '\\phantom{\\includegraphics' in variant.text


def test_variants_and_baseline_share_one_switch_layout(golden_src, golden_units):
    baseline = render_service.build_blank_baseline(golden_src, golden_units)
    texts = {_without_marker(baseline.text)}
    for target in (0, 3, 6, 9):
        variant = render_service.build_isolation_variant(golden_src, golden_units, target)
        texts.add(_without_marker(variant.text).replace('{black}', '{white}'))

    assert len(texts) == 1
    assert '\\color{black}' not in baseline.text


def test_float_variant_keeps_its_graphic_and_switches_inside_the_body(golden_src, golden_units):
    variant = render_service.build_isolation_variant(golden_src, golden_units, 4)

    assert '\\begin{figure}[t]\\color{black}' in variant.text
    assert '\\phantom{' not in variant.text
    # the caption child is coloured on its own and hands the float colour back
    assert '\\color{white}\\caption{A plot.}\\color{black}' in variant.text


def test_paper_title_switch_goes_inside_the_argument(golden_src, golden_units):
    variant = render_service.build_isolation_variant(golden_src, golden_units, 0)

    assert '\\title{\\color{black}A Study of Layouts}' in variant.text


def test_footnote_becomes_mark_and_coloured_text():
    src = preprocessed('\\documentclass{article}\n\\begin{document}\nClaim\\footnote{Aside.} holds.\n\\end{document}\n')
    units = annotate_units(segment_units(src))

    variant = render_service.build_isolation_variant(src, units, 1)

    assert '\\footnotemark\\footnotetext{\\color{black}Aside.}' in variant.text


def test_full_variant_inks_everything(golden_src, golden_units):
    full = render_service.build_full_variant(golden_src, golden_units)

    assert '\\color{white}' not in full.text
    assert '\\phantom{' not in full.text


def test_unknown_target_is_rejected(golden_src, golden_units):
    with pytest.raises(ValueError):
        render_service.build_isolation_variant(golden_src, golden_units, 99)


def test_render_document_boxes_every_unit(golden_src, golden_units, settings, fake_latex):
    result = render_service.render_document(golden_src, golden_units, settings)

    assert result.page_count == 1
    assert result.page_sizes == [list(FAKE_PAGE_SIZE)]
    assert result.warnings == []
    assert result.relations == []
    assert fake_latex['compile'] == 1 + len(golden_units)
    for unit in golden_units:
        unit_render = result.units[unit.unit_id]
        assert unit_render.status == RenderStatus.OK
        assert unit_render.boxes.boxes == [BBox(0, *fake_unit_box(unit.unit_id))]
        assert unit_render.boxes.split_kind == SplitKind.NONE


def test_render_document_full_render_returns_pages(golden_src, golden_units, settings, fake_latex):
    result = render_service.render_document(golden_src, golden_units, settings, full_render=True)

    assert len(result.pages) == 1
    assert result.pages[0].pixels.min() == 0


def _patch_rasterize(monkeypatch, target: int, make_pages):
    fake = render_service.rasterize

    def rasterize(pdf, dpi, settings=None):
        if f"target={target}\n" in Path(pdf).read_text(encoding='utf-8'):
            return make_pages(dpi)
        return fake(pdf, dpi, settings)

    monkeypatch.setattr(render_service, 'rasterize', rasterize)


def _blank(dpi, pages=1):
    width, height = FAKE_PAGE_SIZE
    return [PageImage(index, dpi, np.full((height, width), 255, dtype=np.uint8)) for index in range(pages)]


def test_split_unit_gets_identical_relations(golden_src, golden_units, settings, fake_latex, monkeypatch):
    def two_columns(dpi):
        [page] = _blank(dpi)
        page.pixels[40:60, 5:40] = 0
        page.pixels[100:130, 150:190] = 0
        return [page]

    _patch_rasterize(monkeypatch, 3, two_columns)

    result = render_service.render_document(golden_src, golden_units, settings)

    boxes = result.units[3].boxes
    assert boxes.boxes == [BBox(0, 5, 40, 40, 60), BBox(0, 150, 100, 190, 130)]
    assert boxes.split_kind == SplitKind.CROSS_COLUMN
    assert result.relations == [Relation(3, 3, RelationKind.IDENTICAL, from_part=0, to_part=1)]


def test_empty_diff_fails_only_that_unit(golden_src, golden_units, settings, fake_latex, monkeypatch):
    _patch_rasterize(monkeypatch, 5, _blank)

    result = render_service.render_document(golden_src, golden_units, settings)

    assert result.units[5].status == RenderStatus.RENDER_FAILED
    assert result.units[5].boxes is None
    assert result.warnings == [result.units[5].error]
    assert result.warnings[0].startswith('EmptyDiff: unit 5')
    assert all(result.units[unit_id].status == RenderStatus.OK for unit_id in result.units if unit_id != 5)


def test_variant_compile_failure_is_a_wrap_failure(golden_src, golden_units, settings, fake_latex, monkeypatch):
    fake = render_service.compile_pdf

    def compile_pdf(src, *args, **kwargs):
        if 'target=2\n' in src.text:
            raise CompileFailure(message="LaTeX engine exited with status 1 (pass 1)", cause='exit')
        return fake(src, *args, **kwargs)

    monkeypatch.setattr(render_service, 'compile_pdf', compile_pdf)

    result = render_service.render_document(golden_src, golden_units, settings)

    assert result.units[2].status == RenderStatus.RENDER_FAILED
    assert result.warnings[0].startswith('WrapFailure: unit 2')


def test_page_count_change_aborts_the_document(golden_src, golden_units, settings, fake_latex, monkeypatch):
    _patch_rasterize(monkeypatch, 1, lambda dpi: _blank(dpi, pages=2))

    with pytest.raises(PageMismatch):
        render_service.render_document(golden_src, golden_units, settings)


def test_baseline_compile_failure_propagates(settings, fake_latex):
    src = preprocessed('\\documentclass{article}\n\\begin{document}\n\\brokenmacro\n\\end{document}\n')

    with pytest.raises(CompileFailure) as excinfo:
        render_service.render_document(src, annotate_units(segment_units(src)), settings)

    assert excinfo.value.cause == 'exit'


def test_scratch_is_removed_after_render(golden_src, golden_units, settings, fake_latex):
    render_service.render_document(golden_src, golden_units, settings)

    assert [path for path in Path(settings.scratch_root).iterdir() if path.name.startswith('texlayout-')] == []


@pytest.mark.latex
@requires_latex
def test_real_engine_renders_simple_document(settings):
    src = preprocessed(
        '\\documentclass{article}\n\\title{Real}\n\\begin{document}\n\\maketitle\n'
        '\\section{One}\nA first paragraph with $x$.\n\n'
        '\\begin{equation}\na = b\n\\end{equation}\n\\end{document}\n'
    )
    units = annotate_units(segment_units(src))

    result = render_service.render_document(src, units, settings)

    assert result.page_count >= 1
    assert all(result.units[unit.unit_id].status == RenderStatus.OK for unit in units)
