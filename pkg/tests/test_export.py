# tests/test_export.py

import json

import pytest
from PIL import Image

from texlayout.models.genome import DocumentGenome
from texlayout.models.quality import QualityReport, Tier
from texlayout.services import export_service, genome_service
from texlayout.services.exceptions import PageMismatch, SchemaViolation, SourceIOError


@pytest.fixture
def golden_run(golden_doc, settings, fake_latex, tmp_path):
    run = genome_service.process_document(golden_doc, settings, render_pages=True)
    genome_service.write_pages(run.pages, tmp_path / 'pages')
    return run.genome


def test_layout_labels_use_normalized_centres(golden_run, tmp_path):
    [path] = export_service.export_layout_labels(golden_run, tmp_path / 'labels')

    lines = path.read_text().splitlines()
    assert path.name == 'golden_page_000.txt'
    assert len(lines) == 10
    assert lines[0] == '12 0.175000 0.041667 0.250000 0.016667'
    assert [int(line.split()[0]) for line in lines] == [12, 14, 10, 9, 3, 1, 2, 8, 10, 8]


def test_layout_labels_read_sizes_from_page_images(golden_run, tmp_path):
    golden_run.page_sizes = []

    with pytest.raises(SchemaViolation):
        export_service.export_layout_labels(golden_run, tmp_path / 'labels')

    [path] = export_service.export_layout_labels(golden_run, tmp_path / 'labels', pages_dir=tmp_path / 'pages')
    assert path.read_text().splitlines()[0] == '12 0.175000 0.041667 0.250000 0.016667'


def test_transformation_pairs_crop_equations(golden_run, tmp_path):
    out_dir = tmp_path / 'pairs'

    path = export_service.export_transformation_pairs(golden_run, tmp_path / 'pages', out_dir)

    [row] = [json.loads(line) for line in path.read_text().splitlines()]
    assert row['attribute'] == 'Equation'
    assert row['image'] == 'images/golden_u0006_p0.png'
    assert row['latex'] == golden_run.units[6].raw_source
    with Image.open(out_dir / row['image']) as crop:
        assert crop.size == (50, 5)
        assert crop.getextrema() == (0, 0)


def test_transformation_pairs_check_page_images(golden_run, tmp_path):
    with pytest.raises(SourceIOError):
        export_service.export_transformation_pairs(golden_run, tmp_path / 'no-pages', tmp_path / 'pairs')

    Image.new('L', (10, 10), 255).save(tmp_path / 'pages' / 'page_000.png')
    with pytest.raises(PageMismatch):
        export_service.export_transformation_pairs(golden_run, tmp_path / 'pages', tmp_path / 'pairs')


def _graded(doc_id, tier, categories):
    return DocumentGenome(doc_id, 'sha256:0', quality=QualityReport(tier=tier, graded=True), categories=categories)


@pytest.fixture
def graded_corpus():
    genomes = [_graded(f"cl-{index}", Tier.TIER1, ['cs.CL']) for index in range(5)]
    genomes += [_graded(f"cv-{index}", Tier.TIER1, ['cs.CV', 'cs.LG']) for index in range(2)]
    genomes += [_graded('cv-low', Tier.TIER2, ['cs.CV']), _graded('plain', Tier.TIER1, [])]
    return genomes


def test_test_split_samples_tier1_per_discipline(graded_corpus):
    split = export_service.select_test_split(graded_corpus, 3, seed=7)

    assert sorted(split) == ['cs.CL', 'cs.CV', 'uncategorized']
    assert len(split['cs.CL']) == 3
    assert split['cs.CV'] == ['cv-0', 'cv-1']
    assert split['uncategorized'] == ['plain']


def test_test_split_ignores_input_order(graded_corpus):
    forward = export_service.select_test_split(graded_corpus, 2, seed=11)
    backward = export_service.select_test_split(list(reversed(graded_corpus)), 2, seed=11)

    assert forward == backward


def test_test_split_rejects_negative_size(graded_corpus):
    with pytest.raises(ValueError):
        export_service.select_test_split(graded_corpus, -1)
