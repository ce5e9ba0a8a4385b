# tests/test_genome.py

import json

import pytest
from PIL import Image

from texlayout.models.genome import DocStatus
from texlayout.models.page import BBox, RenderStatus
from texlayout.models.quality import Tier
from texlayout.services import genome_service, render_service
from texlayout.services.exceptions import IngestFailed, RasterFailure, SchemaViolation, SourceIOError

from conftest import BROKEN_TEX, FAKE_PAGE_SIZE, GOLDEN_ATTRIBUTES, fake_unit_box, write_tree


def test_golden_document_genome(golden_doc, settings, fake_latex):
    genome = genome_service.run_pipeline(golden_doc, settings)

    assert genome.doc_id == 'golden'
    assert genome.status == DocStatus.OK
    assert genome.main_file == 'main.tex'
    assert genome.noise_policy == 'default-v1'
    assert genome.source_digest.startswith('sha256:')
    assert [unit.attribute.label_name for unit in genome.units] == GOLDEN_ATTRIBUTES
    assert genome.page_count == 1
    assert genome.page_sizes == [list(FAKE_PAGE_SIZE)]
    assert len(genome.relations) == 15
    for unit in genome.units:
        assert unit.render_status == RenderStatus.OK
        assert unit.boxes == [BBox(0, *fake_unit_box(unit.unit_id))]
    assert 'E = mc^2 \\end{equation}' in genome.units[6].normalized_text
    assert '\\label' not in genome.units[6].normalized_text
    assert genome.quality.graded is False
    assert genome.quality.n_boxes == 10


def test_refs_sidecar_grades_the_genome(golden_doc, settings, fake_latex):
    refs = [dict(BBox(0, *fake_unit_box(unit_id)).to_dict(), label='Text') for unit_id in range(10)]
    (golden_doc.parent / 'golden.refs.json').write_text(json.dumps({'provider': 'detector', 'boxes': refs}))

    quality = genome_service.run_pipeline(golden_doc, settings).quality

    assert quality.graded
    assert quality.tier == Tier.TIER1
    assert quality.iou_align == 1.0
    assert quality.iou_intra == 0.0
    assert quality.provider == 'detector'


def test_categories_sidecar(golden_doc, settings, fake_latex):
    (golden_doc.parent / 'golden.categories.json').write_text(json.dumps({'categories': ['cs.CL', 'cs.CV']}))

    assert genome_service.run_pipeline(golden_doc, settings).categories == ['cs.CL', 'cs.CV']


def test_compile_failure_keeps_units_and_relations(tmp_path, settings, fake_latex):
    doc = write_tree(tmp_path / 'broken', {'main.tex': BROKEN_TEX})

    genome = genome_service.run_pipeline(doc, settings)

    assert genome.status == DocStatus.COMPILE_FAILED
    assert [unit.attribute.label_name for unit in genome.units] == ['Title', 'Text']
    assert all(unit.render_status == RenderStatus.COMPILE_FAILED and unit.boxes == [] for unit in genome.units)
    assert genome.relations
    assert genome.quality.n_boxes == 0
    assert genome.quality.tier is None
    assert any(warning.startswith('CompileFailure: baseline did not compile (exit)') for warning in genome.warnings)


def test_raster_failure_marks_document_render_failed(golden_doc, settings, fake_latex, monkeypatch):
    def rasterize(pdf, dpi, settings=None):
        raise RasterFailure(message="no pages")

    monkeypatch.setattr(render_service, 'rasterize', rasterize)

    genome = genome_service.run_pipeline(golden_doc, settings)

    assert genome.status == DocStatus.RENDER_FAILED
    assert all(unit.render_status == RenderStatus.RENDER_FAILED for unit in genome.units)
    assert len(genome.units) == 10


def test_unusable_sources_raise_ingest_failed(tmp_path, settings, fake_latex):
    no_class = write_tree(tmp_path / 'fragment', {'part.tex': 'Just a fragment.\n'})
    empty = tmp_path / 'empty'
    empty.mkdir()

    with pytest.raises(IngestFailed):
        genome_service.run_pipeline(no_class, settings)
    with pytest.raises(IngestFailed):
        genome_service.run_pipeline(empty, settings)
    with pytest.raises(IngestFailed):
        genome_service.run_pipeline(tmp_path / 'missing', settings)
    assert fake_latex['compile'] == 0


def test_serialization_is_deterministic(golden_doc, settings, fake_latex):
    first = genome_service.serialize_genome(genome_service.run_pipeline(golden_doc, settings))
    second = genome_service.serialize_genome(genome_service.run_pipeline(golden_doc, settings))

    assert first == second
    assert first.endswith(b'\n')
    assert genome_service.serialize_genome(genome_service.deserialize_genome(first)) == first


@pytest.fixture
def golden_record(golden_doc, settings, fake_latex):
    return json.loads(genome_service.serialize_genome(genome_service.run_pipeline(golden_doc, settings)))


def _reload(record):
    return genome_service.deserialize_genome(json.dumps(record).encode('utf-8'))


def test_deserialize_rejects_dangling_relation(golden_record):
    golden_record['relations'].append({'from_unit': 0, 'to_unit': 99, 'kind': 'Subordinate'})

    with pytest.raises(SchemaViolation) as excinfo:
        _reload(golden_record)

    assert list(excinfo.value.errors.values()) == ['unknown unit 99']


def test_deserialize_rejects_identical_part_out_of_range(golden_record):
    golden_record['relations'].append({'from_unit': 3, 'to_unit': 3, 'kind': 'Identical', 'from_part': 0, 'to_part': 1})

    with pytest.raises(SchemaViolation) as excinfo:
        _reload(golden_record)

    assert any(key.endswith('.to_part') for key in excinfo.value.errors)


def test_deserialize_rejects_box_outside_page(golden_record):
    golden_record['units'][0]['boxes'][0]['x1'] = FAKE_PAGE_SIZE[0] + 1

    with pytest.raises(SchemaViolation) as excinfo:
        _reload(golden_record)

    assert excinfo.value.errors == {'units[0].boxes[0]': 'box exceeds page 0 size'}


def test_deserialize_rejects_other_schema_versions(golden_record):
    golden_record['schema_version'] = 2

    with pytest.raises(SchemaViolation) as excinfo:
        _reload(golden_record)

    assert 'schema_version' in excinfo.value.errors


def test_deserialize_rejects_malformed_records():
    with pytest.raises(SchemaViolation):
        genome_service.deserialize_genome(b'{"schema_version": 1}')
    with pytest.raises(SchemaViolation):
        genome_service.deserialize_genome(b'not json')


def test_write_and_load_genomes(golden_doc, settings, fake_latex, tmp_path):
    genome = genome_service.run_pipeline(golden_doc, settings)
    out_dir = tmp_path / 'genomes'

    path = genome_service.write_genome(genome, out_dir)

    assert path.name == 'golden.genome.json'
    [loaded] = genome_service.load_genomes(out_dir)
    assert loaded == genome
    with pytest.raises(SourceIOError):
        genome_service.load_genomes(tmp_path / 'nowhere')


def test_render_pages_are_written_as_png(golden_doc, settings, fake_latex, tmp_path):
    run = genome_service.process_document(golden_doc, settings, render_pages=True)

    [path] = genome_service.write_pages(run.pages, tmp_path / 'pages')

    assert path.name == 'page_000.png'
    with Image.open(path) as image:
        assert image.size == FAKE_PAGE_SIZE
    assert set(run.timings) == {'ingest', 'preprocess', 'segment', 'annotate', 'render', 'grade'}


def test_grade_genome_rescales_references(golden_doc, settings, fake_latex, tmp_path):
    genome = genome_service.run_pipeline(golden_doc, settings)
    refs = tmp_path / 'refs.json'
    doubled = [{'page_index': 0, 'x0': 2 * x0, 'y0': 2 * y0, 'x1': 2 * x1, 'y1': 2 * y1}
               for x0, y0, x1, y1 in (fake_unit_box(unit_id) for unit_id in range(10))]
    refs.write_text(json.dumps({'dpi': 300, 'boxes': doubled}))

    graded = genome_service.grade_genome(genome, refs)

    assert graded.quality.tier == Tier.TIER1
    assert graded.quality.iou_align == 1.0
