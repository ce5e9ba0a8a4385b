# tests/test_quality.py

import json
from fractions import Fraction

import numpy as np
import pytest

from texlayout.models.page import BBox
from texlayout.models.quality import ReferenceBox, ReferenceBoxSet, Tier
from texlayout.services import quality_service
from texlayout.services.exceptions import SchemaViolation, SourceIOError

A = BBox(0, 0, 0, 2, 2)
B = BBox(0, 1, 1, 3, 3)
FAR = BBox(0, 10, 10, 12, 12)


def refs(*boxes, provider='detector'):
    return ReferenceBoxSet([ReferenceBox(box) for box in boxes], provider=provider)


def test_jaccard_is_exact():
    assert quality_service.jaccard(A, B) == Fraction(1, 7)
    assert quality_service.jaccard(A, A) == 1
    assert quality_service.jaccard(A, FAR) == 0
    assert quality_service.jaccard(A, BBox(1, 0, 0, 2, 2)) == 0


def _random_box(rng) -> BBox:
    x0, y0 = (int(value) for value in rng.integers(0, 99, size=2))
    return BBox(0, x0, y0, int(rng.integers(x0 + 1, 101)), int(rng.integers(y0 + 1, 101)))


def _pixels(box: BBox) -> np.ndarray:
    mask = np.zeros((100, 100), dtype=bool)
    mask[box.y0:box.y1, box.x0:box.x1] = True
    return mask


def test_jaccard_matches_pixel_count():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        first, second = _random_box(rng), _random_box(rng)
        a, b = _pixels(first), _pixels(second)

        assert quality_service.jaccard(first, second) == Fraction(int((a & b).sum()), int((a | b).sum()))


def test_iou_intra_averages_over_pairs():
    assert quality_service.iou_intra([A, B, FAR]) == Fraction(1, 21)
    assert quality_service.iou_intra([A]) == 0
    assert quality_service.iou_intra([]) == 0


def test_iou_align_takes_best_match_per_reference():
    assert quality_service.iou_align([A, FAR], refs(A, B)) == Fraction(4, 7)


def test_iou_align_without_references_warns():
    warnings = []

    assert quality_service.iou_align([A], refs(), warnings) == 0
    assert warnings[0].startswith('NoReferences')


@pytest.mark.parametrize('intra, align, tier', [
    (0.0003, 0.65, Tier.TIER1),
    (0.005, 0.40, Tier.TIER2),
    (0.0003, 0.50, Tier.TIER3),
    (0.02, 0.99, Tier.TIER3),
    (Fraction(5, 10000), Fraction(65, 100), Tier.TIER2),
    (Fraction(0), Fraction(60, 100), Tier.TIER3),
    (Fraction(1, 1000), Fraction(35, 100), Tier.TIER3),
    (Fraction(1, 100), Fraction(90, 100), Tier.TIER3),
])
def test_assign_tier_boundaries_fall_to_lower_tier(intra, align, tier):
    assert quality_service.assign_tier(intra, align) == tier


def test_grade_without_references_is_ungraded():
    report = quality_service.grade([A, B, FAR])

    assert report.graded is False
    assert report.tier is None
    assert report.n_boxes == 3
    assert report.iou_intra == pytest.approx(1 / 21)


def test_grade_with_references():
    report = quality_service.grade([A, FAR], refs(A, FAR, provider='yolo'))

    assert report.graded
    assert report.tier == Tier.TIER1
    assert report.iou_align == 1.0
    assert report.n_refs == 2
    assert report.provider == 'yolo'


def test_load_reference_boxes_list_form(tmp_path):
    path = tmp_path / 'refs.json'
    path.write_text(json.dumps([{'page_index': 0, 'x0': 1, 'y0': 2, 'x1': 3, 'y1': 4, 'label': 'Text'}]))

    ref_set = quality_service.load_reference_boxes(path)

    assert ref_set.dpi == 150
    assert ref_set.provider == 'unknown'
    assert ref_set.boxes == [ReferenceBox(BBox(0, 1, 2, 3, 4), 'Text')]


def test_load_reference_boxes_rescales_to_genome_dpi(tmp_path):
    path = tmp_path / 'refs.json'
    path.write_text(json.dumps({'provider': 'layoutlm', 'dpi': 300,
                                'boxes': [{'page_index': 0, 'x0': 10, 'y0': 20, 'x1': 30, 'y1': 41}]}))

    ref_set = quality_service.load_reference_boxes(path, dpi=150)

    assert ref_set.dpi == 150
    assert ref_set.bboxes == [BBox(0, 5, 10, 15, 21)]


def test_load_reference_boxes_errors(tmp_path):
    with pytest.raises(SourceIOError):
        quality_service.load_reference_boxes(tmp_path / 'missing.json')

    not_json = tmp_path / 'bad.json'
    not_json.write_text('{not json')
    with pytest.raises(SchemaViolation):
        quality_service.load_reference_boxes(not_json)

    bad_box = tmp_path / 'bad_box.json'
    bad_box.write_text(json.dumps({'boxes': [{'page_index': 0, 'x0': 5, 'y0': 0, 'x1': 1, 'y1': 1}]}))
    with pytest.raises(SchemaViolation) as excinfo:
        quality_service.load_reference_boxes(bad_box)
    assert 'boxes[0]' in excinfo.value.errors

    bad_dpi = tmp_path / 'bad_dpi.json'
    bad_dpi.write_text(json.dumps({'dpi': 0, 'boxes': []}))
    with pytest.raises(SchemaViolation):
        quality_service.load_reference_boxes(bad_dpi)
