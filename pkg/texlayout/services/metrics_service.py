# texlayout/services/metrics_service.py

import json
import math
from collections import Counter, defaultdict
from fractions import Fraction
from pathlib import Path
from typing import Dict, Hashable, Iterable, List, Sequence, Tuple

import Levenshtein                                                       # Character edit distance
import numpy as np
from nltk.translate.bleu_score import brevity_penalty, closest_ref_length, modified_precision

from texlayout.logger import get_logger                                  # Custom application logger
from texlayout.models.detection import Detection, GroundTruthBox, ScoreReport
from texlayout.models.genome import DocumentGenome
from texlayout.models.page import BBox
from texlayout.models.unit import AttributeLabel
from texlayout.services.exceptions import LengthMismatch, SchemaViolation, SourceIOError, ValidationError
from texlayout.services.quality_service import jaccard

logger = get_logger(__name__) # Logger instance for this module

MAP_THRESHOLDS = tuple(Fraction(50 + 5 * step, 100) for step in range(10))
RECALL_POINTS = np.linspace(0.0, 1.0, 101)
SCORE_TASKS = ('classification', 'grounding', 'transformation', 'detection', 'judge')


def tokenize(text: str) -> List[str]:
    """Unicode-whitespace tokens, case preserved."""
    return text.split()


def edit_distance_raw(a: str, b: str) -> int:
    return Levenshtein.distance(a, b)


def edit_distance_norm(a: str, b: str) -> float:
    """Levenshtein distance over the longer length; two empty strings score 0."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return Levenshtein.distance(a, b) / longest


def jaccard_text(a: str, b: str) -> float:
    """Token-set Jaccard; two empty texts score 1."""
    tokens_a, tokens_b = set(tokenize(a)), set(tokenize(b))
    union = tokens_a | tokens_b
    if not union:
        return 1.0
    return len(tokens_a & tokens_b) / len(union)


def cosine_text(a: str, b: str) -> float:
    """Cosine of token count vectors; 0 when either text has no tokens."""
    counts_a, counts_b = Counter(tokenize(a)), Counter(tokenize(b))
    if not counts_a or not counts_b:
        return 0.0
    vocabulary = sorted(counts_a.keys() | counts_b.keys())
    vector_a = np.array([counts_a[token] for token in vocabulary], dtype=np.int64)
    vector_b = np.array([counts_b[token] for token in vocabulary], dtype=np.int64)
    dot = int(vector_a @ vector_b)
    return dot / math.sqrt(int(vector_a @ vector_a) * int(vector_b @ vector_b))


def bleu(candidate: str, reference: str) -> float:
    """
    Sentence BLEU with uniform weights over n = 1..min(4, candidate length),
    brevity penalty and no smoothing: any empty n-gram overlap scores 0.
    Not symmetric in its arguments.
    """
    hypothesis, references = tokenize(candidate), [tokenize(reference)]
    if not hypothesis:
        return 0.0
    orders = min(4, len(hypothesis))
    precisions = [modified_precision(references, hypothesis, n) for n in range(1, orders + 1)]
    if any(precision.numerator == 0 for precision in precisions):
        return 0.0
    log_mean = sum(math.log(precision.numerator / precision.denominator) for precision in precisions) / orders
    penalty = brevity_penalty(closest_ref_length(references, len(hypothesis)), len(hypothesis))
    return penalty * math.exp(log_mean)


def _average_precision(matched: Sequence[bool], n_ground_truth: int) -> float:
    """Area under the 101-point interpolated precision-recall curve."""
    if not matched or n_ground_truth == 0:
        return 0.0
    true_positives = np.cumsum(np.array(matched, dtype=np.float64))
    false_positives = np.cumsum(1.0 - np.array(matched, dtype=np.float64))
    recall = true_positives / n_ground_truth
    precision = true_positives / (true_positives + false_positives)
    precision = np.maximum.accumulate(precision[::-1])[::-1]
    indices = np.searchsorted(recall, RECALL_POINTS, side='left')
    interpolated = np.array([precision[index] if index < len(precision) else 0.0 for index in indices])
    return float(interpolated.mean())


def _image_key(item) -> Tuple[Hashable, int]:
    return (item.doc_id, item.box.page_index)


def map_50_95(preds: Sequence[Detection], gts: Sequence[GroundTruthBox]) -> float:
    """
    COCO-style mAP@0.5:0.95: for each class present in the ground truth and
    each IoU threshold 0.50, 0.55, ..., 0.95, predictions are matched greedily
    in descending score order to the best unmatched same-class box of the
    same image, and AP is the 101-point interpolated area. AP is averaged
    over thresholds, then over classes.
    """
    classes = sorted({gt.label for gt in gts}, key=lambda label: label.index)
    if not classes:
        return 0.0

    per_class = []
    for label in classes:
        class_gts: Dict[Tuple[Hashable, int], List[BBox]] = defaultdict(list)
        for gt in gts:
            if gt.label == label:
                class_gts[_image_key(gt)].append(gt.box)
        n_ground_truth = sum(len(boxes) for boxes in class_gts.values())
        ranked = sorted((pred for pred in preds if pred.label == label), key=lambda pred: -pred.score)
        ious = [[jaccard(pred.box, box) for box in class_gts.get(_image_key(pred), [])] for pred in ranked]

        threshold_aps = []
        for threshold in MAP_THRESHOLDS:
            taken = {key: [False] * len(boxes) for key, boxes in class_gts.items()}
            matched = []
            for pred, candidate_ious in zip(ranked, ious):
                used = taken.get(_image_key(pred), [])
                best, best_iou = None, None
                for index, iou in enumerate(candidate_ious):
                    if used[index] or iou < threshold:
                        continue
                    if best_iou is None or iou > best_iou:
                        best, best_iou = index, iou
                if best is not None:
                    used[best] = True
                matched.append(best is not None)
            threshold_aps.append(_average_precision(matched, n_ground_truth))
        per_class.append(sum(threshold_aps) / len(threshold_aps))
        logger.debug(f"Service: AP[{label.label_name}] = {per_class[-1]:.4f} over {n_ground_truth} boxes")

    return sum(per_class) / len(per_class)


def top1_accuracy(preds: Sequence, gts: Sequence) -> float:
    """
    Fraction of exact label matches.

    Raises:
        LengthMismatch: If the sequences differ in length.
    """
    if len(preds) != len(gts):
        raise LengthMismatch(message=f"{len(preds)} predictions for {len(gts)} ground-truth labels",
                             errors={'length': f"{len(preds)} != {len(gts)}"})
    if not gts:
        return 0.0
    return sum(1 for pred, gt in zip(preds, gts) if pred == gt) / len(gts)


def judge_accuracy(verdicts: Iterable[bool]) -> float:
    """Share of items an external judge marked correct."""
    verdicts = [bool(verdict) for verdict in verdicts]
    return sum(verdicts) / len(verdicts) if verdicts else 0.0


# --- Scoring prediction files against genomes ---

def load_predictions(path) -> List[dict]:
    """
    Reads a prediction file: a JSON list of objects or JSON Lines.

    Raises:
        SourceIOError: If the file cannot be read.
        SchemaViolation: If it is neither JSON list nor JSON Lines of objects.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise SourceIOError(message=f"Cannot read predictions {path}: {e}", original_exception=e)
    try:
        stripped = text.lstrip()
        if stripped.startswith('['):
            rows = json.loads(text)
        else:
            rows = [json.loads(line) for line in text.splitlines() if line.strip()]
    except json.JSONDecodeError as e:
        raise SchemaViolation(message=f"Prediction file {path} is not JSON or JSON Lines: {e}", original_exception=e)
    if not all(isinstance(row, dict) for row in rows):
        raise SchemaViolation(message=f"Prediction file {path} must contain JSON objects")
    return rows


def unit_key(doc_id: str, unit_id: int) -> str:
    """Identifier of a unit across a genome collection: '<doc_id>:<unit_id>'."""
    return f"{doc_id}:{unit_id}"


def _ground_truth_units(genomes: Sequence[DocumentGenome]) -> Dict[str, object]:
    return {unit_key(genome.doc_id, unit.unit_id): unit for genome in genomes for unit in genome.units}


def _require(row: dict, keys: Sequence[str], index: int) -> None:
    missing = [key for key in keys if key not in row]
    if missing:
        raise SchemaViolation(message=f"Prediction #{index} lacks {', '.join(missing)}",
                              errors={f"[{index}]": f"missing {', '.join(missing)}"})


def _matched_units(predictions: Sequence[dict], units: Dict[str, object], field: str) -> List[Tuple[dict, object]]:
    pairs = []
    for index, row in enumerate(predictions):
        _require(row, ('id', field), index)
        unit = units.get(str(row['id']))
        if unit is None:
            raise ValidationError(message=f"Prediction id '{row['id']}' matches no unit in the ground truth",
                                  errors={f"[{index}].id": str(row['id'])})
        pairs.append((row, unit))
    return pairs


def score_classification(predictions: Sequence[dict], genomes: Sequence[DocumentGenome]) -> List[ScoreReport]:
    pairs = _matched_units(predictions, _ground_truth_units(genomes), 'label')
    try:
        predicted = [AttributeLabel.parse(row['label']) for row, _ in pairs]
    except ValueError as e:
        raise SchemaViolation(message=f"Unknown attribute label in predictions: {e}", original_exception=e)
    accuracy = top1_accuracy(predicted, [unit.attribute for _, unit in pairs])
    return [ScoreReport('top1_accuracy', accuracy, len(pairs))]


def score_text(predictions: Sequence[dict], genomes: Sequence[DocumentGenome]) -> List[ScoreReport]:
    """Grounding and transformation: candidate text against the unit's normalized text."""
    pairs = _matched_units(predictions, _ground_truth_units(genomes), 'text')
    support = len(pairs)
    metrics = {
        'edit_distance_norm': edit_distance_norm,
        'edit_distance_raw': edit_distance_raw,
        'jaccard_similarity': jaccard_text,
        'cosine_similarity': cosine_text,
        'bleu': bleu,
    }
    reports = []
    for name, metric in metrics.items():
        values = [metric(str(row['text']), unit.normalized_text) for row, unit in pairs]
        reports.append(ScoreReport(name, sum(values) / support if support else 0.0, support))
    return reports


def score_detection(predictions: Sequence[dict], genomes: Sequence[DocumentGenome]) -> List[ScoreReport]:
    gts = [
        GroundTruthBox(box, unit.attribute, genome.doc_id)
        for genome in genomes for unit in genome.units for box in unit.boxes
    ]
    preds = []
    for index, row in enumerate(predictions):
        _require(row, ('id', 'page_index', 'box', 'label', 'score'), index)
        try:
            box = row['box']
            if isinstance(box, dict):
                box = [box['x0'], box['y0'], box['x1'], box['y1']]
            x0, y0, x1, y1 = (int(round(float(value))) for value in box)
            preds.append(Detection(BBox(int(row['page_index']), x0, y0, x1, y1),
                                   AttributeLabel.parse(row['label']), float(row['score']), str(row['id'])))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaViolation(message=f"Invalid detection #{index}: {e}",
                                  errors={f"[{index}]": str(e)}, original_exception=e)
    return [ScoreReport('map_50_95', map_50_95(preds, gts), len(gts))]


def score_judge(predictions: Sequence[dict], genomes: Sequence[DocumentGenome] = ()) -> List[ScoreReport]:
    for index, row in enumerate(predictions):
        _require(row, ('id', 'correct'), index)
    return [ScoreReport('judge_accuracy', judge_accuracy(row['correct'] for row in predictions), len(predictions))]


def score_task(task: str, predictions: Sequence[dict], genomes: Sequence[DocumentGenome]) -> List[ScoreReport]:
    """
    Scores a prediction file for one downstream task.

    Args:
        task (str): classification, grounding, transformation, detection or judge.
        predictions (list): Rows from `load_predictions`.
        genomes (list): Ground-truth genomes.

    Returns:
        list: One ScoreReport per metric of the task.

    Raises:
        ValidationError: For an unknown task or predictions that match no unit.
    """
    handlers = {
        'classification': score_classification,
        'grounding': score_text,
        'transformation': score_text,
        'detection': score_detection,
        'judge': score_judge,
    }
    if task not in handlers:
        raise ValidationError(message=f"Unknown scoring task '{task}'", errors={'task': f"one of {', '.join(SCORE_TASKS)}"})
    reports = handlers[task](predictions, genomes)
    logger.info(f"Service: scored {task}: " + ", ".join(f"{report.metric}={report.value:.4f}" for report in reports))
    return reports
