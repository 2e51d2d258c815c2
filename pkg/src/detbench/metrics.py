"""Precision/recall/F1 and the AP/mAP suite, plus cross-fold aggregation.

AP follows the COCO convention: cumulative precision-recall points from a
score-descending sweep, monotone precision envelope, mean over the 101 recall
samples {0.00, 0.01, ..., 1.00}. mAP averages per-class APs; the headline
"mAP" averages over the ten IoU thresholds {0.50, 0.55, ..., 0.95}. Classes
with no ground truth are skipped, never scored zero.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field

from .annotations import Annotation, Detection
from .errors import UndefinedMetricError
from .matcheval import ConfusionCounts, confusion_counts, iou, match_detections

MAP_THRESHOLDS = tuple((50 + 5 * i) / 100 for i in range(10))
RECALL_SAMPLES = tuple(i / 100 for i in range(101))


def precision(c: ConfusionCounts) -> float:
    """TP / (TP + FP); 0 when there are no predictions."""
    total = c.tp + c.fp
    return c.tp / total if total else 0.0


def recall(c: ConfusionCounts) -> float:
    """TP / (TP + FN); 0 when there is no ground truth."""
    total = c.tp + c.fn
    return c.tp / total if total else 0.0


def f1(p: float, r: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class PRPoint:
    recall: float
    precision: float
    score: float


@dataclass(frozen=True)
class APResult:
    category_id: int
    iou_threshold: float
    ap: float
    points: tuple[PRPoint, ...]


def _sweep_pr_points(dets: list[Detection], gts: list[Annotation], iou_thr: float) -> list[PRPoint]:
    """Cumulative PR points from a score-descending greedy sweep (no score cut)."""
    by_image: dict[int, list[Annotation]] = {}
    for g in gts:
        by_image.setdefault(g.image_id, []).append(g)

    order = sorted(range(len(dets)), key=lambda i: (-dets[i].score, i))
    matched: dict[int, set[int]] = {img: set() for img in by_image}
    n_gt = len(gts)
    points: list[PRPoint] = []
    tp = 0
    for rank, i in enumerate(order):
        det = dets[i]
        best_gt = None
        best_iou = 0.0
        if det.bbox.area() > 0:
            for gt in by_image.get(det.image_id, ()):
                if gt.id in matched[det.image_id] or gt.bbox.area() == 0:
                    continue
                from .matcheval import iou as box_iou

                overlap = box_iou(det.bbox, gt.bbox)
                if overlap >= iou_thr and overlap > best_iou:
                    best_iou = overlap
                    best_gt = gt
        if best_gt is not None:
            matched[det.image_id].add(best_gt.id)
            tp += 1
        points.append(PRPoint(recall=tp / n_gt, precision=tp / (rank + 1), score=det.score))
    return points


def _sample_envelope(points: list[PRPoint]) -> float:
    """Mean of the monotone precision envelope at the 101 recall samples."""
    if not points:
        return 0.0
    recalls = [p.recall for p in points]
    envelope = [0.0] * len(points)
    best = 0.0
    for i in range(len(points) - 1, -1, -1):
        best = max(best, points[i].precision)
        envelope[i] = best
    total = 0.0
    for r in RECALL_SAMPLES:
        idx = bisect_left(recalls, r)
        total += envelope[idx] if idx < len(points) else 0.0
    return total / len(RECALL_SAMPLES)


def average_precision(dets: list[Detection], gts: list[Annotation], iou_thr: float) -> APResult:
    """AP for one class at one IoU threshold, possibly spanning several images.

    Crowd regions must already be excluded. Raises UndefinedMetricError when
    the class has no ground truth: such classes are skipped upstream.
    """
    categories = {d.category_id for d in dets} | {g.category_id for g in gts}
    if len(categories) > 1:
        raise ValueError(f"average_precision operates on one class, got {sorted(categories)}")
    if not gts:
        raise UndefinedMetricError("average_precision undefined for a class with no ground truth")
    category_id = next(iter(categories))
    points = _sweep_pr_points(dets, gts, iou_thr)
    return APResult(
        category_id=category_id,
        iou_threshold=iou_thr,
        ap=_sample_envelope(points),
        points=tuple(points),
    )


def mean_ap(aps: list[APResult]) -> float:
    """Arithmetic mean of per-class APs."""
    if not aps:
        raise UndefinedMetricError("mean_ap undefined: every class was skipped")
    return sum(a.ap for a in aps) / len(aps)


@dataclass(frozen=True)
class MapSuite:
    map50: float
    map75: float
    map: float
    by_threshold: dict[float, float]
    per_class: dict[int, dict[float, float]]


def map_suite(dets: list[Detection], gts: list[Annotation]) -> MapSuite:
    """mAP@50, mAP@75 and mAP@[0.5:0.95] over all classes with ground truth."""
    live_gts = [g for g in gts if g.iscrowd == 0]
    class_ids = sorted({g.category_id for g in live_gts})
    if not class_ids:
        raise UndefinedMetricError("map_suite undefined: no class has ground truth")
    dets_by_class = {c: [d for d in dets if d.category_id == c] for c in class_ids}
    gts_by_class = {c: [g for g in live_gts if g.category_id == c] for c in class_ids}

    per_class: dict[int, dict[float, float]] = {c: {} for c in class_ids}
    by_threshold: dict[float, float] = {}
    for thr in MAP_THRESHOLDS:
        aps = [average_precision(dets_by_class[c], gts_by_class[c], thr) for c in class_ids]
        for a in aps:
            per_class[a.category_id][thr] = a.ap
        by_threshold[thr] = mean_ap(aps)

    return MapSuite(
        map50=by_threshold[MAP_THRESHOLDS[0]],
        map75=by_threshold[MAP_THRESHOLDS[5]],
        map=sum(by_threshold[t] for t in MAP_THRESHOLDS) / len(MAP_THRESHOLDS),
        by_threshold=by_threshold,
        per_class=per_class,
    )


@dataclass
class MetricsReport:
    """Metric suite for one (model, dataset, fold) evaluation."""

    precision: float
    recall: float
    f1: float
    map50: float
    map75: float
    map: float
    counts: ConfusionCounts
    per_class_ap: dict[int, dict[float, float]]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    model: str = ""
    dataset: str = ""
    fold: int | None = None
    training_time_s: float | None = None

    def metric_values(self) -> dict[str, float]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "map50": self.map50,
            "map75": self.map75,
            "map": self.map,
        }


def evaluate_detections(
    dataset_gts: list[Annotation],
    dets: list[Detection],
    iou_thr: float = 0.5,
    score_thr: float = 0.5,
    model: str = "",
    dataset: str = "",
    fold: int | None = None,
    training_time_s: float | None = None,
) -> MetricsReport:
    """Run the full metric suite over one set of images.

    P/R/F1 are micro-averaged (pooled counts) at the given operating point;
    the macro variants average per-class P/R over classes with ground truth.
    The mAP suite sweeps all scores, so `score_thr` only affects P/R/F1.
    """
    image_ids = sorted({g.image_id for g in dets} | {g.image_id for g in dataset_gts})
    gts_by_image: dict[int, list[Annotation]] = {i: [] for i in image_ids}
    dets_by_image: dict[int, list[Detection]] = {i: [] for i in image_ids}
    for g in dataset_gts:
        gts_by_image[g.image_id].append(g)
    for d in dets:
        dets_by_image[d.image_id].append(d)

    pooled = ConfusionCounts()
    per_class_counts: dict[int, ConfusionCounts] = {}
    for image_id in image_ids:
        m = match_detections(dets_by_image[image_id], gts_by_image[image_id], iou_thr, score_thr)
        pooled = pooled + confusion_counts(m)
        for cat, entries in m.per_category.items():
            tp = sum(1 for e in entries if e.gt_id is not None)
            fp = sum(1 for e in entries if e.gt_id is None)
            fn = len(m.unmatched_gt_ids.get(cat, ()))
            per_class_counts[cat] = per_class_counts.get(cat, ConfusionCounts()) + ConfusionCounts(tp, fp, fn)

    gt_classes = sorted({g.category_id for g in dataset_gts if g.iscrowd == 0})
    macro_p = macro_r = macro_f = 0.0
    if gt_classes:
        per_class_p = [precision(per_class_counts.get(c, ConfusionCounts())) for c in gt_classes]
        per_class_r = [recall(per_class_counts.get(c, ConfusionCounts())) for c in gt_classes]
        macro_p = sum(per_class_p) / len(gt_classes)
        macro_r = sum(per_class_r) / len(gt_classes)
        macro_f = sum(f1(p, r) for p, r in zip(per_class_p, per_class_r)) / len(gt_classes)

    suite = map_suite(dets, dataset_gts)
    p = precision(pooled)
    r = recall(pooled)
    return MetricsReport(
        precision=p,
        recall=r,
        f1=f1(p, r),
        map50=suite.map50,
        map75=suite.map75,
        map=suite.map,
        counts=pooled,
        per_class_ap=suite.per_class,
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f,
        model=model,
        dataset=dataset,
        fold=fold,
        training_time_s=training_time_s,
    )


METRIC_KEYS = ("precision", "recall", "f1", "map50", "map75", "map")


@dataclass
class AggregateReport:
    """Mean and sample standard deviation of each metric across folds.

    Stores both the mean of per-fold F1 (`mean["f1"]`) and the harmonic mean
    of the averaged precision/recall (`f1_of_means`): the two generally
    differ, so they are labelled distinctly rather than conflated.
    """

    model: str
    dataset: str
    folds: list[int]
    mean: dict[str, float]
    std: dict[str, float]
    per_fold: dict[str, list[float]]
    f1_of_means: float
    training_time_mean_s: float | None = None
    training_time_std_s: float | None = None


def _sample_std(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    m = sum(values) / len(values)
    return math.sqrt(sum((v - m) ** 2 for v in values) / (len(values) - 1))


def aggregate_folds(reports: list[MetricsReport]) -> AggregateReport:
    """Average a model's per-fold reports; all reports must share model and dataset."""
    if not reports:
        raise ValueError("aggregate_folds needs at least one report")
    labels = {(r.model, r.dataset) for r in reports}
    if len(labels) > 1:
        raise ValueError(f"aggregate_folds got mixed model/dataset labels: {sorted(labels)}")
    model, dataset = next(iter(labels))

    ordered = sorted(reports, key=lambda r: (r.fold if r.fold is not None else -1))
    per_fold = {key: [r.metric_values()[key] for r in ordered] for key in METRIC_KEYS}
    mean = {key: sum(vals) / len(vals) for key, vals in per_fold.items()}
    std = {key: _sample_std(vals) for key, vals in per_fold.items()}

    times = [r.training_time_s for r in ordered if r.training_time_s is not None]
    return AggregateReport(
        model=model,
        dataset=dataset,
        folds=[r.fold if r.fold is not None else -1 for r in ordered],
        mean=mean,
        std=std,
        per_fold=per_fold,
        f1_of_means=f1(mean["precision"], mean["recall"]),
        training_time_mean_s=sum(times) / len(times) if times else None,
        training_time_std_s=_sample_std(times) if times else None,
    )
