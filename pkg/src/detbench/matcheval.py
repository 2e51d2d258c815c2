"""Box overlap and greedy prediction-to-ground-truth matching.

Matching is COCO-style: per image, per category, detections in descending
score order each greedily take the unmatched ground truth with the highest
IoU above the threshold. Crowd regions are excluded before matching;
zero-area ground truths can never be matched and count as misses, zero-area
detections are immediate false positives.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .annotations import Annotation, BoundingBox, Detection


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 by convention when the union has zero area."""
    ix1 = max(a.x, b.x)
    iy1 = max(a.y, b.y)
    ix2 = min(a.x + a.w, b.x + b.w)
    iy2 = min(a.y + a.h, b.y + b.h)
    iw = ix2 - ix1
    ih = iy2 - iy1
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    union = a.area() + b.area() - inter
    if union <= 0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class DetectionMatch:
    det_index: int
    gt_id: int | None
    iou: float


@dataclass
class MatchResult:
    """Per-category match lists for one image."""

    image_id: int | None
    iou_threshold: float
    score_threshold: float
    per_category: dict[int, list[DetectionMatch]] = field(default_factory=dict)
    unmatched_gt_ids: dict[int, list[int]] = field(default_factory=dict)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def greedy_match_class(
    dets: list[tuple[int, Detection]],
    gts: list[Annotation],
    iou_thr: float,
) -> tuple[list[DetectionMatch], list[int]]:
    """Match pre-sorted same-class detections against ground truths of one image.

    `dets` carries (original index, detection) already in descending-score
    order. Returns the per-detection match entries plus unmatched gt ids.
    """
    matched_gts: set[int] = set()
    entries: list[DetectionMatch] = []
    for det_index, det in dets:
        if det.bbox.area() == 0:
            entries.append(DetectionMatch(det_index, None, 0.0))
            continue
        best_gt = None
        best_iou = 0.0
        for gt in gts:
            if gt.id in matched_gts or gt.bbox.area() == 0:
                continue
            overlap = iou(det.bbox, gt.bbox)
            if overlap >= iou_thr and overlap > best_iou:
                best_iou = overlap
                best_gt = gt
        if best_gt is not None:
            matched_gts.add(best_gt.id)
            entries.append(DetectionMatch(det_index, best_gt.id, best_iou))
        else:
            entries.append(DetectionMatch(det_index, None, 0.0))
    unmatched = [gt.id for gt in gts if gt.id not in matched_gts]
    return entries, unmatched


def match_detections(
    dets: list[Detection],
    gts: list[Annotation],
    iou_thr: float = 0.5,
    score_thr: float = 0.5,
) -> MatchResult:
    """Greedy one-to-one matching for a single image.

    Detections below `score_thr` are discarded; the rest are processed in
    descending score (ties by input index). Classes never cross-match.
    """
    image_ids = {d.image_id for d in dets} | {g.image_id for g in gts}
    if len(image_ids) > 1:
        raise ValueError(f"match_detections operates on one image, got ids {sorted(image_ids)}")
    image_id = next(iter(image_ids)) if image_ids else None

    kept = [(i, d) for i, d in enumerate(dets) if d.score >= score_thr]
    kept.sort(key=lambda pair: (-pair[1].score, pair[0]))
    live_gts = [g for g in gts if g.iscrowd == 0]

    result = MatchResult(image_id=image_id, iou_threshold=iou_thr, score_threshold=score_thr)
    category_ids = sorted({d.category_id for _, d in kept} | {g.category_id for g in live_gts})
    for cat in category_ids:
        cat_dets = [(i, d) for i, d in kept if d.category_id == cat]
        cat_gts = [g for g in live_gts if g.category_id == cat]
        entries, unmatched = greedy_match_class(cat_dets, cat_gts, iou_thr)
        result.per_category[cat] = entries
        result.unmatched_gt_ids[cat] = unmatched
    return result


def confusion_counts(m: MatchResult) -> ConfusionCounts:
    """Tally matched pairs as TP, leftover detections as FP, leftover ground truths as FN."""
    tp = fp = fn = 0
    for entries in m.per_category.values():
        for e in entries:
            if e.gt_id is None:
                fp += 1
            else:
                tp += 1
    for unmatched in m.unmatched_gt_ids.values():
        fn += len(unmatched)
    return ConfusionCounts(tp=tp, fp=fp, fn=fn)
