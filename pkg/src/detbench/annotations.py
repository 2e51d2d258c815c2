"""COCO-format dataset and detection-file handling.

Boxes are axis-aligned ``[x, y, width, height]`` with a top-left origin and
continuous pixel coordinates. Parsing keeps records verbatim (no clipping, no
reordering); consistency problems that are not hard parse failures are
surfaced by :func:`validate` as report findings.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from statistics import median

from .errors import IntegrityError, ParseError, SchemaError

# Relative slack allowed between a stored `area` and w*h before it is flagged.
AREA_RTOL = 0.005


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> tuple[float, float, float, float]:
        """(x1, y1, x2, y2) with x2/y2 exclusive."""
        return (self.x, self.y, self.x + self.w, self.y + self.h)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.x, self.y, self.w, self.h))


@dataclass(frozen=True)
class ImageRecord:
    id: int
    file_name: str
    width: int
    height: int


@dataclass(frozen=True)
class Category:
    id: int
    name: str


@dataclass(frozen=True)
class Annotation:
    id: int
    image_id: int
    category_id: int
    bbox: BoundingBox
    area: float
    iscrowd: int = 0


@dataclass(frozen=True)
class Detection:
    image_id: int
    category_id: int
    bbox: BoundingBox
    score: float


@dataclass
class Dataset:
    images: list[ImageRecord]
    categories: list[Category]
    annotations: list[Annotation]

    def images_by_id(self) -> dict[int, ImageRecord]:
        return {im.id: im for im in self.images}

    def categories_by_id(self) -> dict[int, Category]:
        return {c.id: c for c in self.categories}

    def annotations_for_image(self, image_id: int) -> list[Annotation]:
        return [a for a in self.annotations if a.image_id == image_id]


@dataclass(frozen=True)
class Finding:
    kind: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.location}: {self.message}"


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def by_kind(self, kind: str) -> list[Finding]:
        return [f for f in self.findings if f.kind == kind]


@dataclass(frozen=True)
class DatasetStats:
    image_count: int
    annotation_count: int
    per_category: dict[int, int]
    category_names: dict[int, str]
    boxes_per_image: dict[int, int]
    box_area_min: float | None
    box_area_median: float | None
    box_area_max: float | None


def _require(record: dict, name: str, location: str):
    if name not in record:
        raise SchemaError(f"{location}: missing required field '{name}'")
    return record[name]


def _as_int(value, name: str, location: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{location}: field '{name}' must be an integer, got {value!r}")
    return value


def _as_number(value, name: str, location: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{location}: field '{name}' must be a number, got {value!r}")
    return float(value)


def _as_bbox(value, location: str) -> BoundingBox:
    if not isinstance(value, list) or len(value) != 4:
        raise SchemaError(f"{location}: field 'bbox' must be a 4-element array")
    x, y, w, h = (_as_number(v, "bbox", location) for v in value)
    return BoundingBox(x, y, w, h)


def _load_json(path) -> object:
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8", byte_offset=exc.start) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        byte_offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(f"{path}: {exc.msg}", byte_offset=byte_offset) from exc


def parse_dataset(path) -> Dataset:
    """Read a COCO-style annotation file.

    Records are kept verbatim in input order. Raises ParseError for malformed
    text, SchemaError for missing/ill-typed fields and IntegrityError when an
    annotation references an unknown image or category. Everything else
    (duplicate ids, out-of-bounds boxes, stale areas) is left to `validate`.
    """
    data = _load_json(path)
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top level must be an object")
    for member in ("images", "annotations", "categories"):
        if member not in data:
            raise SchemaError(f"{path}: missing required member '{member}'")
        if not isinstance(data[member], list):
            raise SchemaError(f"{path}: member '{member}' must be an array")

    images = []
    for i, rec in enumerate(data["images"]):
        loc = f"images[{i}]"
        images.append(
            ImageRecord(
                id=_as_int(_require(rec, "id", loc), "id", loc),
                file_name=str(_require(rec, "file_name", loc)),
                width=_as_int(_require(rec, "width", loc), "width", loc),
                height=_as_int(_require(rec, "height", loc), "height", loc),
            )
        )

    categories = []
    for i, rec in enumerate(data["categories"]):
        loc = f"categories[{i}]"
        categories.append(
            Category(
                id=_as_int(_require(rec, "id", loc), "id", loc),
                name=str(_require(rec, "name", loc)),
            )
        )

    annotations = []
    for i, rec in enumerate(data["annotations"]):
        loc = f"annotations[{i}]"
        bbox = _as_bbox(_require(rec, "bbox", loc), loc)
        # `area` defaults to w*h when absent; real files often carry stale areas,
        # so a present-but-inconsistent value is a validation finding, not an error.
        area = _as_number(rec["area"], "area", loc) if "area" in rec else bbox.area()
        iscrowd = _as_int(rec["iscrowd"], "iscrowd", loc) if "iscrowd" in rec else 0
        annotations.append(
            Annotation(
                id=_as_int(_require(rec, "id", loc), "id", loc),
                image_id=_as_int(_require(rec, "image_id", loc), "image_id", loc),
                category_id=_as_int(_require(rec, "category_id", loc), "category_id", loc),
                bbox=bbox,
                area=area,
                iscrowd=iscrowd,
            )
        )

    ds = Dataset(images=images, categories=categories, annotations=annotations)
    _check_references(ds, str(path))
    return ds


def _check_references(ds: Dataset, origin: str) -> None:
    image_ids = {im.id for im in ds.images}
    category_ids = {c.id for c in ds.categories}
    bad_images = [a.id for a in ds.annotations if a.image_id not in image_ids]
    bad_categories = [a.id for a in ds.annotations if a.category_id not in category_ids]
    if bad_images or bad_categories:
        raise IntegrityError(
            f"{origin}: annotations with dangling references",
            offending_ids=tuple(sorted(set(bad_images + bad_categories))),
        )


def parse_detections(path, dataset: Dataset) -> list[Detection]:
    """Read a detector-output file and resolve it against `dataset`."""
    data = _load_json(path)
    if not isinstance(data, list):
        raise SchemaError(f"{path}: detections file must be a top-level array")
    image_ids = {im.id for im in dataset.images}
    category_ids = {c.id for c in dataset.categories}
    detections = []
    dangling = []
    for i, rec in enumerate(data):
        loc = f"detections[{i}]"
        if not isinstance(rec, dict):
            raise SchemaError(f"{loc}: must be an object")
        image_id = _as_int(_require(rec, "image_id", loc), "image_id", loc)
        category_id = _as_int(_require(rec, "category_id", loc), "category_id", loc)
        bbox = _as_bbox(_require(rec, "bbox", loc), loc)
        score = _as_number(_require(rec, "score", loc), "score", loc)
        if not 0.0 <= score <= 1.0:
            raise SchemaError(f"{loc}: score {score} outside [0, 1]")
        if image_id not in image_ids or category_id not in category_ids:
            dangling.append(i)
        detections.append(Detection(image_id=image_id, category_id=category_id, bbox=bbox, score=score))
    if dangling:
        raise IntegrityError(f"{path}: detections with dangling references", tuple(dangling))
    return detections


def _check_duplicates(values, kind: str, location: str, findings: list[Finding]) -> None:
    seen = set()
    for v in values:
        if v in seen:
            findings.append(Finding(kind, f"{location} id={v}", "duplicate id"))
        seen.add(v)


def validate(ds: Dataset) -> ValidationReport:
    """List every invariant violation in `ds`; a valid dataset yields an empty report.

    Covered: duplicate ids, dangling references, non-finite or negative box
    geometry, degenerate (zero-area) boxes, boxes leaving their image, stale
    `area` fields and out-of-range `iscrowd` flags. Problems are report
    entries, never exceptions.
    """
    findings: list[Finding] = []
    _check_duplicates([im.id for im in ds.images], "duplicate_image_id", "images", findings)
    _check_duplicates([c.id for c in ds.categories], "duplicate_category_id", "categories", findings)
    _check_duplicates([a.id for a in ds.annotations], "duplicate_annotation_id", "annotations", findings)

    for im in ds.images:
        if im.width <= 0 or im.height <= 0:
            findings.append(
                Finding("bad_image_size", f"images id={im.id}", f"width/height must be positive, got {im.width}x{im.height}")
            )
    for c in ds.categories:
        if not c.name:
            findings.append(Finding("empty_category_name", f"categories id={c.id}", "name must be non-empty"))

    images = ds.images_by_id()
    categories = ds.categories_by_id()
    for a in ds.annotations:
        loc = f"annotations id={a.id}"
        if a.image_id not in images:
            findings.append(Finding("dangling_image_ref", loc, f"image_id {a.image_id} not in images"))
        if a.category_id not in categories:
            findings.append(Finding("dangling_category_ref", loc, f"category_id {a.category_id} not in categories"))
        if a.iscrowd not in (0, 1):
            findings.append(Finding("bad_iscrowd", loc, f"iscrowd must be 0 or 1, got {a.iscrowd}"))

        b = a.bbox
        if not b.is_finite():
            findings.append(Finding("nonfinite_box", loc, f"bbox {b.as_list()} has non-finite values"))
            continue
        if b.w < 0 or b.h < 0:
            findings.append(Finding("negative_box", loc, f"bbox {b.as_list()} has negative extent"))
            continue
        if b.area() == 0:
            findings.append(Finding("degenerate_box", loc, f"bbox {b.as_list()} has zero area"))
        else:
            if abs(a.area - b.area()) > AREA_RTOL * b.area():
                findings.append(Finding("area_mismatch", loc, f"area {a.area} vs bbox area {b.area()}"))
        image = images.get(a.image_id)
        if image is not None and (b.x < 0 or b.y < 0 or b.x + b.w > image.width or b.y + b.h > image.height):
            findings.append(
                Finding("out_of_bounds_box", loc, f"bbox {b.as_list()} leaves image {image.width}x{image.height}")
            )
    return ValidationReport(findings=findings)


def stats(ds: Dataset) -> DatasetStats:
    """Per-category annotation counts, boxes-per-image histogram and box-size summary."""
    per_category = {c.id: 0 for c in ds.categories}
    boxes_on_image = {im.id: 0 for im in ds.images}
    areas = []
    for a in ds.annotations:
        per_category[a.category_id] = per_category.get(a.category_id, 0) + 1
        if a.image_id in boxes_on_image:
            boxes_on_image[a.image_id] += 1
        areas.append(a.bbox.area())

    histogram: dict[int, int] = {}
    for n in boxes_on_image.values():
        histogram[n] = histogram.get(n, 0) + 1

    return DatasetStats(
        image_count=len(ds.images),
        annotation_count=len(ds.annotations),
        per_category=per_category,
        category_names={c.id: c.name for c in ds.categories},
        boxes_per_image=dict(sorted(histogram.items())),
        box_area_min=min(areas) if areas else None,
        box_area_median=median(areas) if areas else None,
        box_area_max=max(areas) if areas else None,
    )


def to_coco_dict(ds: Dataset) -> dict:
    """COCO-schema dict preserving record order; inverse of `parse_dataset`."""
    return {
        "images": [
            {"id": im.id, "file_name": im.file_name, "width": im.width, "height": im.height} for im in ds.images
        ],
        "annotations": [
            {
                "id": a.id,
                "image_id": a.image_id,
                "category_id": a.category_id,
                "bbox": a.bbox.as_list(),
                "area": a.area,
                "iscrowd": a.iscrowd,
            }
            for a in ds.annotations
        ],
        "categories": [{"id": c.id, "name": c.name} for c in ds.categories],
    }


def detections_to_list(detections: list[Detection]) -> list[dict]:
    return [
        {"image_id": d.image_id, "category_id": d.category_id, "bbox": d.bbox.as_list(), "score": d.score}
        for d in detections
    ]


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_coco_dict(ds), fh, indent=2)
        fh.write("\n")


def save_detections(detections: list[Detection], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(detections_to_list(detections), fh, indent=2)
        fh.write("\n")


def dataset_checksum(ds: Dataset) -> str:
    """SHA-256 over the canonical serialized form; stable across re-parses."""
    canonical = json.dumps(to_coco_dict(ds), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
