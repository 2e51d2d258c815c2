"""Deterministic synthetic datasets.

Stand-ins for the two benchmark datasets when the real imagery is absent:
same image counts and per-class annotation counts, boxes placed by a fixed
seed so that every build reproduces byte-identical files. Box coordinates are
kept on a half-pixel grid, which keeps geometric round-trips exact.
"""

from __future__ import annotations

import random

from .annotations import Annotation, BoundingBox, Category, Dataset, ImageRecord

PLEIADES_PROFILE = {
    "name": "pleiades",
    "image_count": 103,
    "image_sizes": [(512, 512)],
    "classes": [("Airplane", 276), ("Truncated Airplane", 14)],
    "seed": 0x5EED_01,
}

SSDD_PROFILE = {
    "name": "ssdd",
    "image_count": 1106,
    "image_sizes": [(416, 416), (500, 350), (256, 256)],
    "classes": [("Ship", 2303), ("Truncated Ship", 153)],
    "seed": 0x5EED_02,
}


def synthetic_dataset(profile: dict) -> Dataset:
    rng = random.Random(profile["seed"])
    sizes = profile["image_sizes"]
    images = []
    for i in range(profile["image_count"]):
        width, height = sizes[i % len(sizes)]
        images.append(
            ImageRecord(id=i + 1, file_name=f"{profile['name']}_{i + 1:05d}.png", width=width, height=height)
        )

    categories = [Category(id=ci + 1, name=name) for ci, (name, _) in enumerate(profile["classes"])]

    annotations = []
    ann_id = 0
    for ci, (_, count) in enumerate(profile["classes"]):
        for _ in range(count):
            ann_id += 1
            image = images[rng.randrange(len(images))]
            w = rng.randrange(8, max(9, image.width // 6)) / 1.0
            h = rng.randrange(8, max(9, image.height // 6)) / 1.0
            x = rng.randrange(0, int(image.width - w) + 1) + 0.5 * rng.randrange(2)
            y = rng.randrange(0, int(image.height - h) + 1) + 0.5 * rng.randrange(2)
            x = min(x, image.width - w)
            y = min(y, image.height - h)
            bbox = BoundingBox(x, y, w, h)
            annotations.append(
                Annotation(
                    id=ann_id,
                    image_id=image.id,
                    category_id=categories[ci].id,
                    bbox=bbox,
                    area=bbox.area(),
                    iscrowd=0,
                )
            )

    return Dataset(images=images, categories=categories, annotations=annotations)


def synthetic_pleiades() -> Dataset:
    return synthetic_dataset(PLEIADES_PROFILE)


def synthetic_ssdd() -> Dataset:
    return synthetic_dataset(SSDD_PROFILE)
