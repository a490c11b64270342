import json

import numpy as np
import pytest

from foveakit import FoveationParams, is_diffeomorphic

DATA_KEYS = ("images", "annotations", "categories")


@pytest.fixture
def std_params() -> FoveationParams:
    """The empirically good operating point: alpha=2, p=2, R=1, origin 0."""
    return FoveationParams(ox=0.0, oy=0.0, radius=1.0, alpha=2.0, blend_exp=2.0)


def random_invertible_params(rng: np.random.Generator) -> FoveationParams:
    """Sample parameters and reject combos where the map is not injective.

    Strong contraction over a small radius with a shallow blend exponent
    makes the radial profile non-monotone; those combos are excluded from
    round-trip style tests because the inverse branch is then ambiguous.
    """
    while True:
        params = FoveationParams(
            ox=float(rng.uniform(-0.5, 0.5)),
            oy=float(rng.uniform(-0.5, 0.5)),
            radius=float(rng.uniform(0.3, 1.4)),
            alpha=float(rng.uniform(0.5, 3.0)),
            blend_exp=float(rng.uniform(1.0, 4.0)),
        )
        if is_diffeomorphic(params):
            return params


def make_coco(path, images, annotations, categories) -> str:
    """Write a minimal COCO annotation file; returns the path as str."""
    payload = {
        "images": [{"id": i, "width": w, "height": h}
                   for i, w, h in images],
        "annotations": [
            {"id": k, "image_id": img, "category_id": cat,
             "bbox": list(bbox), "area": bbox[2] * bbox[3], "iscrowd": 0}
            for k, (img, cat, bbox) in enumerate(annotations)],
        "categories": [{"id": cid, "name": name} for cid, name in categories],
    }
    path.write_text(json.dumps(payload))
    return str(path)


def make_results(path, detections) -> str:
    """Write a COCO result list: (image_id, category_id, bbox, score)."""
    payload = [{"image_id": img, "category_id": cat, "bbox": list(bbox),
                "score": score}
               for img, cat, bbox, score in detections]
    path.write_text(json.dumps(payload))
    return str(path)
