import json
import random

import pytest

from tdmvision.annotations import (
    AnnotationRecord,
    Manifest,
    parse_manifest,
    serialize_manifest,
)
from tdmvision.conditions import ConditionTags
from tdmvision.errors import ManifestParseError, ValidationError
from tdmvision.frames import BoundingBox


def doc(*records, split="train"):
    return json.dumps({"split": split, "records": list(records)}).encode()


def rec(image_id="a", boxes=((0, 0, 10, 10),), width=100, height=100, **extra):
    return {"image_id": image_id, "file": f"{image_id}.pgm", "width": width, "height": height,
            "group_id": "v1", "gt_boxes": [list(b) for b in boxes], **extra}


def test_one_record():
    m = parse_manifest(doc(rec()))
    assert len(m.records) == 1 and m.warnings == 0
    assert m.records[0].gt_boxes == (BoundingBox(0, 0, 10, 10),)


def test_clamps_with_warning():
    m = parse_manifest(doc(rec(boxes=[(-5, 0, 10, 10)])))
    assert m.records[0].gt_boxes == (BoundingBox(0, 0, 10, 10),)
    assert m.warnings == 1


def test_duplicate_id():
    with pytest.raises(ValidationError, match="'a'"):
        parse_manifest(doc(rec("a"), rec("a")))


def test_negative_dimensions():
    with pytest.raises(ValidationError):
        parse_manifest(doc(rec(width=-3)))


def test_malformed_reports_position():
    with pytest.raises(ManifestParseError) as info:
        parse_manifest(b'{"split": "train",\n "records": [}')
    assert info.value.line == 2
    assert info.value.offset > 0


@pytest.mark.parametrize("bad", [
    {"split": "holdout", "records": []},
    {"split": "train", "records": [{"image_id": "a"}]},
    {"split": "train", "records": [rec(boxes=[(0, 0, 1)])]},
    {"split": "train", "records": [rec(capture_period="noon")]},
])
def test_validation_errors(bad):
    with pytest.raises(ValidationError):
        parse_manifest(json.dumps(bad))


def test_empty_round_trip():
    m = Manifest("val")
    assert parse_manifest(serialize_manifest(m)) == m


def test_serialized_contains_id():
    m = parse_manifest(doc(rec("zebra-17")))
    assert b"zebra-17" in serialize_manifest(m)


def _random_manifest(seed, n):
    rng = random.Random(seed)
    records = []
    for i in range(n):
        w, h = rng.randint(1, 2000), rng.randint(1, 2000)
        boxes = []
        for _ in range(rng.randint(0, 4)):
            x0, x1 = sorted(rng.uniform(0, w) for _ in range(2))
            y0, y1 = sorted(rng.uniform(0, h) for _ in range(2))
            boxes.append(BoundingBox(x0, y0, x1, y1))
        tags = None
        if rng.random() < 0.3:
            tags = ConditionTags(blurred=rng.random() < 0.5, occluded=rng.random() < 0.5)
        records.append(AnnotationRecord(
            image_id=f"img{i}", file=f"d/img{i}.pgm", width=w, height=h,
            group_id=f"g{rng.randint(0, 9)}", gt_boxes=tuple(boxes), condition_tags=tags,
            capture_period=rng.choice([None, "day", "dusk_dawn", "night"]),
        ))
    return Manifest(rng.choice(["train", "val", "test"]), tuple(records))


@pytest.mark.parametrize("seed", range(5))
def test_random_round_trip(seed):
    m = _random_manifest(seed, 50)
    back = parse_manifest(serialize_manifest(m))
    assert back == m
    assert back.warnings == 0
