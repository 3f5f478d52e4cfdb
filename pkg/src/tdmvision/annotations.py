"""Ground-truth records and the JSON manifest format.

A manifest is one JSON document::

    {"split": "train",
     "records": [{"image_id": "a", "file": "img/a.pgm", "width": 640, "height": 480,
                  "group_id": "v1", "capture_period": "day",
                  "gt_boxes": [[x_min, y_min, x_max, y_max], ...]}]}

``capture_period`` and ``condition_tags`` are optional.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .conditions import ConditionTags
from .errors import ManifestParseError, ValidationError
from .frames import BoundingBox, clamp_box

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
CAPTURE_PERIODS = ("day", "dusk_dawn", "night")


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    file: str
    width: int
    height: int
    group_id: str
    gt_boxes: tuple[BoundingBox, ...] = ()
    condition_tags: ConditionTags | None = None
    capture_period: str | None = None

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValidationError(
                f"record {self.image_id!r}: dimensions must be >= 1, got {self.width}x{self.height}"
            )
        if self.capture_period is not None and self.capture_period not in CAPTURE_PERIODS:
            raise ValidationError(
                f"record {self.image_id!r}: unknown capture_period {self.capture_period!r}"
            )
        object.__setattr__(self, "gt_boxes", tuple(self.gt_boxes))


@dataclass(frozen=True)
class Manifest:
    split: str
    records: tuple[AnnotationRecord, ...] = ()
    # number of boxes clamped while parsing; not part of equality
    warnings: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        if self.split not in SPLITS:
            raise ValidationError(f"unknown split {self.split!r}; expected one of {SPLITS}")
        object.__setattr__(self, "records", tuple(self.records))
        seen: set[str] = set()
        for rec in self.records:
            if rec.image_id in seen:
                raise ValidationError(f"duplicate image_id {rec.image_id!r}")
            seen.add(rec.image_id)

    def by_id(self) -> dict[str, AnnotationRecord]:
        return {r.image_id: r for r in self.records}


def _require(obj: dict, key: str, kind: type | tuple[type, ...], where: str) -> Any:
    if key not in obj:
        raise ValidationError(f"{where}: missing field {key!r}")
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, kind):
        raise ValidationError(f"{where}: field {key!r} has wrong type {type(val).__name__}")
    return val


def _parse_record(raw: Any, index: int) -> tuple[AnnotationRecord, int]:
    where = f"record {index}"
    if not isinstance(raw, dict):
        raise ValidationError(f"{where}: expected an object")
    image_id = _require(raw, "image_id", str, where)
    where = f"record {image_id!r}"
    width = _require(raw, "width", int, where)
    height = _require(raw, "height", int, where)
    if width < 1 or height < 1:
        raise ValidationError(f"{where}: dimensions must be >= 1, got {width}x{height}")
    file = _require(raw, "file", str, where)
    group_id = _require(raw, "group_id", str, where)
    boxes_raw = raw.get("gt_boxes", [])
    if not isinstance(boxes_raw, list):
        raise ValidationError(f"{where}: gt_boxes must be a list")

    clamped = 0
    boxes = []
    for coords in boxes_raw:
        if not isinstance(coords, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in coords
        ):
            raise ValidationError(f"{where}: box {coords!r} must be a list of 4 numbers")
        box = BoundingBox.from_seq(coords)
        fixed = clamp_box(box, width, height)
        if fixed != box:
            clamped += 1
        boxes.append(fixed)

    tags = None
    if raw.get("condition_tags") is not None:
        tags = ConditionTags.from_names(raw["condition_tags"])
    period = raw.get("capture_period")
    record = AnnotationRecord(
        image_id=image_id,
        file=file,
        width=width,
        height=height,
        group_id=group_id,
        gt_boxes=tuple(boxes),
        condition_tags=tags,
        capture_period=period,
    )
    return record, clamped


def parse_manifest(data: bytes | str) -> Manifest:
    """Parse manifest JSON text, clamping boxes to their image bounds."""
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestParseError(exc.msg, exc.lineno, exc.colno, exc.pos) from exc
    if not isinstance(doc, dict):
        raise ValidationError("manifest must be a JSON object")
    split = _require(doc, "split", str, "manifest")
    raw_records = doc.get("records", [])
    if not isinstance(raw_records, list):
        raise ValidationError("manifest: records must be a list")

    records = []
    warnings = 0
    for i, raw in enumerate(raw_records):
        rec, clamped = _parse_record(raw, i)
        records.append(rec)
        warnings += clamped
    if warnings:
        log.warning("clamped %d ground-truth box(es) to image bounds", warnings)
    return Manifest(split=split, records=tuple(records), warnings=warnings)


def _record_to_json(rec: AnnotationRecord) -> dict:
    out: dict[str, Any] = {
        "image_id": rec.image_id,
        "file": rec.file,
        "width": rec.width,
        "height": rec.height,
        "group_id": rec.group_id,
    }
    if rec.capture_period is not None:
        out["capture_period"] = rec.capture_period
    out["gt_boxes"] = [list(b.as_tuple()) for b in rec.gt_boxes]
    if rec.condition_tags is not None:
        out["condition_tags"] = list(rec.condition_tags.names())
    return out


def serialize_manifest(m: Manifest) -> bytes:
    doc = {"split": m.split, "records": [_record_to_json(r) for r in m.records]}
    return (json.dumps(doc, indent=1) + "\n").encode("utf-8")


def load_manifest(path: str | Path) -> Manifest:
    return parse_manifest(Path(path).read_bytes())


def save_manifest(m: Manifest, path: str | Path) -> None:
    Path(path).write_bytes(serialize_manifest(m))
