"""Predictions JSON consumed by the ``metrics`` and ``analyze`` commands.

::

    {"model": "yolo",            # optional, default "model"
     "predictions": [{"image_id": "a", "model": "other",   # optional override
                      "boxes": [{"box": [x0, y0, x1, y1], "score": 0.9, "class_id": 0}]}]}
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ManifestParseError, ValidationError
from .frames import BoundingBox, Detection

DEFAULT_MODEL = "model"


def parse_predictions(data: bytes | str) -> dict[str, dict[str, list[Detection]]]:
    """Return ``{model tag: {image_id: [Detection, ...]}}`` in file order."""
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestParseError(exc.msg, exc.lineno, exc.colno, exc.pos) from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("predictions"), list):
        raise ValidationError("predictions file needs a top-level 'predictions' list")
    default_tag = doc.get("model", DEFAULT_MODEL)

    out: dict[str, dict[str, list[Detection]]] = {}
    for i, entry in enumerate(doc["predictions"]):
        if not isinstance(entry, dict) or not isinstance(entry.get("image_id"), str):
            raise ValidationError(f"prediction {i}: needs a string image_id")
        tag = str(entry.get("model", default_tag))
        dets = out.setdefault(tag, {}).setdefault(entry["image_id"], [])
        for raw in entry.get("boxes", []):
            try:
                dets.append(Detection(
                    BoundingBox.from_seq(raw["box"]),
                    float(raw["score"]),
                    int(raw.get("class_id", 0)),
                ))
            except (KeyError, TypeError) as exc:
                raise ValidationError(
                    f"prediction for {entry['image_id']!r}: malformed box entry {raw!r}"
                ) from exc
    if not out:
        out[default_tag] = {}
    return out


def load_predictions(path: str | Path) -> dict[str, dict[str, list[Detection]]]:
    return parse_predictions(Path(path).read_bytes())


def serialize_predictions(by_image: dict[str, list[Detection]], model: str = DEFAULT_MODEL) -> str:
    doc = {
        "model": model,
        "predictions": [
            {"image_id": image_id,
             "boxes": [{"box": list(d.box.as_tuple()), "score": d.score, "class_id": d.class_id}
                       for d in dets]}
            for image_id, dets in by_image.items()
        ],
    }
    return json.dumps(doc, indent=1)
