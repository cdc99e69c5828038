"""Wire formats shared by the HTTP service and its clients.

Sketches travel as stroke JSON (the canonical format; rasters are derived
server-side), masks as run-length bitmaps over the row-major flattening, and
images as base64 PNG.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from ..sketchrep.strokes import Stroke


def rle_encode(mask: np.ndarray) -> dict:
    flat = np.asarray(mask, np.uint8).ravel()
    runs: list[int] = []
    pos = 0
    total = len(flat)
    while pos < total:
        if flat[pos]:
            start = pos
            while pos < total and flat[pos]:
                pos += 1
            runs.extend([int(start), int(pos - start)])
        else:
            pos += 1
    return {"shape": [int(mask.shape[0]), int(mask.shape[1])], "runs": runs}


def rle_decode(obj: dict) -> np.ndarray:
    h, w = (int(x) for x in obj["shape"])
    flat = np.zeros(h * w, np.uint8)
    runs = obj.get("runs", [])
    if len(runs) % 2:
        raise ValueError("rle runs must be (start, length) pairs")
    for start, length in zip(runs[::2], runs[1::2]):
        if start < 0 or length < 0 or start + length > h * w:
            raise ValueError("rle run out of bounds")
        flat[start : start + length] = 1
    return flat.reshape(h, w)


def image_to_b64(image: np.ndarray) -> str:
    arr = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, "RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def image_from_b64(data: str) -> np.ndarray:
    raw = base64.b64decode(data)
    arr = np.asarray(Image.open(io.BytesIO(raw)).convert("RGB"), dtype=np.float32)
    return arr / 255.0


def strokes_from_wire(items: list[dict]) -> list[Stroke]:
    return [
        Stroke(
            points=tuple((float(p[0]), float(p[1])) for p in item["points"]),
            kind=item["kind"],
            width=int(item.get("width", 1)),
        )
        for item in items
    ]
