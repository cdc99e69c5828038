"""Stroke primitives and dual-sketch rasters.

Conventions used across the package:
  - stroke points are (x, y) pairs in the unit square, origin top-left
  - rasters are (H, W) uint8 arrays with ink = 1, background = 0
  - images are (H, W, 3) float32 arrays in [0, 1]
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import cv2
import numpy as np

STROKE_KINDS = ("contour", "detail")


@dataclass(frozen=True)
class Stroke:
    """A polyline in normalized coordinates, tagged contour or detail."""

    points: tuple[tuple[float, float], ...]
    kind: str = "contour"
    width: int = 1

    def __post_init__(self):
        object.__setattr__(self, "points", tuple((float(x), float(y)) for x, y in self.points))
        if len(self.points) < 2:
            raise ValueError("stroke needs at least 2 points")
        if self.kind not in STROKE_KINDS:
            raise ValueError(f"unknown stroke kind {self.kind!r}")
        if self.width < 1:
            raise ValueError("stroke width must be >= 1 pixel")
        for x, y in self.points:
            if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
                raise ValueError(f"stroke point ({x}, {y}) outside unit square")

    def to_json(self) -> dict:
        return {"kind": self.kind, "width": self.width, "points": [[x, y] for x, y in self.points]}

    @classmethod
    def from_json(cls, obj: dict) -> "Stroke":
        return cls(
            points=tuple((p[0], p[1]) for p in obj["points"]),
            kind=obj["kind"],
            width=int(obj.get("width", 1)),
        )


@dataclass
class DualSketch:
    """Paired binary rasters: contour strokes in s_c, detail strokes in s_d."""

    s_c: np.ndarray
    s_d: np.ndarray

    def __post_init__(self):
        self.s_c = np.ascontiguousarray(self.s_c, dtype=np.uint8)
        self.s_d = np.ascontiguousarray(self.s_d, dtype=np.uint8)
        if self.s_c.shape != self.s_d.shape or self.s_c.ndim != 2:
            raise ValueError("s_c and s_d must be 2D rasters of equal shape")
        for name, r in (("s_c", self.s_c), ("s_d", self.s_d)):
            if r.max(initial=0) > 1:
                raise ValueError(f"{name} must be binary (values in {{0,1}})")

    @property
    def shape(self) -> tuple[int, int]:
        return self.s_c.shape

    def copy(self) -> "DualSketch":
        return DualSketch(self.s_c.copy(), self.s_d.copy())


def _to_px(points: Sequence[tuple[float, float]], h: int, w: int) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    cols = np.rint(pts[:, 0] * (w - 1)).astype(np.int32)
    rows = np.rint(pts[:, 1] * (h - 1)).astype(np.int32)
    return np.stack([cols, rows], axis=1)


def rasterize(strokes: Iterable[Stroke], h: int, w: int) -> DualSketch:
    """Draw strokes into binary rasters, contour and detail separately.

    No anti-aliasing: lines are drawn 8-connected so the result stays binary.
    An empty stroke list yields empty rasters.
    """
    if h < 16 or w < 16:
        raise ValueError("raster size must be at least 16x16")
    layers = {"contour": np.zeros((h, w), np.uint8), "detail": np.zeros((h, w), np.uint8)}
    for stroke in strokes:
        px = _to_px(stroke.points, h, w)
        target = layers[stroke.kind]
        for a, b in zip(px[:-1], px[1:]):
            cv2.line(target, tuple(a), tuple(b), 1, thickness=stroke.width, lineType=cv2.LINE_8)
    return DualSketch(layers["contour"], layers["detail"])


def merge_binary(ds: DualSketch) -> np.ndarray:
    """Union of contour and detail ink as a single binary map (ink = 1).

    This is the single-map encoding consumed by the pretrained base encoder
    and by Stage I.
    """
    return np.maximum(ds.s_c, ds.s_d)


def merge_gray(ds: DualSketch) -> np.ndarray:
    """Single-map gray encoding: background 0, detail 127, contour 255.

    Contour wins where the two overlap. Used by the single-encoder ablation.
    """
    out = np.zeros(ds.shape, np.uint8)
    out[ds.s_d == 1] = 127
    out[ds.s_c == 1] = 255
    return out


def strokes_to_json(strokes: Sequence[Stroke]) -> str:
    return json.dumps([s.to_json() for s in strokes])


def strokes_from_json(text: str) -> list[Stroke]:
    return [Stroke.from_json(obj) for obj in json.loads(text)]
