"""Foreground masks: the filled convex hull of contour ink.

Masks are (H, W) uint8 arrays in {0, 1}. A pixel belongs to the auto mask if
its center lies within HULL_SLACK pixels of the convex hull of the contour
ink pixel centers; the slack keeps hull boundary pixels inside the mask under
float rounding. The filled set is exactly the lattice points of a convex
region, so it is closed under lattice midpoints.
"""

from __future__ import annotations

import numpy as np

from .strokes import DualSketch

HULL_SLACK = 0.5


class MaskError(ValueError):
    """Raised when an automatic mask cannot be derived; draw one manually."""


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain convex hull of (x, y) points, counter-clockwise."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]
    if len(pts) < 3:
        return pts

    def turn(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def half(seq):
        out: list[np.ndarray] = []
        for p in seq:
            while len(out) > 1 and turn(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.asarray(lower[:-1] + upper[:-1])


def fill_convex(hull: np.ndarray, h: int, w: int, slack: float = HULL_SLACK) -> np.ndarray:
    """Rasterize a convex polygon: pixels within `slack` of the hull are set."""
    ys, xs = np.mgrid[0:h, 0:w]
    inside = np.ones((h, w), dtype=bool)
    n = len(hull)
    for i in range(n):
        a = hull[i]
        b = hull[(i + 1) % n]
        edge = b - a
        norm = float(np.hypot(*edge))
        if norm == 0.0:
            continue
        # signed distance of pixel centers to the edge line (positive = inside for CCW hulls)
        cross = edge[0] * (ys - a[1]) - edge[1] * (xs - a[0])
        inside &= cross >= -slack * norm
    return inside.astype(np.uint8)


def auto_mask(ds: DualSketch) -> np.ndarray:
    """Filled convex hull of the contour ink pixels.

    Raises MaskError when the contour has fewer than 3 ink pixels or all ink
    is collinear; callers should fall back to a manual mask.
    """
    ys, xs = np.nonzero(ds.s_c)
    if len(xs) < 3:
        raise MaskError("contour needs at least 3 ink pixels for an automatic mask")
    pts = np.stack([xs, ys], axis=1)
    hull = convex_hull(pts)
    if len(hull) < 3:
        raise MaskError("contour ink is collinear; draw a manual mask")
    h, w = ds.shape
    return fill_convex(hull, h, w)


def validate_mask(m: np.ndarray, shape: tuple[int, int] | None = None) -> np.ndarray:
    m = np.ascontiguousarray(m, dtype=np.uint8)
    if m.ndim != 2 or m.max(initial=0) > 1:
        raise MaskError("mask must be a 2D raster with values in {0,1}")
    if shape is not None and m.shape != tuple(shape):
        raise MaskError(f"mask shape {m.shape} does not match expected {shape}")
    return m
