"""Joint augmentation of (image, dual sketch, mask) training pairs.

One affine transform (horizontal flip, rotation in [-45, 45] degrees,
translation in [-0.2, 0.2] of the frame size) is sampled per call and applied
identically to every channel. Binary channels are resampled nearest-neighbor
so they stay binary; the image is resampled bilinearly with out-of-frame
regions filled with the image border mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from .dataset import TrainingPair
from .strokes import DualSketch

AUGMENT_PROB = 0.5
MAX_TRANSLATE = 0.2
MAX_ROTATE_DEG = 45.0


@dataclass(frozen=True)
class AffineParams:
    flip: bool
    tx: float  # fraction of width
    ty: float  # fraction of height
    rot_deg: float


def sample_params(rng: np.random.Generator) -> AffineParams | None:
    """Draw augmentation parameters; None means the no-op branch was taken.

    The rng consumption order (gate, flip, tx, ty, rot) is part of the
    reproducibility contract.
    """
    if rng.random() >= AUGMENT_PROB:
        return None
    flip = rng.random() < 0.5
    tx = rng.uniform(-MAX_TRANSLATE, MAX_TRANSLATE)
    ty = rng.uniform(-MAX_TRANSLATE, MAX_TRANSLATE)
    rot = rng.uniform(-MAX_ROTATE_DEG, MAX_ROTATE_DEG)
    return AffineParams(flip, tx, ty, rot)


def _matrix(params: AffineParams, h: int, w: int) -> np.ndarray:
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    theta = math.radians(params.rot_deg)
    c, s = math.cos(theta), math.sin(theta)
    fx = -1.0 if params.flip else 1.0
    # rotate about center after optional flip, then translate
    m = np.array(
        [
            [c * fx, -s, cx - c * fx * cx + s * cy + params.tx * w],
            [s * fx, c, cy - s * fx * cx - c * cy + params.ty * h],
        ],
        dtype=np.float64,
    )
    return m


def border_mean(image: np.ndarray) -> np.ndarray:
    edge = np.concatenate([image[0], image[-1], image[:, 0], image[:, -1]])
    return edge.mean(axis=0)


def apply_binary(raster: np.ndarray, params: AffineParams) -> np.ndarray:
    h, w = raster.shape
    m = _matrix(params, h, w)
    out = cv2.warpAffine(
        raster, m, (w, h), flags=cv2.INTER_NEAREST,
        borderMode=cv2.BORDER_CONSTANT, borderValue=0,
    )
    return (out > 0).astype(np.uint8)


def apply_image(image: np.ndarray, params: AffineParams) -> np.ndarray:
    h, w = image.shape[:2]
    m = _matrix(params, h, w)
    fill = tuple(float(v) for v in border_mean(image))
    out = cv2.warpAffine(
        image, m, (w, h), flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT, borderValue=fill,
    )
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def transform_pair(pair: TrainingPair, params: AffineParams) -> TrainingPair:
    sketch = DualSketch(apply_binary(pair.sketch.s_c, params), apply_binary(pair.sketch.s_d, params))
    return TrainingPair(
        image=apply_image(pair.image, params),
        sketch=sketch,
        mask=apply_binary(pair.mask, params),
        class_name=pair.class_name,
        concept_id=pair.concept_id,
        caption=pair.caption,
    )


def augment(pair: TrainingPair, rng: np.random.Generator) -> TrainingPair:
    """With probability 0.5 apply one sampled affine jointly to all channels."""
    params = sample_params(rng)
    if params is None:
        return pair
    return transform_pair(pair, params)
