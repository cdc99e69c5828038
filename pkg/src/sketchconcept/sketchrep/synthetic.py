"""Synthetic concept corpus: flat-shaded textured shapes with exact labels.

Every rendered object is a filled silhouette (polygon, star, or blob) with an
optional stripe/dot texture at a known orientation. The contour strokes trace
the silhouette; the detail strokes follow the texture flow lines, so each
generated item carries ground truth (silhouette mask, texture orientation)
for the proxy metrics.

Orientation convention: degrees in [0, 180), measured from the x axis with y
pointing down; 0 means horizontal stripes (intensity gradient is vertical).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import cv2
import numpy as np

from .dataset import ConceptData, EditedSketch, TrainingPair
from .masks import auto_mask
from .strokes import DualSketch, Stroke, rasterize

SIZE = 64

PLACE_COLORS: dict[str, tuple[float, float, float]] = {
    "beach": (0.87, 0.78, 0.52),
    "jungle": (0.13, 0.42, 0.17),
    "snow": (0.93, 0.94, 0.97),
    "street": (0.44, 0.44, 0.47),
    "floor": (0.62, 0.43, 0.24),
    "city": (0.56, 0.62, 0.71),
    "mountain": (0.35, 0.42, 0.55),
    "tower": (0.74, 0.69, 0.60),
    "water": (0.17, 0.44, 0.72),
    "office": (0.82, 0.77, 0.66),
}

PLACE_PHRASES: dict[str, str] = {
    "beach": "at the beach",
    "jungle": "in the jungle",
    "snow": "in the snow",
    "street": "in the street",
    "floor": "on top of a wooden floor",
    "city": "with a city in the background",
    "mountain": "with a mountain in the background",
    "tower": "with the eiffel tower in the background",
    "water": "floating on top of water",
    "office": "in an office",
}

FILL_COLORS: dict[str, tuple[float, float, float]] = {
    "red": (0.80, 0.15, 0.15),
    "green": (0.18, 0.62, 0.22),
    "blue": (0.18, 0.30, 0.78),
    "yellow": (0.88, 0.80, 0.16),
    "purple": (0.55, 0.20, 0.65),
    "orange": (0.90, 0.52, 0.12),
}

SHAPES = ("triangle", "square", "pentagon", "hexagon", "star", "blob")
TEXTURES = ("striped", "dotted", "plain")

# style word -> global color transform applied to the whole rendered frame
STYLES = ("photo", "pastel", "charcoal")


def apply_style(image: np.ndarray, style: str) -> np.ndarray:
    if style == "photo":
        return image
    if style == "pastel":
        return (0.55 + 0.45 * image).astype(np.float32)
    if style == "charcoal":
        gray = image.mean(axis=2, keepdims=True)
        return (0.12 + 0.45 * gray * np.ones_like(image)).astype(np.float32)
    raise ValueError(f"unknown style {style!r}")


@dataclass(frozen=True)
class SyntheticConceptSpec:
    """Recipe for one synthetic concept."""

    shape: str = "hexagon"  # one of SHAPES; star/blob give non-convex outlines
    fill_color: tuple[float, float, float] = FILL_COLORS["red"]
    color_word: str = "red"
    texture: str = "striped"
    orientation_deg: float = 30.0
    background_policy: dict[str, tuple[float, float, float]] = field(
        default_factory=lambda: dict(PLACE_COLORS)
    )
    stripe_spacing: float = 7.0
    radius: float = 0.30

    def __post_init__(self):
        if not (0.0 <= self.orientation_deg < 180.0):
            raise ValueError("orientation must be in [0, 180)")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.texture not in TEXTURES:
            raise ValueError(f"unknown texture {self.texture!r}")

    @property
    def class_name(self) -> str:
        return self.shape


def _outline_points(shape: str, rng: np.random.Generator, radius: float) -> np.ndarray:
    """Closed outline polyline in unit coordinates, centered with jitter."""
    cx = 0.5 + rng.uniform(-0.04, 0.04)
    cy = 0.5 + rng.uniform(-0.04, 0.04)
    phase = rng.uniform(0, 2 * math.pi)
    if shape == "star":
        k = 5
        angles = phase + np.arange(2 * k) * math.pi / k
        radii = np.where(np.arange(2 * k) % 2 == 0, radius * 1.15, radius * 0.52)
    elif shape == "blob":
        angles = phase + np.linspace(0, 2 * math.pi, 40, endpoint=False)
        a, b = rng.uniform(0, 2 * math.pi, 2)
        radii = radius * (1 + 0.22 * np.sin(3 * angles + a) + 0.12 * np.sin(5 * angles + b))
    else:
        k = {"triangle": 3, "square": 4, "pentagon": 5, "hexagon": 6}[shape]
        angles = phase + np.arange(k) * 2 * math.pi / k
        radii = radius * (1 + rng.uniform(-0.08, 0.08, k))
    xs = np.clip(cx + radii * np.cos(angles), 0.02, 0.98)
    ys = np.clip(cy + radii * np.sin(angles), 0.02, 0.98)
    pts = np.stack([xs, ys], axis=1)
    return np.concatenate([pts, pts[:1]], axis=0)  # closed


def _silhouette(outline: np.ndarray, h: int = SIZE, w: int = SIZE) -> np.ndarray:
    px = np.rint(outline[:-1] * [w - 1, h - 1]).astype(np.int32)
    sil = np.zeros((h, w), np.uint8)
    cv2.fillPoly(sil, [px], 1)
    return sil


def _band_coord(theta_deg: float, h: int = SIZE, w: int = SIZE) -> np.ndarray:
    """Per-pixel coordinate along the stripe normal (stripes = level sets)."""
    theta = math.radians(theta_deg)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    return -math.sin(theta) * (xs - w / 2) + math.cos(theta) * (ys - h / 2)


def _detail_strokes(sil: np.ndarray, theta_deg: float, spacing: float) -> list[Stroke]:
    """Flow-line strokes along the stripe direction, clipped to the silhouette."""
    h, w = sil.shape
    theta = math.radians(theta_deg)
    d = np.array([math.cos(theta), math.sin(theta)])
    n = np.array([-math.sin(theta), math.cos(theta)])
    center = np.array([w / 2, h / 2])
    strokes: list[Stroke] = []
    half = int(math.ceil(math.hypot(h, w) / (2 * spacing)))
    ts = np.arange(-math.hypot(h, w) / 2, math.hypot(h, w) / 2, 0.5)
    for k in range(-half, half + 1):
        base = center + (k * spacing) * n
        pts = base[None, :] + ts[:, None] * d[None, :]
        cols = np.rint(pts[:, 0]).astype(int)
        rows = np.rint(pts[:, 1]).astype(int)
        ok = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
        ok[ok] = sil[rows[ok], cols[ok]] > 0
        # split the in-silhouette samples into contiguous runs
        idx = np.nonzero(ok)[0]
        if len(idx) == 0:
            continue
        splits = np.nonzero(np.diff(idx) > 1)[0]
        for run in np.split(idx, splits + 1):
            if len(run) < 8:  # < 4 px chord: too short to draw
                continue
            p0 = pts[run[0]] / [w - 1, h - 1]
            p1 = pts[run[-1]] / [w - 1, h - 1]
            p0 = np.clip(p0, 0.0, 1.0)
            p1 = np.clip(p1, 0.0, 1.0)
            strokes.append(Stroke(points=(tuple(p0), tuple(p1)), kind="detail"))
    return strokes


def render_object(
    spec: SyntheticConceptSpec,
    outline: np.ndarray,
    orientation_deg: float,
    background: tuple[float, float, float],
    style: str = "photo",
) -> tuple[np.ndarray, np.ndarray]:
    """Render (image, silhouette) for one object instance."""
    sil = _silhouette(outline)
    img = np.empty((SIZE, SIZE, 3), np.float32)
    img[:] = np.asarray(background, np.float32)
    fill = np.asarray(spec.fill_color, np.float32)
    img[sil == 1] = fill
    if spec.texture == "striped":
        u = _band_coord(orientation_deg)
        bands = (np.mod(u, spec.stripe_spacing) < spec.stripe_spacing * 0.45) & (sil == 1)
        img[bands] = fill * 0.40
    elif spec.texture == "dotted":
        theta = math.radians(orientation_deg)
        ys, xs = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)
        u = math.cos(theta) * (xs - SIZE / 2) + math.sin(theta) * (ys - SIZE / 2)
        v = -math.sin(theta) * (xs - SIZE / 2) + math.cos(theta) * (ys - SIZE / 2)
        s = spec.stripe_spacing
        dots = ((np.mod(u, s) < 2) & (np.mod(v, s) < 2)) & (sil == 1)
        img[dots] = fill * 0.40
    return apply_style(img, style), sil


def object_strokes(
    spec: SyntheticConceptSpec, outline: np.ndarray, orientation_deg: float
) -> list[Stroke]:
    sil = _silhouette(outline)
    strokes = [Stroke(points=tuple(map(tuple, outline)), kind="contour")]
    if spec.texture in ("striped", "dotted"):
        strokes.extend(_detail_strokes(sil, orientation_deg, spec.stripe_spacing))
    return strokes


def synth_concept(
    spec: SyntheticConceptSpec,
    n_pairs: int,
    n_edits: int,
    rng: np.random.Generator,
    concept_id: str = "concept",
) -> ConceptData:
    """Generate training pairs plus edited sketches with ground-truth labels."""
    if n_pairs < 1:
        raise ValueError("need at least one training pair")
    places = sorted(spec.background_policy)
    pairs: list[TrainingPair] = []
    pair_strokes: list[list[Stroke]] = []
    base_outline = None
    for _ in range(n_pairs):
        base_outline = _outline_points(spec.shape, rng, spec.radius)
        place = places[rng.integers(len(places))]
        image, sil = render_object(
            spec, base_outline, spec.orientation_deg, spec.background_policy[place]
        )
        strokes = object_strokes(spec, base_outline, spec.orientation_deg)
        sketch = rasterize(strokes, SIZE, SIZE)
        pairs.append(TrainingPair(image, sketch, auto_mask(sketch), spec.class_name, concept_id))
        pair_strokes.append(strokes)
    textured = spec.texture in ("striped", "dotted")
    edits: list[EditedSketch] = []
    edit_strokes: list[list[Stroke]] = []
    for _ in range(n_edits):
        rotate_by = float(rng.choice([30.0, 45.0, 60.0, 90.0, 120.0]))
        new_theta = float(np.mod(spec.orientation_deg + rotate_by, 180.0))
        # edits start from the last traced outline; half also reshape it
        outline = _outline_points(spec.shape, rng, spec.radius) if rng.random() < 0.5 \
            else base_outline
        sil = _silhouette(outline)
        strokes = object_strokes(spec, outline, new_theta)
        sketch = rasterize(strokes, SIZE, SIZE)
        edits.append(EditedSketch(sketch, auto_mask(sketch), new_theta if textured else None, sil))
        edit_strokes.append(strokes)
    from .dataset import DEFAULT_TEMPLATES

    return ConceptData(
        concept_id=concept_id,
        class_name=spec.class_name,
        templates=DEFAULT_TEMPLATES,
        pairs=pairs,
        edits=edits,
        pair_strokes=pair_strokes,
        edit_strokes=edit_strokes,
    )


def standard_words() -> tuple[str, ...]:
    """Every word the synthetic world and the prompt templates can produce."""
    from .dataset import DEFAULT_TEMPLATES, TRAIN_TEMPLATES

    words: set[str] = {"and"}
    for template in DEFAULT_TEMPLATES + TRAIN_TEMPLATES:
        words.update(template.lower().split())
    words.update(PLACE_COLORS)
    for phrase in PLACE_PHRASES.values():
        words.update(phrase.split())
    words.update(FILL_COLORS)
    words.update(SHAPES)
    words.update(TEXTURES)
    words.update(STYLES)
    words.discard("[v]")
    return tuple(sorted(words))


def pretrain_caption(style: str, color: str, texture: str, shape: str, place: str) -> str:
    noun = f"a {color} {texture} {shape}"
    if style == "photo":
        return f"a photo of {noun} {PLACE_PHRASES[place]}"
    return f"a {style} drawing of {noun} {PLACE_PHRASES[place]}"


def build_pretrain_corpus(n_items: int, rng: np.random.Generator) -> list[TrainingPair]:
    """Captioned (image, sketch, mask) triples for base-model pretraining."""
    colors = sorted(FILL_COLORS)
    places = sorted(PLACE_COLORS)
    items: list[TrainingPair] = []
    for i in range(n_items):
        style = ("photo", "photo", "photo", "pastel", "charcoal")[int(rng.integers(5))]
        color = colors[rng.integers(len(colors))]
        texture = TEXTURES[rng.integers(len(TEXTURES))]
        shape = SHAPES[rng.integers(len(SHAPES))]
        place = places[rng.integers(len(places))]
        theta = float(rng.choice([0.0, 30.0, 60.0, 90.0, 120.0, 150.0]) + rng.uniform(-5, 5)) % 180.0
        spec = SyntheticConceptSpec(
            shape=shape, fill_color=FILL_COLORS[color], color_word=color,
            texture=texture, orientation_deg=theta,
        )
        outline = _outline_points(shape, rng, spec.radius)
        image, sil = render_object(spec, outline, theta, PLACE_COLORS[place], style)
        strokes = object_strokes(spec, outline, theta)
        sketch = rasterize(strokes, SIZE, SIZE)
        items.append(
            TrainingPair(
                image=image, sketch=sketch, mask=auto_mask(sketch),
                class_name=shape, concept_id=f"corpus{i}",
                caption=pretrain_caption(style, color, texture, shape, place),
            )
        )
    return items
