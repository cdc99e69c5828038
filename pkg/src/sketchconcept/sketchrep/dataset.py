"""Training pairs and the on-disk dataset manifest.

A dataset directory holds one subdirectory per concept:

    <root>/<concept_id>/
        manifest.json     {"class_name", "templates", "pairs": [...], "edits": [...]}
        pair0.png         8-bit RGB reference image
        pair0.strokes.json
        pair0.mask.png    optional manual mask (overrides the auto mask)
        edit0.strokes.json

Stroke files are JSON lists of {kind, width, points}; rasters are derived at
load time so the stored form stays resolution-independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .masks import auto_mask, validate_mask
from .strokes import DualSketch, Stroke, rasterize, strokes_from_json, strokes_to_json

DEFAULT_TEMPLATES = (
    "a photo of [v] at the beach",
    "a photo of [v] in the jungle",
    "a photo of [v] in the snow",
    "a photo of [v] in the street",
    "a photo of [v] on top of a wooden floor",
    "a photo of [v] with a city in the background",
    "a photo of [v] with a mountain in the background",
    "a photo of [v] with the eiffel tower in the background",
    "a photo of [v] floating on top of water",
    "a photo of [v] in an office",
)

# neutral prompts sampled during concept optimization
TRAIN_TEMPLATES = (
    "a photo of a [v]",
    "a photo of the [v]",
    "a drawing of a [v]",
    "a photo of one [v]",
)


@dataclass
class TrainingPair:
    """One reference image with its dual sketch and foreground mask."""

    image: np.ndarray  # (H, W, 3) float32 in [0, 1]
    sketch: DualSketch
    mask: np.ndarray  # (H, W) uint8 in {0, 1}
    class_name: str
    concept_id: str
    caption: str | None = None  # set for pretraining pairs; concept pairs use templates

    def __post_init__(self):
        self.image = np.ascontiguousarray(self.image, dtype=np.float32)
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ValueError("image must be (H, W, 3)")
        h, w = self.image.shape[:2]
        if self.sketch.shape != (h, w):
            raise ValueError("sketch raster does not match image size")
        self.mask = validate_mask(self.mask, (h, w))

    @property
    def size(self) -> tuple[int, int]:
        return self.image.shape[:2]


@dataclass
class ConceptData:
    concept_id: str
    class_name: str
    templates: tuple[str, ...]
    pairs: list[TrainingPair]
    edits: list["EditedSketch"] = field(default_factory=list)
    pair_strokes: list[list[Stroke]] = field(default_factory=list)
    edit_strokes: list[list[Stroke]] = field(default_factory=list)


@dataclass
class EditedSketch:
    """An edited dual sketch without a paired image, plus evaluation labels."""

    sketch: DualSketch
    mask: np.ndarray
    orientation_deg: float | None = None  # ground-truth texture orientation
    silhouette: np.ndarray | None = None  # ground-truth object region


def save_image(path: Path, image: np.ndarray) -> None:
    arr = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, "RGB").save(path, format="PNG")


def load_image(path: Path) -> np.ndarray:
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=np.float32)
    return arr / 255.0


def save_mask(path: Path, mask: np.ndarray) -> None:
    Image.fromarray((mask * 255).astype(np.uint8), "L").save(path, format="PNG")


def load_mask(path: Path) -> np.ndarray:
    arr = np.asarray(Image.open(path).convert("L"))
    return (arr > 127).astype(np.uint8)


def save_concept_dir(root: Path, data: ConceptData) -> Path:
    """Write a concept directory; strokes are stored, rasters are not."""
    cdir = Path(root) / data.concept_id
    cdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": 1,
        "class_name": data.class_name,
        "templates": list(data.templates),
        "pairs": [],
        "edits": [],
    }
    for i, (pair, strokes) in enumerate(zip(data.pairs, data.pair_strokes)):
        save_image(cdir / f"pair{i}.png", pair.image)
        (cdir / f"pair{i}.strokes.json").write_text(strokes_to_json(strokes))
        entry = {"image": f"pair{i}.png", "strokes": f"pair{i}.strokes.json"}
        save_mask(cdir / f"pair{i}.mask.png", pair.mask)
        entry["mask"] = f"pair{i}.mask.png"
        manifest["pairs"].append(entry)
    for i, (edit, strokes) in enumerate(zip(data.edits, data.edit_strokes)):
        (cdir / f"edit{i}.strokes.json").write_text(strokes_to_json(strokes))
        entry = {"strokes": f"edit{i}.strokes.json"}
        if edit.orientation_deg is not None:
            entry["orientation_deg"] = edit.orientation_deg
        manifest["edits"].append(entry)
    (cdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return cdir


def load_concept_dir(cdir: Path, size: tuple[int, int] = (64, 64)) -> ConceptData:
    """Load and validate one concept directory; rasters are derived here."""
    cdir = Path(cdir)
    manifest = json.loads((cdir / "manifest.json").read_text())
    h, w = size
    concept_id = cdir.name
    pairs: list[TrainingPair] = []
    for entry in manifest["pairs"]:
        image = load_image(cdir / entry["image"])
        if image.shape[:2] != (h, w):
            raise ValueError(f"{entry['image']}: expected {size} image, got {image.shape[:2]}")
        strokes = strokes_from_json((cdir / entry["strokes"]).read_text())
        sketch = rasterize(strokes, h, w)
        if "mask" in entry:
            mask = validate_mask(load_mask(cdir / entry["mask"]), (h, w))
        else:
            mask = auto_mask(sketch)
        pairs.append(TrainingPair(image, sketch, mask, manifest["class_name"], concept_id))
    edits: list[EditedSketch] = []
    for entry in manifest.get("edits", []):
        strokes = strokes_from_json((cdir / entry["strokes"]).read_text())
        sketch = rasterize(strokes, h, w)
        mask = validate_mask(load_mask(cdir / entry["mask"]), (h, w)) if "mask" in entry \
            else auto_mask(sketch)
        edits.append(EditedSketch(sketch, mask, entry.get("orientation_deg")))
    return ConceptData(
        concept_id=concept_id,
        class_name=manifest["class_name"],
        templates=tuple(manifest.get("templates", DEFAULT_TEMPLATES)),
        pairs=pairs,
        edits=edits,
    )
