"""Dual-sketch data model: strokes, rasters, masks, augmentation, synthesis."""

from .augment import AffineParams, augment, sample_params, transform_pair
from .dataset import (
    DEFAULT_TEMPLATES,
    ConceptData,
    EditedSketch,
    TrainingPair,
    load_concept_dir,
    load_image,
    load_mask,
    save_concept_dir,
    save_image,
    save_mask,
)
from .masks import MaskError, auto_mask, convex_hull, fill_convex, validate_mask
from .strokes import (
    DualSketch,
    Stroke,
    merge_binary,
    merge_gray,
    rasterize,
    strokes_from_json,
    strokes_to_json,
)
from .synthetic import (
    FILL_COLORS,
    PLACE_COLORS,
    PLACE_PHRASES,
    SHAPES,
    SIZE,
    STYLES,
    TEXTURES,
    SyntheticConceptSpec,
    apply_style,
    build_pretrain_corpus,
    pretrain_caption,
    render_object,
    synth_concept,
)

__all__ = [
    "AffineParams", "augment", "sample_params", "transform_pair",
    "DEFAULT_TEMPLATES", "ConceptData", "EditedSketch", "TrainingPair",
    "load_concept_dir", "load_image", "load_mask",
    "save_concept_dir", "save_image", "save_mask",
    "MaskError", "auto_mask", "convex_hull", "fill_convex", "validate_mask",
    "DualSketch", "Stroke", "merge_binary", "merge_gray", "rasterize",
    "strokes_from_json", "strokes_to_json",
    "FILL_COLORS", "PLACE_COLORS", "PLACE_PHRASES", "SHAPES", "SIZE", "STYLES",
    "TEXTURES", "SyntheticConceptSpec", "apply_style", "build_pretrain_corpus",
    "pretrain_caption", "render_object", "synth_concept",
]
