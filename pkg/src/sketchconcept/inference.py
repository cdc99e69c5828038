"""Conditional generation and editing applications.

All entry points are deterministic given the seed: the only randomness is
the sampling noise drawn from the seeded generator, and latent blending never
consumes it (so blend identities hold bit-for-bit).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import torch

from .adapters import FeaturePyramid, encode_dual, encode_single, mask_pyramid
from .backbone.model import (
    BaseModel,
    image_to_tensor,
    predict_noise,
    sample,
    tensor_to_image,
)
from .backbone.schedule import sampling_timesteps
from .backbone.text import PromptTokens, multi_concept_prompt, tokenize, tokenize_multi
from .sketchrep.masks import auto_mask
from .sketchrep.strokes import DualSketch, merge_binary, merge_gray
from .trainer import Concept


class BaseMismatchError(ValueError):
    """The concept was trained against a different base model."""


@dataclass
class GenerationRequest:
    """One generation job: concept(s), sketch(es), mask(s), prompt, seed."""

    concept_ids: list[str]
    sketches: list[DualSketch]
    masks: list[np.ndarray]
    prompt: str
    steps: int = 50
    seed: int = 0

    def __post_init__(self):
        if len(self.sketches) != len(self.concept_ids) or len(self.masks) != len(self.concept_ids):
            raise ValueError("need exactly one sketch and one mask per concept")
        if self.prompt.count("[v]") != len(self.concept_ids):
            raise ValueError("prompt must reference every concept token exactly once")


def _check_base(base: BaseModel, concept: Concept) -> None:
    if concept.base_hash and concept.base_hash != base.content_hash():
        raise BaseMismatchError(
            f"concept was trained against base {concept.base_hash[:12]}, "
            f"got {base.content_hash()[:12]}"
        )


def concept_pyramid(concept: Concept, ds: DualSketch, m: np.ndarray) -> FeaturePyramid:
    """Masked feature pyramid for a sketch, honoring the concept's ablations."""
    flags = concept.flags
    if flags.single_sketch:
        pyramid = encode_single(concept.f_c, merge_binary(ds).astype(np.float32))
    elif flags.single_encoder:
        pyramid = encode_single(concept.f_c, merge_gray(ds).astype(np.float32) / 255.0)
    else:
        pyramid = encode_dual(concept.f_c, concept.f_d, ds)
    if flags.no_masked_features:
        return pyramid
    return mask_pyramid(pyramid, m.astype(np.float32))


def generate(
    base: BaseModel,
    concept: Concept,
    ds: DualSketch,
    m: np.ndarray,
    prompt: str,
    seed: int,
    steps: int = 50,
) -> np.ndarray:
    """Sample the concept conditioned on a dual sketch and a [v] prompt."""
    _check_base(base, concept)
    tokens = tokenize(base.vocab, prompt)
    if not tokens.v_positions:
        raise ValueError("generation prompt must contain the [v] token")
    pyramid = concept_pyramid(concept, ds, m)
    return sample(base, tokens, pyramid, steps=steps, seed=seed, v=concept.token.v)


def invert_image(
    base: BaseModel,
    image: np.ndarray,
    prompt: str,
    steps: int = 50,
    v: torch.Tensor | None = None,
) -> list[torch.Tensor]:
    """Deterministic DDIM inversion; trajectory[i] is the latent at ts[i].

    `ts` is the ascending sampling timestep sequence, so the returned list has
    exactly `steps` entries and trajectory[-1] is the fully-noised latent.
    """
    tokens = tokenize(base.vocab, prompt)
    ts = list(reversed(sampling_timesteps(base.schedule.T, steps)))
    z = image_to_tensor(image)[None]
    trajectory: list[torch.Tensor] = []
    with torch.no_grad():
        for i, t_target in enumerate(ts):
            t_source = ts[i - 1] if i > 0 else -1
            eps_hat, _ = predict_noise(base, z, t_target, tokens, v=v)
            ab_s = base.schedule.alpha_bar(t_source)
            ab_t = base.schedule.alpha_bar(t_target)
            x0 = (z - (1.0 - ab_s) ** 0.5 * eps_hat) / ab_s**0.5
            z = ab_t**0.5 * x0 + (1.0 - ab_t) ** 0.5 * eps_hat
            trajectory.append(z.clone())
    return trajectory


def ddim_resample(
    base: BaseModel,
    z_start: torch.Tensor,
    prompt: str,
    steps: int = 50,
    v: torch.Tensor | None = None,
    pyramid: FeaturePyramid | None = None,
) -> np.ndarray:
    """Deterministic DDIM sampling from a given noised latent (inversion mirror)."""
    tokens = tokenize(base.vocab, prompt)
    ts = sampling_timesteps(base.schedule.T, steps)
    z = z_start
    with torch.no_grad():
        for i, t in enumerate(ts):
            t_prev = ts[i + 1] if i + 1 < len(ts) else -1
            eps_hat, _ = predict_noise(base, z, t, tokens, pyramid, v=v)
            ab_t = base.schedule.alpha_bar(t)
            ab_p = base.schedule.alpha_bar(t_prev)
            x0 = (z - (1.0 - ab_t) ** 0.5 * eps_hat) / ab_t**0.5
            z = ab_p**0.5 * x0 + (1.0 - ab_p) ** 0.5 * eps_hat
    return tensor_to_image(z[0])


def local_edit(
    base: BaseModel,
    concept: Concept,
    original: np.ndarray,
    edited: DualSketch,
    m_b: np.ndarray,
    prompt: str,
    seed: int,
    steps: int = 50,
    m: np.ndarray | None = None,
) -> np.ndarray:
    """Regenerate inside the blend mask, keep the inverted background outside.

    At every sampling step the foreground latent is combined with the
    inverted background latent as z = z_fg * M_B + z_bg * (1 - M_B); the final
    step blends against the original image itself.
    """
    _check_base(base, concept)
    if m_b.shape != original.shape[:2]:
        raise ValueError("blend mask must match the image size")
    tokens = tokenize(base.vocab, prompt)
    if not tokens.v_positions:
        raise ValueError("local edit prompt must contain the [v] token")
    if m is None:
        m = auto_mask(edited)
    pyramid = concept_pyramid(concept, edited, m)
    trajectory = invert_image(base, original, prompt, steps=steps, v=concept.token.v)
    ts = sampling_timesteps(base.schedule.T, steps)
    by_t = {t: z for t, z in zip(reversed(ts), trajectory)}
    z0 = image_to_tensor(original)[None]
    blend = torch.from_numpy(m_b.astype(np.float32))[None, None]

    def step_callback(i: int, t_prev: int, z: torch.Tensor) -> torch.Tensor:
        z_bg = z0 if t_prev < 0 else by_t[t_prev]
        return z * blend + z_bg * (1.0 - blend)

    return sample(
        base, tokens, pyramid, steps=steps, seed=seed, v=concept.token.v,
        step_callback=step_callback,
    )


def multi_generate(
    base: BaseModel,
    concepts: list[Concept],
    sketches: list[DualSketch],
    masks: list[np.ndarray],
    seed: int,
    steps: int = 50,
) -> np.ndarray:
    """Plug-and-play composition: masked pyramids summed, tokens joined by "and"."""
    if not concepts:
        raise ValueError("need at least one concept")
    if not (len(concepts) == len(sketches) == len(masks)):
        raise ValueError("need one sketch and one mask per concept")
    for concept in concepts:
        _check_base(base, concept)
    overlap = np.zeros_like(masks[0], dtype=np.int32)
    for m in masks:
        overlap += m.astype(np.int32)
    if (overlap > 1).any():
        warnings.warn("concept masks overlap; features will sum in the shared region")
    pyramids = [
        concept_pyramid(c, ds, m) for c, ds, m in zip(concepts, sketches, masks)
    ]
    summed = reduce(lambda a, b: a + b, pyramids)
    tokens = tokenize_multi(base.vocab, multi_concept_prompt(len(concepts)))
    return sample(
        base, tokens, summed, steps=steps, seed=seed, v=[c.token.v for c in concepts]
    )


def style_variation(
    base: BaseModel,
    concept: Concept,
    ds: DualSketch,
    style_prompt: str,
    seed: int,
    steps: int = 50,
    m: np.ndarray | None = None,
) -> np.ndarray:
    """Geometry from the sketch encoders, style from a [v]-free prompt."""
    _check_base(base, concept)
    tokens = tokenize(base.vocab, style_prompt)
    if tokens.v_positions:
        raise ValueError("style prompt must not contain the [v] token")
    if m is None:
        m = auto_mask(ds)
    pyramid = concept_pyramid(concept, ds, m)
    return sample(base, tokens, pyramid, steps=steps, seed=seed)


def concept_transfer(
    base: BaseModel,
    target: Concept,
    source: Concept,
    original: np.ndarray,
    m_b: np.ndarray,
    ds: DualSketch,
    seed: int,
    prompt: str = "a photo of a [v]",
    steps: int = 50,
) -> np.ndarray:
    """Drive a local edit of the target image with the source concept."""
    _check_base(base, target)
    _check_base(base, source)
    return local_edit(base, source, original, ds, m_b, prompt, seed, steps=steps)
