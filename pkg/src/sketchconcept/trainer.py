"""Two-stage concept optimization.

Stage I optimizes only the concept token against the frozen base sketch
encoder (merged binary input). Stage II clones that encoder into a contour
and a detail encoder and fine-tunes them jointly with the token. The
denoiser, the text table and the base encoder are never touched; the freeze
contract is checkable via parameter checksums.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch

from .adapters import (
    FeaturePyramid,
    SketchEncoder,
    encode_single,
    mask_pyramid,
    resize_mask,
)
from .backbone.model import BaseModel, image_to_tensor, predict_noise
from .backbone.schedule import forward_diffuse
from .backbone.text import UnknownWordError, tokenize
from .losses import (
    ConceptToken,
    LossTrace,
    LossWeights,
    aggregate_attention,
    rec_loss,
    reg_loss,
    shape_loss,
    total_loss,
)
from .sketchrep.augment import augment
from .sketchrep.dataset import TRAIN_TEMPLATES, TrainingPair
from .sketchrep.strokes import merge_binary, merge_gray

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class StageConfig:
    steps: int = 400
    batch_size: int = 4  # paper setting is 16; 4 is the desk default
    lr: float = 5e-4
    seed: int = 0
    augment: bool = True
    grad_clip: float | None = 1.0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")

    @classmethod
    def paper_stage1(cls, seed: int = 0) -> "StageConfig":
        return cls(steps=400, batch_size=16, lr=5e-4, seed=seed, grad_clip=None)

    @classmethod
    def paper_stage2(cls, seed: int = 0) -> "StageConfig":
        return cls(steps=400, batch_size=16, lr=2e-6, seed=seed, grad_clip=None)

    @classmethod
    def desk_stage1(cls, seed: int = 0, steps: int = 150) -> "StageConfig":
        return cls(steps=steps, batch_size=3, lr=2e-2, seed=seed)

    @classmethod
    def desk_stage2(cls, seed: int = 0, steps: int = 150) -> "StageConfig":
        return cls(steps=steps, batch_size=3, lr=2e-3, seed=seed)


@dataclass(frozen=True)
class AblationFlags:
    single_sketch: bool = False
    single_encoder: bool = False
    no_shape_loss: bool = False
    no_reg_loss: bool = False
    no_masked_features: bool = False
    skip_stage1: bool = False

    @classmethod
    def parse(cls, names: str) -> "AblationFlags":
        """Build from a comma-separated list like "single_sketch,no_reg_loss"."""
        fields = {f: False for f in cls.__dataclass_fields__}
        for name in filter(None, (n.strip() for n in names.split(","))):
            if name in ("full", "none"):
                continue
            if name not in fields:
                raise ValueError(f"unknown ablation flag {name!r}")
            fields[name] = True
        return cls(**fields)

    def uses_one_encoder(self) -> bool:
        return self.single_sketch or self.single_encoder


@dataclass
class Concept:
    """The persisted unit of personalization: token plus fine-tuned encoders."""

    token: ConceptToken
    f_c: SketchEncoder | None
    f_d: SketchEncoder | None
    class_name: str
    flags: AblationFlags
    manifest: dict = field(default_factory=dict)

    @property
    def base_hash(self) -> str:
        return self.manifest.get("base_hash", "")

    def encoders(self) -> list[SketchEncoder]:
        return [e for e in (self.f_c, self.f_d) if e is not None]


def init_token(class_name: str, base: BaseModel) -> ConceptToken:
    """Concept token initialized from the class word's table row (a copy)."""
    words = class_name.lower().split()
    if not words:
        raise UnknownWordError("empty class name")
    word_id = base.vocab.id_of(words[0])
    row = base.table.weight[word_id].detach().clone()
    return ConceptToken(v=row, class_name=class_name)


def _weights(flags: AblationFlags) -> LossWeights:
    base = LossWeights()
    return LossWeights(
        lambda_shape=0.0 if flags.no_shape_loss else base.lambda_shape,
        lambda_reg=0.0 if flags.no_reg_loss else base.lambda_reg,
    )


def _sketch_batch(pairs: list[TrainingPair], mode: str) -> torch.Tensor:
    if mode == "merged":
        rasters = [merge_binary(p.sketch).astype(np.float32) for p in pairs]
    elif mode == "gray":
        rasters = [merge_gray(p.sketch).astype(np.float32) / 255.0 for p in pairs]
    else:
        raise ValueError(mode)
    return torch.from_numpy(np.stack(rasters))[:, None]


def _stage_pyramid(
    base: BaseModel,
    encoders: dict[str, SketchEncoder],
    pairs: list[TrainingPair],
    masks: torch.Tensor,
    stage: int,
    flags: AblationFlags,
) -> FeaturePyramid:
    if stage == 1:
        pyramid = encode_single(base.sketch_encoder, _sketch_batch(pairs, "merged"))
    elif flags.single_sketch:
        pyramid = encode_single(encoders["f_c"], _sketch_batch(pairs, "merged"))
    elif flags.single_encoder:
        pyramid = encode_single(encoders["f_c"], _sketch_batch(pairs, "gray"))
    else:
        s_c = torch.from_numpy(np.stack([p.sketch.s_c for p in pairs]).astype(np.float32))[:, None]
        s_d = torch.from_numpy(np.stack([p.sketch.s_d for p in pairs]).astype(np.float32))[:, None]
        pyramid = encode_single(encoders["f_c"], s_c) + encode_single(encoders["f_d"], s_d)
    if flags.no_masked_features:
        return pyramid
    return mask_pyramid(pyramid, masks)


def _run_stage(
    base: BaseModel,
    v: torch.Tensor,
    encoders: dict[str, SketchEncoder],
    pairs: list[TrainingPair],
    cfg: StageConfig,
    flags: AblationFlags,
    stage: int,
    trace: LossTrace,
) -> None:
    """Shared step loop; optimizes `v` (stage 1) or `v` + encoders (stage 2)."""
    weights = _weights(flags)
    params = [v] + [p for enc in encoders.values() for p in enc.parameters()] if stage == 2 else [v]
    opt = torch.optim.Adam(params, lr=cfg.lr, betas=ADAM_BETAS, eps=ADAM_EPS)
    np_rng = np.random.default_rng(cfg.seed)
    g = torch.Generator().manual_seed(cfg.seed)
    T = base.schedule.T
    record_shape = weights.lambda_shape > 0
    for step in range(cfg.steps):
        idx = np_rng.integers(len(pairs), size=cfg.batch_size)
        batch = [pairs[i] for i in idx]
        if cfg.augment:
            batch = [augment(p, np_rng) for p in batch]
        prompt = TRAIN_TEMPLATES[np_rng.integers(len(TRAIN_TEMPLATES))]
        tokens = tokenize(base.vocab, prompt)
        t = torch.from_numpy(np_rng.integers(0, T, size=cfg.batch_size))
        z0 = torch.stack([image_to_tensor(p.image) for p in batch])
        eps = torch.randn(z0.shape, generator=g)
        z_t = forward_diffuse(z0, t, eps, base.schedule)
        masks = torch.from_numpy(np.stack([p.mask for p in batch]).astype(np.float32))[:, None]
        pyramid = _stage_pyramid(base, encoders, batch, masks, stage, flags)
        eps_hat, record = predict_noise(
            base, z_t, t, tokens, pyramid, record_attention=record_shape, v=v
        )
        l_rec = rec_loss(eps, eps_hat, masks)
        if record_shape:
            agg = aggregate_attention(record)
            m16 = resize_mask(masks, 16)[:, 0]
            l_fg, l_bg, l_shape = shape_loss(agg, m16)
        else:
            l_fg = l_bg = l_shape = torch.zeros(())
        l_reg = reg_loss(v)
        loss = total_loss(l_rec, l_shape, l_reg, weights)
        if not torch.isfinite(loss):
            raise RuntimeError(
                f"stage {stage} loss diverged at step {step}: rec={float(l_rec.detach())}, "
                f"shape={float(l_shape.detach())}, reg={float(l_reg.detach())}"
            )
        opt.zero_grad(set_to_none=True)
        loss.backward()
        if cfg.grad_clip is not None:
            torch.nn.utils.clip_grad_norm_(params, cfg.grad_clip)
        opt.step()
        trace.append(step, l_rec, l_fg, l_bg, l_reg, loss)


def run_stage1(
    base: BaseModel,
    pairs: list[TrainingPair],
    cfg: StageConfig,
    token: ConceptToken | None = None,
    trace: LossTrace | None = None,
) -> ConceptToken:
    """Optimize only the concept token against the frozen base encoder."""
    if not pairs:
        raise ValueError("need at least one training pair")
    token = token or init_token(pairs[0].class_name, base)
    trace = trace if trace is not None else LossTrace()
    v = token.v.detach().clone().requires_grad_(True)
    flags = AblationFlags()
    _run_stage(base, v, {}, pairs, cfg, flags, stage=1, trace=trace)
    return ConceptToken(v=v.detach(), class_name=token.class_name)


def run_stage2(
    base: BaseModel,
    token: ConceptToken,
    pairs: list[TrainingPair],
    cfg: StageConfig,
    flags: AblationFlags = AblationFlags(),
    trace: LossTrace | None = None,
) -> Concept:
    """Jointly fine-tune the token and the cloned sketch encoder(s)."""
    if not pairs:
        raise ValueError("need at least one training pair")
    trace = trace if trace is not None else LossTrace()
    v = token.v.detach().clone().requires_grad_(True)
    encoders: dict[str, SketchEncoder] = {"f_c": _clone_trainable(base.sketch_encoder)}
    if not flags.uses_one_encoder():
        encoders["f_d"] = _clone_trainable(base.sketch_encoder)
    _run_stage(base, v, encoders, pairs, cfg, flags, stage=2, trace=trace)
    for enc in encoders.values():
        enc.eval()
        for p in enc.parameters():
            p.requires_grad_(False)
    return Concept(
        token=ConceptToken(v=v.detach(), class_name=token.class_name),
        f_c=encoders["f_c"],
        f_d=encoders.get("f_d"),
        class_name=token.class_name,
        flags=flags,
        manifest={
            "base_hash": base.content_hash(),
            "stage2_config": asdict(cfg),
            "flags": asdict(flags),
            "optimizer": {"name": "adam", "betas": ADAM_BETAS, "eps": ADAM_EPS},
            "stage2_loss": trace.as_rows(),
        },
    )


def _clone_trainable(enc: SketchEncoder) -> SketchEncoder:
    clone = copy.deepcopy(enc)
    clone.train()
    for p in clone.parameters():
        p.requires_grad_(True)
    return clone


def data_hash(pairs: list[TrainingPair]) -> str:
    h = hashlib.sha256()
    for p in pairs:
        h.update(np.ascontiguousarray(p.image).tobytes())
        h.update(p.sketch.s_c.tobytes())
        h.update(p.sketch.s_d.tobytes())
        h.update(p.mask.tobytes())
    return h.hexdigest()


def train_concept(
    base: BaseModel,
    pairs: list[TrainingPair],
    cfg1: StageConfig,
    cfg2: StageConfig,
    flags: AblationFlags = AblationFlags(),
) -> Concept:
    """Stage I then Stage II; records both loss curves in the manifest."""
    class_name = pairs[0].class_name
    if any(p.class_name != class_name for p in pairs):
        raise ValueError("all pairs must share one class name")
    trace1 = LossTrace()
    token = init_token(class_name, base)
    if not flags.skip_stage1:
        token = run_stage1(base, pairs, cfg1, token=token, trace=trace1)
    trace2 = LossTrace()
    concept = run_stage2(base, token, pairs, cfg2, flags, trace=trace2)
    concept.manifest.update(
        {
            "stage1_config": asdict(cfg1),
            "stage1_loss": trace1.as_rows(),
            "data_hash": data_hash(pairs),
            "n_pairs": len(pairs),
        }
    )
    return concept
