"""Base model: frozen denoiser, text table, noise schedule, sketch encoder.

Pretraining jointly fits the denoiser, the text embedding table and the
single-sketch encoder on a captioned (image, merged sketch) corpus, then
freezes everything. Concept training later only ever reads this object.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..adapters import FeaturePyramid, SketchEncoder
from ..sketchrep.strokes import merge_binary
from ..sketchrep.synthetic import standard_words
from .schedule import NoiseSchedule, build_schedule, forward_diffuse, sampling_timesteps
from .text import PromptTokens, Vocabulary, tokenize
from .unet import AttentionRecord, DenoisingNetwork

PAD_WORD = "<pad>"

# guards the global-rng fork used for weight init; other jobs use local generators
_INIT_LOCK = threading.Lock()


@dataclass
class PretrainConfig:
    steps: int = 4000
    batch_size: int = 8
    lr: float = 2e-3
    lr_final_frac: float = 0.1  # cosine decay floor as a fraction of lr
    warmup_steps: int = 250
    grad_clip: float | None = 1.0
    seed: int = 0
    T: int = 1000
    beta_min: float = 1e-4
    beta_max: float = 2e-2
    widths: tuple[int, int, int, int] = (16, 24, 32, 48)
    text_dim: int = 48
    time_dim: int = 64
    heads: int = 2
    extra_words: tuple[str, ...] = ()

    def key(self) -> str:
        payload = json.dumps(self.__dict__, sort_keys=True, default=list)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class BaseModel:
    denoiser: DenoisingNetwork
    table: torch.nn.Embedding
    schedule: NoiseSchedule
    sketch_encoder: SketchEncoder
    vocab: Vocabulary
    manifest: dict = field(default_factory=dict)

    @property
    def text_dim(self) -> int:
        return self.table.embedding_dim

    def freeze(self) -> None:
        for module in (self.denoiser, self.table, self.sketch_encoder):
            module.eval()
            for p in module.parameters():
                p.requires_grad_(False)

    def named_parameter_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for prefix, module in (
            ("denoiser", self.denoiser),
            ("table", self.table),
            ("sketch_encoder", self.sketch_encoder),
        ):
            for name, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
                out[f"{prefix}.{name}"] = p.detach().cpu().numpy().astype("<f4")
        return out

    def content_hash(self) -> str:
        # parameters are frozen after pretraining, so the hash is cached
        cached = getattr(self, "_content_hash", None)
        if cached is not None:
            return cached
        h = hashlib.sha256()
        h.update(np.asarray(self.schedule.betas, "<f8").tobytes())
        h.update("\n".join(self.vocab.words).encode())
        for name, arr in self.named_parameter_arrays().items():
            h.update(name.encode())
            h.update(arr.tobytes())
        self._content_hash = h.hexdigest()
        return self._content_hash


def param_checksum(module: torch.nn.Module) -> str:
    h = hashlib.sha256()
    for name, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
        h.update(name.encode())
        h.update(p.detach().cpu().numpy().astype("<f8").tobytes())
    return h.hexdigest()


def image_to_tensor(image: np.ndarray) -> torch.Tensor:
    """(H, W, 3) [0,1] float image -> (3, H, W) tensor in [-1, 1]."""
    return torch.from_numpy(np.ascontiguousarray(image)).permute(2, 0, 1).float() * 2.0 - 1.0


def tensor_to_image(z: torch.Tensor) -> np.ndarray:
    """(3, H, W) tensor in [-1, 1] -> (H, W, 3) float image clamped to [0, 1]."""
    x = ((z.detach().float() + 1.0) / 2.0).clamp(0.0, 1.0)
    return x.permute(1, 2, 0).contiguous().numpy()


def embed_prompt(
    base: BaseModel,
    tokens: PromptTokens,
    v: torch.Tensor | Sequence[torch.Tensor] | None = None,
) -> torch.Tensor:
    """Token embeddings with concept vector(s) spliced at the [v] position(s)."""
    ids = torch.tensor(tokens.ids, dtype=torch.long)
    ctx = base.table(ids)
    if tokens.v_positions:
        if v is None:
            raise ValueError("prompt contains [v] but no concept vector was provided")
        vecs = [v] if isinstance(v, torch.Tensor) else list(v)
        if len(vecs) != len(tokens.v_positions):
            raise ValueError(
                f"{len(tokens.v_positions)} placeholder(s) but {len(vecs)} concept vector(s)"
            )
        ctx = ctx.clone()
        for pos, vec in zip(tokens.v_positions, vecs):
            ctx[pos] = vec.to(ctx.dtype)
    return ctx[None]  # (1, L, d)


def predict_noise(
    base: BaseModel,
    z_t: torch.Tensor,
    t: int | torch.Tensor,
    tokens: PromptTokens,
    pyramid: FeaturePyramid | None = None,
    record_attention: bool = False,
    v: torch.Tensor | Sequence[torch.Tensor] | None = None,
) -> tuple[torch.Tensor, AttentionRecord | None]:
    """One denoiser forward pass; pyramid levels are added at encoder levels."""
    batched = z_t.ndim == 4
    z = z_t if batched else z_t[None]
    b = z.shape[0]
    tt = torch.full((b,), t, dtype=torch.long) if isinstance(t, int) else t.reshape(-1)
    ctx = embed_prompt(base, tokens, v).expand(b, -1, -1)
    token_pos = None
    sink: list | None = None
    if record_attention:
        if not tokens.v_positions:
            raise ValueError("attention recording requested but prompt has no [v] token")
        token_pos = tokens.v_positions[0]
        sink = []
    levels = list(pyramid.levels) if pyramid is not None else None
    eps_hat = base.denoiser(z, tt, ctx, levels, token_pos, sink)
    record = AttentionRecord(layers=sink) if sink is not None else None
    return (eps_hat if batched else eps_hat[0]), record


def sample(
    base: BaseModel,
    tokens: PromptTokens,
    pyramid: FeaturePyramid | None = None,
    steps: int = 50,
    seed: int = 0,
    v: torch.Tensor | Sequence[torch.Tensor] | None = None,
    step_callback: Callable[[int, int, torch.Tensor], torch.Tensor] | None = None,
) -> np.ndarray:
    """Ancestral denoising from pure noise; output image in [0, 1].

    `step_callback(i, t_prev, z) -> z` runs after every update (latent
    blending hooks in here); it must not consume the sampling rng.
    """
    ts = sampling_timesteps(base.schedule.T, steps)
    g = torch.Generator().manual_seed(seed)
    z = torch.randn(1, 3, 64, 64, generator=g)
    with torch.no_grad():
        for i, t in enumerate(ts):
            t_prev = ts[i + 1] if i + 1 < len(ts) else -1
            eps_hat, _ = predict_noise(base, z, t, tokens, pyramid, v=v)
            z = ancestral_step(base.schedule, z, eps_hat, t, t_prev, g)
            if step_callback is not None:
                z = step_callback(i, t_prev, z)
    return tensor_to_image(z[0])


def ancestral_step(
    schedule: NoiseSchedule,
    z: torch.Tensor,
    eps_hat: torch.Tensor,
    t: int,
    t_prev: int,
    g: torch.Generator,
) -> torch.Tensor:
    """One stochastic denoising update from timestep t to t_prev (-1 = done)."""
    ab_t = schedule.alpha_bar(t)
    ab_prev = schedule.alpha_bar(t_prev)
    x0 = (z - (1.0 - ab_t) ** 0.5 * eps_hat) / ab_t**0.5
    x0 = x0.clamp(-1.0, 1.0)
    var = (1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - ab_t / ab_prev)
    var = max(var, 0.0)
    direction = (max(1.0 - ab_prev - var, 0.0)) ** 0.5 * eps_hat
    z_prev = ab_prev**0.5 * x0 + direction
    if t_prev >= 0 and var > 0:
        z_prev = z_prev + var**0.5 * torch.randn(z.shape, generator=g)
    return z_prev


def _pad_captions(vocab: Vocabulary, captions: list[str]) -> torch.Tensor:
    pad_id = vocab.id_of(PAD_WORD)
    toks = [tokenize(vocab, c).ids for c in captions]
    length = max(len(t) for t in toks)
    ids = torch.full((len(toks), length), pad_id, dtype=torch.long)
    for i, t in enumerate(toks):
        ids[i, : len(t)] = torch.tensor(t)
    return ids


def pretrain_base(corpus: Sequence, cfg: PretrainConfig) -> BaseModel:
    """Jointly train denoiser, text table and sketch encoder on the corpus."""
    if not corpus:
        raise ValueError("pretraining corpus is empty")
    for pair in corpus:
        if pair.caption is None:
            raise ValueError(f"corpus pair {pair.concept_id} has no caption")
    captions = [p.caption for p in corpus]
    vocab = Vocabulary.build(
        captions, extra_words=(PAD_WORD, *standard_words(), *cfg.extra_words)
    )
    schedule = build_schedule(cfg.T, cfg.beta_min, cfg.beta_max)

    with _INIT_LOCK, torch.random.fork_rng():
        torch.manual_seed(cfg.seed)
        denoiser = DenoisingNetwork(
            widths=cfg.widths, text_dim=cfg.text_dim, time_dim=cfg.time_dim, heads=cfg.heads
        )
        table = torch.nn.Embedding(len(vocab), cfg.text_dim)
        torch.nn.init.normal_(table.weight, std=0.2)
        encoder = SketchEncoder(widths=cfg.widths)

    images = torch.stack([image_to_tensor(p.image) for p in corpus])
    sketches = torch.stack(
        [torch.from_numpy(merge_binary(p.sketch)).float()[None] for p in corpus]
    )
    ids_all = _pad_captions(vocab, captions)

    params = list(denoiser.parameters()) + list(table.parameters()) + list(encoder.parameters())
    opt = torch.optim.Adam(params, lr=cfg.lr)
    g = torch.Generator().manual_seed(cfg.seed)
    curve: list[float] = []
    for step in range(cfg.steps):
        frac = step / max(cfg.steps - 1, 1)
        scale = cfg.lr_final_frac + (1 - cfg.lr_final_frac) * 0.5 * (1 + np.cos(np.pi * frac))
        if cfg.warmup_steps > 0:
            scale *= min(1.0, (step + 1) / cfg.warmup_steps)
        for group in opt.param_groups:
            group["lr"] = cfg.lr * scale
        idx = torch.randint(len(corpus), (cfg.batch_size,), generator=g)
        z0 = images[idx]
        t = torch.randint(0, schedule.T, (cfg.batch_size,), generator=g)
        eps = torch.randn(z0.shape, generator=g)
        z_t = forward_diffuse(z0, t, eps, schedule)
        ctx = table(ids_all[idx])
        pyramid = encoder(sketches[idx])
        eps_hat = denoiser(z_t, t, ctx, pyramid)
        loss = F.mse_loss(eps_hat, eps)
        if not torch.isfinite(loss):
            raise RuntimeError(f"pretraining diverged at step {step}: loss={float(loss.detach())}")
        opt.zero_grad(set_to_none=True)
        loss.backward()
        if cfg.grad_clip is not None:
            torch.nn.utils.clip_grad_norm_(params, cfg.grad_clip)
        opt.step()
        curve.append(float(loss.detach()))

    corpus_hash = hashlib.sha256(
        b"".join(np.ascontiguousarray(p.image).tobytes() for p in corpus)
    ).hexdigest()
    base = BaseModel(
        denoiser=denoiser,
        table=table,
        schedule=schedule,
        sketch_encoder=encoder,
        vocab=vocab,
        manifest={
            "config": json.loads(json.dumps(cfg.__dict__, default=list)),
            "config_key": cfg.key(),
            "seed": cfg.seed,
            "corpus_hash": corpus_hash,
            "corpus_size": len(corpus),
            "loss_curve": curve,
        },
    )
    base.freeze()
    return base
