"""Training objectives: masked reconstruction, attention shape loss, token reg.

Conventions fixed here (and mirrored by the scalar-loop oracles in the test
suite):
  - rec_loss is the mean of (eps*M - eps_hat*M)^2 over the masked elements;
    the denominator is the mask mass broadcast over channels, so an all-ones
    mask gives exactly the unmasked diffusion loss.
  - shape loss normalizes the aggregated attention map per item to [0, 1];
    a constant map normalizes to all zeros.
  - the background term is the mask-weighted average attention over
    background pixels.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn.functional as F

from .backbone.unet import AttentionRecord


@dataclass(frozen=True)
class LossWeights:
    lambda_shape: float = 0.01
    lambda_reg: float = 0.001

    def __post_init__(self):
        if self.lambda_shape < 0 or self.lambda_reg < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class ConceptToken:
    """Learned text embedding for one concept; lives outside the base table."""

    v: torch.Tensor  # (d,)
    class_name: str
    trainable: bool = True

    def __post_init__(self):
        if not torch.isfinite(self.v).all():
            raise ValueError("concept embedding contains non-finite values")

    def clone(self) -> "ConceptToken":
        return ConceptToken(self.v.detach().clone(), self.class_name, self.trainable)


def _as_mask(m, like: torch.Tensor) -> torch.Tensor:
    mm = torch.as_tensor(m, dtype=like.dtype, device=like.device) if not isinstance(m, torch.Tensor) \
        else m.to(dtype=like.dtype, device=like.device)
    return mm


def rec_loss(eps: torch.Tensor, eps_hat: torch.Tensor, m) -> torch.Tensor:
    """Masked diffusion loss; 0 (with a warning) when the mask is empty."""
    if eps.shape != eps_hat.shape:
        raise ValueError("eps and eps_hat shapes differ")
    if not (torch.isfinite(eps).all() and torch.isfinite(eps_hat).all()):
        raise ValueError("non-finite values in reconstruction loss inputs")
    mm = _as_mask(m, eps)
    diff = eps * mm - eps_hat * mm
    mass = mm.expand_as(eps).sum()
    if float(mass) == 0.0:
        warnings.warn("rec_loss called with an all-zero mask; returning 0")
        return torch.zeros((), dtype=eps.dtype, device=eps.device)
    return diff.pow(2).sum() / mass


def aggregate_attention(rec: AttentionRecord, out_size: int = 16) -> torch.Tensor:
    """Head-averaged, area-resized to 16x16, then layer-averaged map (B, 16, 16)."""
    if len(rec) == 0:
        raise ValueError("attention record is empty")
    resized = []
    for _, maps in rec.layers:
        per_layer = maps.mean(dim=1, keepdim=True)  # average heads first
        if per_layer.shape[-1] != out_size:
            per_layer = F.interpolate(per_layer, size=(out_size, out_size), mode="area")
        resized.append(per_layer[:, 0])
    return torch.stack(resized, dim=0).mean(dim=0)


def normalize_map(a: torch.Tensor) -> torch.Tensor:
    """Min-max normalize per item; constant maps normalize to all zeros."""
    flat = a.reshape(a.shape[0], -1) if a.ndim == 3 else a.reshape(1, -1)
    lo = flat.min(dim=1).values
    hi = flat.max(dim=1).values
    span = hi - lo
    safe = torch.where(span > 0, span, torch.ones_like(span))
    out = (flat - lo[:, None]) / safe[:, None]
    out = torch.where((span > 0)[:, None], out, torch.zeros_like(out))
    return out.reshape(a.shape)


def shape_loss(a: torch.Tensor, m) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Foreground/background attention supervision: (L_fg, L_bg, L_shape).

    `a` is the aggregated attention map, (h, w) or (B, h, w); `m` the mask at
    the same spatial size.
    """
    squeeze = a.ndim == 2
    aa = a[None] if squeeze else a
    mm = _as_mask(m, aa)
    if mm.ndim == 2:
        mm = mm[None]
    if mm.shape[-2:] != aa.shape[-2:]:
        raise ValueError(f"mask {tuple(mm.shape[-2:])} does not match map {tuple(aa.shape[-2:])}")
    if float(mm.sum()) == 0.0:
        raise ValueError("mask is empty at attention resolution; concept region degenerate")
    mm = mm.expand_as(aa)
    norm_a = normalize_map(aa)
    l_fg = (norm_a * mm - mm).pow(2).mean()
    bg = 1.0 - mm
    bg_mass = bg.sum()
    if float(bg_mass) == 0.0:
        l_bg = torch.zeros((), dtype=aa.dtype, device=aa.device)
    else:
        l_bg = (aa * bg).sum() / bg_mass
    return l_fg, l_bg, l_fg + l_bg


def reg_loss(v: torch.Tensor | ConceptToken) -> torch.Tensor:
    """Euclidean norm of the concept embedding."""
    vec = v.v if isinstance(v, ConceptToken) else v
    if not torch.isfinite(vec).all():
        raise ValueError("non-finite concept embedding")
    return torch.linalg.vector_norm(vec)


def total_loss(
    l_rec: torch.Tensor, l_shape: torch.Tensor, l_reg: torch.Tensor,
    w: LossWeights = LossWeights(),
) -> torch.Tensor:
    return l_rec + w.lambda_shape * l_shape + w.lambda_reg * l_reg


class LossTrace:
    """Per-step loss log, written as CSV (step, l_rec, l_fg, l_bg, l_reg, total)."""

    FIELDS = ("step", "l_rec", "l_fg", "l_bg", "l_reg", "total")

    def __init__(self):
        self.rows: list[tuple[int, float, float, float, float, float]] = []

    def append(self, step: int, l_rec, l_fg, l_bg, l_reg, total) -> None:
        def scalar(x) -> float:
            return float(x.detach()) if isinstance(x, torch.Tensor) else float(x)

        self.rows.append(
            (step, scalar(l_rec), scalar(l_fg), scalar(l_bg), scalar(l_reg), scalar(total))
        )

    def totals(self) -> list[float]:
        return [r[5] for r in self.rows]

    def as_rows(self) -> list[list[str]]:
        out = [list(self.FIELDS)]
        for row in self.rows:
            out.append([str(row[0])] + [f"{v:.8g}" for v in row[1:]])
        return out

    def write_csv(self, path: Path | str) -> None:
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.as_rows())
