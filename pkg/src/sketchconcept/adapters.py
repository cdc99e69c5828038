"""Sketch encoders and masked feature fusion.

A sketch encoder turns a binary raster into a 4-level feature pyramid whose
resolutions and channel widths match the denoiser encoder levels. Before
injection the pyramid is gated by the foreground mask, area-downsampled to
each level (soft values, no re-binarization).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

LEVEL_SIZES = (64, 32, 16, 8)


@dataclass
class FeaturePyramid:
    """Feature maps at decreasing resolutions (64/32/16/8 in production)."""

    levels: tuple[torch.Tensor, ...]

    def __post_init__(self):
        self.levels = tuple(self.levels)
        sizes = [lv.shape[-1] for lv in self.levels]
        if sizes != sorted(sizes, reverse=True):
            raise ValueError("pyramid levels must be ordered by decreasing resolution")
        for lv in self.levels:
            if not torch.isfinite(lv).all():
                raise ValueError("pyramid contains non-finite values")

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, i: int) -> torch.Tensor:
        return self.levels[i]

    def __add__(self, other: "FeaturePyramid") -> "FeaturePyramid":
        if len(self) != len(other):
            raise ValueError("cannot add pyramids with different level counts")
        return FeaturePyramid(tuple(a + b for a, b in zip(self.levels, other.levels)))

    def detach(self) -> "FeaturePyramid":
        return FeaturePyramid(tuple(lv.detach() for lv in self.levels))


class SketchEncoder(nn.Module):
    """4-stage convolutional pyramid over a single-channel binary raster."""

    def __init__(self, widths: tuple[int, int, int, int] = (16, 24, 32, 48)):
        super().__init__()
        self.widths = tuple(widths)
        self.stem = nn.Conv2d(1, widths[0], 3, padding=1)
        self.blocks = nn.ModuleList()
        for i, w in enumerate(widths):
            self.blocks.append(
                nn.Sequential(
                    nn.Conv2d(w, w, 3, padding=1), nn.SiLU(), nn.Conv2d(w, w, 3, padding=1)
                )
            )
        self.down = nn.ModuleList(
            [nn.Conv2d(widths[i], widths[i + 1], 3, stride=2, padding=1) for i in range(3)]
        )

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        h = self.stem(x)
        levels = []
        for i in range(4):
            h = self.blocks[i](h)
            levels.append(h)
            if i < 3:
                h = self.down[i](h)
        return levels


def _as_input(s, dtype: torch.dtype, device) -> torch.Tensor:
    """Accept (H, W) arrays or (B, 1, H, W) tensors; values are used as-is."""
    x = torch.as_tensor(np.asarray(s) if not isinstance(s, torch.Tensor) else s)
    x = x.to(dtype=dtype, device=device)
    if x.ndim == 2:
        x = x[None, None]
    elif x.ndim != 4 or x.shape[1] != 1:
        raise ValueError("sketch input must be (H, W) or (B, 1, H, W)")
    return x


def encode_single(enc: SketchEncoder, s) -> FeaturePyramid:
    """Deterministic forward pass of one raster through one encoder."""
    p = next(enc.parameters())
    x = _as_input(s, p.dtype, p.device)
    if x.shape[-2] != x.shape[-1] or x.shape[-1] % 8:
        raise ValueError(f"encoder input must be square with size divisible by 8, got {tuple(x.shape[-2:])}")
    return FeaturePyramid(tuple(enc(x)))


def encode_dual(f_c: SketchEncoder, f_d: SketchEncoder, ds) -> FeaturePyramid:
    """Per-level sum of the contour and detail encoder pyramids."""
    pc = encode_single(f_c, ds.s_c)
    pd = encode_single(f_d, ds.s_d)
    for a, b in zip(pc.levels, pd.levels):
        if a.shape != b.shape:
            raise ValueError("contour/detail encoders produce mismatched level shapes")
    return pc + pd


def resize_mask(m, level: int, dtype: torch.dtype = torch.float32, device=None) -> torch.Tensor:
    """Area-average the mask down to a feature level; soft values in [0, 1]."""
    if level not in LEVEL_SIZES and level != 16:
        raise ValueError(f"unsupported level {level}; expected one of {LEVEL_SIZES}")
    x = torch.as_tensor(np.asarray(m) if not isinstance(m, torch.Tensor) else m)
    x = x.to(dtype=dtype, device=device)
    if x.ndim == 2:
        x = x[None, None]
    h = x.shape[-1]
    if h == level:
        return x
    if h % level:
        raise ValueError(f"mask size {h} not divisible by level {level}")
    return F.avg_pool2d(x, kernel_size=h // level)


def mask_pyramid(p: FeaturePyramid, m) -> FeaturePyramid:
    """Gate each pyramid level by the mask resized to its resolution."""
    out = []
    for lv in p.levels:
        mi = resize_mask(m, lv.shape[-1], dtype=lv.dtype, device=lv.device)
        if mi.shape[-2:] != lv.shape[-2:]:
            raise ValueError("mask does not resize to the pyramid level shape")
        out.append(lv * mi)
    return FeaturePyramid(tuple(out))


def zero_pyramid_like(p: FeaturePyramid) -> FeaturePyramid:
    return FeaturePyramid(tuple(torch.zeros_like(lv) for lv in p.levels))
