"""Conditional U-Net denoiser with cross-attention over prompt tokens.

Four encoder levels at 64/32/16/8 in the 64x64 working space; sketch feature
pyramids are added to the encoder block outputs at matching levels. Every
cross-attention layer can record the attention map of a designated token.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..adapters import LEVEL_SIZES


@dataclass
class AttentionRecord:
    """Per-layer cross-attention maps for one designated token."""

    layers: list[tuple[str, torch.Tensor]]  # (name, (B, heads, h, w)), values >= 0

    def resolutions(self) -> list[int]:
        return [m.shape[-1] for _, m in self.layers]

    def __len__(self) -> int:
        return len(self.layers)


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(
        -math.log(10000.0) * torch.arange(half, dtype=torch.float64, device=t.device) / (half - 1)
    )
    args = t.double()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class ResBlock(nn.Module):
    def __init__(self, c_in: int, c_out: int, time_dim: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(4, c_in)
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, c_out)
        self.norm2 = nn.GroupNorm(4, c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.skip = nn.Conv2d(c_in, c_out, 1) if c_in != c_out else nn.Identity()
        # zero-init the residual branch: blocks start as identity, which keeps
        # early training stable at these learning rates
        nn.init.zeros_(self.conv2.weight)
        nn.init.zeros_(self.conv2.bias)

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(F.silu(temb))[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class CrossAttention(nn.Module):
    """Spatial queries attending to prompt token embeddings."""

    def __init__(self, channels: int, ctx_dim: int, heads: int = 2):
        super().__init__()
        if channels % heads:
            raise ValueError("channels must divide evenly into heads")
        self.heads = heads
        self.head_dim = channels // heads
        self.norm = nn.GroupNorm(4, channels)
        self.to_q = nn.Conv2d(channels, channels, 1)
        self.to_k = nn.Linear(ctx_dim, channels)
        self.to_v = nn.Linear(ctx_dim, channels)
        self.proj = nn.Conv2d(channels, channels, 1)
        nn.init.zeros_(self.proj.weight)
        nn.init.zeros_(self.proj.bias)

    def forward(
        self,
        x: torch.Tensor,
        ctx: torch.Tensor,
        token_pos: int | None = None,
        sink: list | None = None,
        name: str = "",
    ) -> torch.Tensor:
        b, c, h, w = x.shape
        q = self.to_q(self.norm(x)).reshape(b, self.heads, self.head_dim, h * w).transpose(2, 3)
        k = self.to_k(ctx).reshape(b, -1, self.heads, self.head_dim).transpose(1, 2)
        v = self.to_v(ctx).reshape(b, -1, self.heads, self.head_dim).transpose(1, 2)
        attn = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(self.head_dim), dim=-1)
        if sink is not None and token_pos is not None:
            sink.append((name, attn[:, :, :, token_pos].reshape(b, self.heads, h, w)))
        out = (attn @ v).transpose(2, 3).reshape(b, c, h, w)
        return x + self.proj(out)


class DenoisingNetwork(nn.Module):
    """Noise predictor; encoder levels accept additive feature injection."""

    def __init__(
        self,
        widths: tuple[int, int, int, int] = (16, 24, 32, 48),
        text_dim: int = 48,
        time_dim: int = 64,
        heads: int = 2,
        max_tokens: int = 24,
        in_channels: int = 3,
    ):
        super().__init__()
        self.widths = tuple(widths)
        self.text_dim = text_dim
        self.time_dim = time_dim
        self.max_tokens = max_tokens
        self.token_pos = nn.Parameter(torch.zeros(max_tokens, text_dim))
        self.time_mlp = nn.Sequential(
            nn.Linear(time_dim, time_dim), nn.SiLU(), nn.Linear(time_dim, time_dim)
        )
        self.stem = nn.Conv2d(in_channels, widths[0], 3, padding=1)
        self.enc_res = nn.ModuleList([ResBlock(w, w, time_dim) for w in widths])
        self.enc_attn = nn.ModuleList([CrossAttention(w, text_dim, heads) for w in widths])
        self.down = nn.ModuleList(
            [nn.Conv2d(widths[i], widths[i + 1], 3, stride=2, padding=1) for i in range(3)]
        )
        self.mid_res = ResBlock(widths[3], widths[3], time_dim)
        self.mid_attn = CrossAttention(widths[3], text_dim, heads)
        self.dec_res = nn.ModuleList([ResBlock(2 * w, w, time_dim) for w in widths])
        self.dec_attn = nn.ModuleList([CrossAttention(w, text_dim, heads) for w in widths])
        self.up = nn.ModuleList(
            [nn.Conv2d(widths[i], widths[i - 1], 3, padding=1) for i in range(1, 4)]
        )
        self.out_norm = nn.GroupNorm(4, widths[0])
        self.out_conv = nn.Conv2d(widths[0], in_channels, 3, padding=1)
        nn.init.zeros_(self.out_conv.weight)
        nn.init.zeros_(self.out_conv.bias)

    def _encode(
        self,
        z: torch.Tensor,
        temb: torch.Tensor,
        ctx: torch.Tensor,
        pyramid: list[torch.Tensor] | None,
        token_pos: int | None,
        sink: list | None,
    ) -> tuple[torch.Tensor, list[torch.Tensor]]:
        h = self.stem(z)
        skips = []
        for i in range(4):
            h = self.enc_res[i](h, temb)
            h = self.enc_attn[i](h, ctx, token_pos, sink, name=f"enc{i}")
            if pyramid is not None:
                level = pyramid[i]
                if level.shape[-2:] != h.shape[-2:] or level.shape[1] != h.shape[1]:
                    raise ValueError(
                        f"pyramid level {i} shape {tuple(level.shape[1:])} does not match "
                        f"encoder output {tuple(h.shape[1:])}"
                    )
                h = h + level
            skips.append(h)
            if i < 3:
                h = self.down[i](h)
        return h, skips

    def _context(self, ctx: torch.Tensor) -> torch.Tensor:
        return ctx + self.token_pos[: ctx.shape[1]].to(ctx.dtype)

    def forward(
        self,
        z: torch.Tensor,
        t: torch.Tensor,
        ctx: torch.Tensor,
        pyramid: list[torch.Tensor] | None = None,
        token_pos: int | None = None,
        sink: list | None = None,
    ) -> torch.Tensor:
        if pyramid is not None and len(pyramid) != 4:
            raise ValueError("feature pyramid must have 4 levels")
        ctx = self._context(ctx)
        temb = self.time_mlp(timestep_embedding(t, self.time_dim).to(z.dtype))
        h, skips = self._encode(z, temb, ctx, pyramid, token_pos, sink)
        h = self.mid_res(h, temb)
        h = self.mid_attn(h, ctx, token_pos, sink, name="mid")
        for i in range(3, -1, -1):
            h = self.dec_res[i](torch.cat([h, skips[i]], dim=1), temb)
            h = self.dec_attn[i](h, ctx, token_pos, sink, name=f"dec{i}")
            if i > 0:
                h = self.up[i - 1](F.interpolate(h, scale_factor=2, mode="nearest"))
        return self.out_conv(F.silu(self.out_norm(h)))

    def encoder_features(
        self, z: torch.Tensor, t: torch.Tensor, ctx: torch.Tensor
    ) -> list[torch.Tensor]:
        """Per-level encoder activations (no injection); used by the metric stack."""
        ctx = self._context(ctx)
        temb = self.time_mlp(timestep_embedding(t, self.time_dim).to(z.dtype))
        _, skips = self._encode(z, temb, ctx, None, None, None)
        return skips
