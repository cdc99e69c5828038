"""Noise schedule for the denoising process."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step variances and their cumulative alpha products."""

    betas: np.ndarray  # (T,) float64, strictly in (0, 1), non-decreasing
    alpha_bars: np.ndarray  # (T,) float64, strictly decreasing

    @property
    def T(self) -> int:
        return len(self.betas)

    def alpha_bar(self, t: int) -> float:
        """Cumulative product at step t; t = -1 denotes the clean-data boundary."""
        if t < 0:
            return 1.0
        return float(self.alpha_bars[t])


def build_schedule(T: int, beta_min: float, beta_max: float) -> NoiseSchedule:
    """Linear beta schedule with alpha_bars[t] = prod_{s<=t}(1 - beta_s)."""
    if T < 2:
        raise ValueError("schedule needs at least 2 steps")
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise ValueError("betas must satisfy 0 < beta_min <= beta_max < 1")
    betas = np.linspace(beta_min, beta_max, T, dtype=np.float64)
    alpha_bars = np.cumprod(1.0 - betas)
    return NoiseSchedule(betas=betas, alpha_bars=alpha_bars)


def forward_diffuse(
    z0: torch.Tensor, t: int | torch.Tensor, eps: torch.Tensor, schedule: NoiseSchedule
) -> torch.Tensor:
    """Noising step: sqrt(abar_t) * z0 + sqrt(1 - abar_t) * eps."""
    if z0.shape != eps.shape:
        raise ValueError(f"noise shape {tuple(eps.shape)} != data shape {tuple(z0.shape)}")
    abars = torch.as_tensor(schedule.alpha_bars, dtype=z0.dtype, device=z0.device)
    if isinstance(t, int):
        if not (0 <= t < schedule.T):
            raise ValueError(f"timestep {t} out of range [0, {schedule.T})")
        ab = abars[t]
    else:
        if bool((t < 0).any()) or bool((t >= schedule.T).any()):
            raise ValueError("timestep out of range")
        ab = abars[t].reshape(-1, *([1] * (z0.ndim - 1)))
    return torch.sqrt(ab) * z0 + torch.sqrt(1.0 - ab) * eps


def sampling_timesteps(T: int, steps: int) -> list[int]:
    """Evenly spaced descending timestep subsequence, ending at 0."""
    if steps < 1:
        raise ValueError("need at least one sampling step")
    if steps > T:
        raise ValueError(f"cannot sample with more steps ({steps}) than the schedule has ({T})")
    ts = np.rint(np.linspace(T - 1, 0, steps)).astype(int)
    return [int(t) for t in ts]
