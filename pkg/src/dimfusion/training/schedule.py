"""Flow-matching interpolants and timestep sampling.

Convention: data sits at t=0, pure noise at t=1, and the regression target
is the constant velocity noise - data along the straight interpolant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tensor import ShapeError


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-15
    weight_decay: float = 1e-4
    warmup_steps: int = 100
    logit_normal: tuple[float, float] = (0.0, 1.0)
    time_shift: float = 1.0
    repa_coeff: float = 0.0
    repa_until_step: int = 0
    batch: int = 8
    seed: int = 0
    grad_clip: float = 1.0
    lr_schedule: str = "constant"
    total_steps: int = 0  # cosine decay horizon; required when lr_schedule="cosine"

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.logit_normal[1] <= 0:
            raise ValueError("logit-normal std must be positive")
        if self.time_shift < 1.0:
            raise ValueError("time_shift must be >= 1")
        if self.repa_coeff < 0:
            raise ValueError("repa_coeff must be >= 0")
        if self.batch < 1 or self.warmup_steps < 0:
            raise ValueError("batch must be >= 1 and warmup_steps >= 0")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr schedule {self.lr_schedule!r}")
        if self.lr_schedule == "cosine" and self.total_steps < 1:
            raise ValueError("cosine schedule needs total_steps >= 1")


def shift_time(t: float, shift: float) -> float:
    """Monotone warp of [0,1] emphasizing high-noise times as shift grows."""
    return shift * t / (1.0 + (shift - 1.0) * t)


def sample_timestep(rng: np.random.Generator, cfg: TrainConfig) -> float:
    """Logit-normal draw, then the configured resolution shift."""
    mean, std = cfg.logit_normal
    u = rng.normal(mean, std)
    t = 1.0 / (1.0 + np.exp(-u))
    return shift_time(float(t), cfg.time_shift)


def make_pair(x_data: np.ndarray, noise: np.ndarray, t: float):
    """(x_t, v_target) on the straight path between data and noise."""
    x_data = np.asarray(x_data, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if x_data.shape != noise.shape:
        raise ShapeError(f"make_pair: shapes {x_data.shape} and {noise.shape} differ")
    x_t = (1.0 - t) * x_data + t * noise
    v_target = noise - x_data
    return x_t, v_target
