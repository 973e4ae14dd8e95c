"""Decoupled-weight-decay adaptive-moment optimizer with linear warmup."""
from __future__ import annotations

import numpy as np

from ..tensor import Tensor


class AdamW:
    def __init__(self, params: dict[str, Tensor], lr: float, betas=(0.9, 0.999),
                 eps: float = 1e-15, weight_decay: float = 1e-4, warmup_steps: int = 0,
                 lr_schedule: str = "constant", total_steps: int = 0):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.warmup_steps = warmup_steps
        self.lr_schedule = lr_schedule
        self.total_steps = total_steps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def current_lr(self) -> float:
        lr = self.lr
        if self.lr_schedule == "cosine" and self.total_steps > 0:
            frac = min(self.step_count / self.total_steps, 1.0)
            lr *= 0.5 * (1.0 + np.cos(np.pi * frac))
        if self.warmup_steps > 0 and self.step_count < self.warmup_steps:
            lr *= (self.step_count + 1) / self.warmup_steps
        return lr

    def clip_gradients(self, max_norm: float) -> float:
        """Global-norm clipping; returns the pre-clip norm."""
        total = 0.0
        for p in self.params.values():
            if p.grad is not None:
                total += float((p.grad * p.grad).sum())
        norm = float(np.sqrt(total))
        if max_norm > 0 and norm > max_norm:
            scale = max_norm / norm
            for p in self.params.values():
                if p.grad is not None:
                    p.grad = p.grad * scale
        return norm

    def step(self) -> float:
        """One update from the accumulated gradients; returns the lr used."""
        lr_t = self.current_lr()
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.b1**t
        bc2 = 1.0 - self.b2**t
        for key, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[key]
            v = self.v[key]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data = p.data - lr_t * (update + self.weight_decay * p.data)
        return lr_t

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None
