"""Representation-alignment auxiliary loss against a frozen feature encoder.

The frozen encoder is a random patchwise network standing in for a large
pretrained vision model: the loss plumbing, gating schedule, and coefficient
are the properties under test at desk scale, not feature quality.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import LatentGrid
from ..tensor import ShapeError, Tensor, div, linear, mean, mul, sqrt, square, sum_


class FrozenFeatures:
    """Deterministic patchwise feature extractor; never receives gradients."""

    def __init__(self, latent_channels: int, patch: int, feat_dim: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        in_dim = latent_channels * patch * patch
        hidden = max(2 * feat_dim, 16)
        self.w1 = rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(in_dim, hidden))
        self.w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, feat_dim))
        self.patch = patch
        self.feat_dim = feat_dim

    def __call__(self, latent: np.ndarray) -> np.ndarray:
        tokens = LatentGrid(latent, self.patch).tokens()
        h = np.tanh(tokens @ self.w1)
        return h @ self.w2


@dataclass
class RepaProbe:
    """Projects image tokens tapped at ``tap_block`` to the feature width."""

    tap_block: int
    w: Tensor
    b: Tensor
    features: FrozenFeatures

    @classmethod
    def create(cls, cfg, tap_block: int, feat_dim: int, rng: np.random.Generator, seed: int = 0):
        if not (0 <= tap_block < cfg.n_blocks):
            raise ValueError(f"tap_block {tap_block} out of range for {cfg.n_blocks} blocks")
        w = Tensor(rng.normal(0.0, 0.02, size=(cfg.d_model, feat_dim)), requires_grad=True, name="repa.w")
        b = Tensor(np.zeros(feat_dim), requires_grad=True, name="repa.b")
        return cls(tap_block, w, b, FrozenFeatures(cfg.latent_channels, cfg.patch, feat_dim, seed))


def repa_loss(probe: RepaProbe, tapped_tokens: Tensor, targets: np.ndarray) -> Tensor:
    """Negative mean cosine similarity between projections and targets."""
    targets = np.asarray(targets, dtype=np.float64)
    if tapped_tokens.shape[0] != targets.shape[0]:
        raise ShapeError(
            f"token count {tapped_tokens.shape[0]} does not match targets {targets.shape[0]}"
        )
    proj = linear(tapped_tokens, probe.w, probe.b)
    if proj.shape[1] != targets.shape[1]:
        raise ShapeError(f"feature widths differ: {proj.shape} vs {targets.shape}")
    t_const = Tensor(targets)
    dots = sum_(mul(proj, t_const), axis=1)
    norm_p = sqrt(sum_(square(proj), axis=1) + 1e-12)
    norm_t = np.sqrt((targets * targets).sum(axis=1) + 1e-12)
    cosine = div(dots, mul(norm_p, Tensor(norm_t)))
    return mul(mean(cosine), -1.0)
