"""Rotary position embedding over three independent coordinate axes.

The head dimension is partitioned into three slices; each slice is rotated
by angles derived from one coordinate of the token's (t, h, w) position
triple. Text tokens conventionally carry (index, 0, 0).
"""
from __future__ import annotations

import numpy as np

from .core import ShapeError, Tensor, as_tensor, make_node

_BASE = 10000.0
_table_cache: dict = {}


def _angle_tables(positions: np.ndarray, dims: tuple[int, int, int], head_dim: int):
    """cos/sin tables of shape [seq, 1, head_dim], cached per position set."""
    key = (positions.tobytes(), dims, head_dim)
    hit = _table_cache.get(key)
    if hit is not None:
        return hit
    seq = positions.shape[0]
    cos = np.empty((seq, head_dim))
    sin = np.empty((seq, head_dim))
    offset = 0
    for axis, d in enumerate(dims):
        half = d // 2
        freqs = _BASE ** (-np.arange(half) * 2.0 / d)
        ang = positions[:, axis, None] * freqs[None, :]
        c, s = np.cos(ang), np.sin(ang)
        cos[:, offset : offset + half] = c
        cos[:, offset + half : offset + d] = c
        sin[:, offset : offset + half] = s
        sin[:, offset + half : offset + d] = s
        offset += d
    tables = (cos[:, None, :], sin[:, None, :])
    if len(_table_cache) > 64:
        _table_cache.clear()
    _table_cache[key] = tables
    return tables


def _rotate_halves(x: np.ndarray, dims: tuple[int, int, int]) -> np.ndarray:
    """Per-slice (u, v) -> (-v, u), the 90-degree companion of each pair."""
    out = np.empty_like(x)
    offset = 0
    for d in dims:
        half = d // 2
        u = x[..., offset : offset + half]
        v = x[..., offset + half : offset + d]
        out[..., offset : offset + half] = -v
        out[..., offset + half : offset + d] = u
        offset += d
    return out


def rope_3d(x: Tensor, positions, dims: tuple[int, int, int]) -> Tensor:
    """Rotate ``x`` of shape [seq, heads, head_dim] by per-token position triples.

    ``dims`` = (d_t, d_h, d_w) must partition head_dim with even parts; the
    three coordinate columns of ``positions`` drive the three slices.
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"rope_3d expects [seq, heads, head_dim], got {x.shape}")
    d_t, d_h, d_w = dims
    head_dim = x.shape[-1]
    if d_t + d_h + d_w != head_dim:
        raise ShapeError(f"rope dims {dims} do not partition head_dim {head_dim}")
    if any(d % 2 for d in dims):
        raise ShapeError(f"rope dims {dims} must all be even")
    positions = np.asarray(positions, dtype=np.int64)
    if positions.shape != (x.shape[0], 3):
        raise ShapeError(
            f"positions shape {positions.shape} does not match sequence {x.shape[0]}"
        )
    cos, sin = _angle_tables(positions, dims, head_dim)
    y = x.data * cos + _rotate_halves(x.data, dims) * sin

    def bw(g):
        # Adjoint of a rotation is the rotation by the negated angle.
        return (g * cos - _rotate_halves(g, dims) * sin,)

    return make_node(y, (x,), bw)
