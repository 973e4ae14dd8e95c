"""Dual-stream and single-stream transformer blocks with joint attention."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..tensor import (
    Tensor,
    add,
    concat,
    gelu,
    layer_norm,
    linear,
    matmul,
    mul,
    reshape,
    rms_norm,
    rope_3d,
    silu,
    softmax,
    split,
    transpose,
)


def norm_fn(cfg):
    return rms_norm if cfg.norm == "rms" else layer_norm


@dataclass
class ForwardTrace:
    """Per-block diagnostics recorded during a forward pass.

    Setting ``tap_block`` captures that block's output image tokens in
    ``tapped`` (still attached to the graph, so auxiliary losses can
    backpropagate through them).
    """

    blocks: list = field(default_factory=list)
    tap_block: int | None = None
    tapped: Tensor | None = None

    def record(self, index: int, kind: str, seq_len: int, rowsum_dev: float):
        self.blocks.append(
            {
                "index": index,
                "kind": kind,
                "seq_len": seq_len,
                "attn_rowsum_dev": rowsum_dev,
            }
        )


def modulation(t_emb: Tensor, w: Tensor, b: Tensor, n_chunks: int):
    """Scale/shift/gate vectors from the timestep embedding."""
    out = linear(silu(t_emb), w, b)
    d = out.shape[-1] // n_chunks
    return split(out, 0, [d] * n_chunks)


def _modulate(x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    return add(mul(x, add(scale, 1.0)), shift)


def _heads(x: Tensor, n_heads: int, head_dim: int, positions, rope_dims):
    """[L, D] -> rotated q/k or raw v as [heads, L, head_dim]."""
    seq = x.shape[0]
    h = reshape(x, (seq, n_heads, head_dim))
    if positions is not None:
        h = rope_3d(h, positions, rope_dims)
    return transpose(h, (1, 0, 2))


def _attend(q: Tensor, k: Tensor, v: Tensor, head_dim: int):
    scores = mul(matmul(q, transpose(k, (0, 2, 1))), 1.0 / np.sqrt(head_dim))
    probs = softmax(scores, axis=-1)
    ctx = matmul(probs, v)
    rowsum_dev = float(np.abs(probs.data.sum(axis=-1) - 1.0).max())
    seq = q.shape[1]
    d = q.shape[0] * q.shape[2]
    return reshape(transpose(ctx, (1, 0, 2)), (seq, d)), rowsum_dev


def _stream_qkv(x: Tensor, p: dict, prefix: str, cfg, scale, shift, positions):
    d = cfg.d_model
    pre = norm_fn(cfg)(x, -1, p[f"{prefix}.norm1"])
    moded = _modulate(pre, scale, shift)
    qkv = linear(moded, p[f"{prefix}.wqkv"], p[f"{prefix}.bqkv"])
    q, k, v = split(qkv, 1, [d, d, d])
    q = _heads(q, cfg.n_heads, cfg.head_dim, positions, cfg.rope_dims)
    k = _heads(k, cfg.n_heads, cfg.head_dim, positions, cfg.rope_dims)
    v = _heads(v, cfg.n_heads, cfg.head_dim, None, cfg.rope_dims)
    return q, k, v


def _stream_ffn(x: Tensor, p: dict, prefix: str, cfg, scale, shift, gate) -> Tensor:
    pre = norm_fn(cfg)(x, -1, p[f"{prefix}.norm2"])
    moded = _modulate(pre, scale, shift)
    h = gelu(linear(moded, p[f"{prefix}.ffn.w1"], p[f"{prefix}.ffn.b1"]))
    y = linear(h, p[f"{prefix}.ffn.w2"], p[f"{prefix}.ffn.b2"])
    return add(x, mul(y, gate))


def dual_stream_block(
    text: Tensor,
    image: Tensor,
    t_emb: Tensor,
    params: dict,
    index: int,
    cfg,
    pos_text,
    pos_image,
    trace: ForwardTrace | None = None,
):
    """Separate text/image parameters, one joint attention over both streams."""
    d = cfg.d_model
    p_text, p_img = f"blocks.{index}.text", f"blocks.{index}.img"
    mod_t = modulation(t_emb, params[f"{p_text}.mod.w"], params[f"{p_text}.mod.b"], 6)
    mod_i = modulation(t_emb, params[f"{p_img}.mod.w"], params[f"{p_img}.mod.b"], 6)

    qt, kt, vt = _stream_qkv(text, params, p_text, cfg, mod_t[0], mod_t[1], pos_text)
    qi, ki, vi = _stream_qkv(image, params, p_img, cfg, mod_i[0], mod_i[1], pos_image)
    q = concat([qt, qi], axis=1)
    k = concat([kt, ki], axis=1)
    v = concat([vt, vi], axis=1)
    ctx, rowsum_dev = _attend(q, k, v, cfg.head_dim)
    l_txt, l_img = text.shape[0], image.shape[0]
    ctx_t, ctx_i = split(ctx, 0, [l_txt, l_img])

    text = add(text, mul(linear(ctx_t, params[f"{p_text}.wo"], params[f"{p_text}.bo"]), mod_t[2]))
    image = add(image, mul(linear(ctx_i, params[f"{p_img}.wo"], params[f"{p_img}.bo"]), mod_i[2]))
    text = _stream_ffn(text, params, p_text, cfg, mod_t[3], mod_t[4], mod_t[5])
    image = _stream_ffn(image, params, p_img, cfg, mod_i[3], mod_i[4], mod_i[5])
    if trace is not None:
        trace.record(index, "dual", l_txt + l_img, rowsum_dev)
    return text, image


def single_stream_block(
    tokens: Tensor,
    t_emb: Tensor,
    params: dict,
    index: int,
    cfg,
    positions,
    trace: ForwardTrace | None = None,
) -> Tensor:
    """One parameter set over the concatenated text+image sequence."""
    prefix = f"blocks.{index}.uni"
    mod = modulation(t_emb, params[f"{prefix}.mod.w"], params[f"{prefix}.mod.b"], 6)
    q, k, v = _stream_qkv(tokens, params, prefix, cfg, mod[0], mod[1], positions)
    ctx, rowsum_dev = _attend(q, k, v, cfg.head_dim)
    tokens = add(tokens, mul(linear(ctx, params[f"{prefix}.wo"], params[f"{prefix}.bo"]), mod[2]))
    tokens = _stream_ffn(tokens, params, prefix, cfg, mod[3], mod[4], mod[5])
    if trace is not None:
        trace.record(index, "single", tokens.shape[0], rowsum_dev)
    return tokens
