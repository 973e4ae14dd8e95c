"""Text-encoding construction and per-block fusion primitives.

Dimension-wise fusion carries a D/2-wide text encoding between blocks.
Before each block the matching LLM layer is projected to D/2 and appended
along the embedding axis; after the block the appended half is discarded
and the carried slice becomes the new encoding.
"""
from __future__ import annotations

import math

from ..llmstub import HiddenStack
from ..tensor import Tensor, concat, linear, narrow


class TooFewLayers(ValueError):
    pass


def layer_map(n_blocks: int, n_llm_layers: int) -> list[int]:
    """Monotone map from block index to LLM layer index, covering 0..last."""
    if n_blocks < 1 or n_llm_layers < 1:
        raise ValueError("layer_map needs at least one block and one layer")
    last = n_llm_layers - 1
    if n_blocks == 1:
        return [last]
    return [math.floor(b * last / (n_blocks - 1) + 0.5) for b in range(n_blocks)]


def init_text_encoding(hs: HiddenStack, w: Tensor, b: Tensor) -> Tensor:
    """Bridge the last two LLM layers to the carried D/2 text encoding."""
    if len(hs.layers) < 2:
        raise TooFewLayers("need at least two hidden layers to build the text encoding")
    stacked = concat([Tensor(hs.layers[-1]), Tensor(hs.layers[-2])], axis=1)
    return linear(stacked, w, b)


def block_fuse(enc: Tensor, hs_layer, w: Tensor, b: Tensor) -> Tensor:
    """[enc | proj(hs_layer)] along the embedding axis, back to width D."""
    projected = linear(hs_layer if isinstance(hs_layer, Tensor) else Tensor(hs_layer), w, b)
    return concat([enc, projected], axis=1)


def block_unfuse(text_out: Tensor) -> Tensor:
    """Keep the carried first half of the block's text output."""
    half = text_out.shape[1] // 2
    return narrow(text_out, axis=1, start=0, length=half)
