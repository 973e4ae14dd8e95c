"""Diffusion transformer with selectable text-fusion strategies."""

from .blocks import ForwardTrace, dual_stream_block, single_stream_block
from .config import (
    ALL_STRATEGIES,
    ConfigError,
    FusionStrategy,
    ModelConfig,
    PRESETS,
    init_params,
    param_count,
    param_shapes,
    table4_config,
    table5_config,
)
from .fusion import TooFewLayers, block_fuse, block_unfuse, init_text_encoding, layer_map
from .network import (
    LatentGrid,
    forward,
    load_checkpoint,
    save_checkpoint,
    text_positions,
    time_embedding,
)

__all__ = [
    "ALL_STRATEGIES",
    "ConfigError",
    "ForwardTrace",
    "FusionStrategy",
    "LatentGrid",
    "ModelConfig",
    "PRESETS",
    "TooFewLayers",
    "block_fuse",
    "block_unfuse",
    "dual_stream_block",
    "forward",
    "init_params",
    "init_text_encoding",
    "layer_map",
    "load_checkpoint",
    "param_count",
    "param_shapes",
    "save_checkpoint",
    "single_stream_block",
    "table4_config",
    "table5_config",
    "text_positions",
    "time_embedding",
]
