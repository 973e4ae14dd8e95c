"""Architecture configuration, named presets, and the parameter inventory.

The inventory is the single source of truth for parameter names and shapes:
initialization, checkpointing, and param_count all walk the same listing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator

import numpy as np

from ..llmstub import StubConfig


class ConfigError(ValueError):
    pass


class FusionStrategy(str, Enum):
    FINAL_LAYER_ONLY = "final-layer-only"
    TOKEN_FUSION = "token-fusion"
    DIM_FUSION = "dim-fusion"

    @classmethod
    def parse(cls, name: str) -> "FusionStrategy":
        key = name.strip().lower().replace("_", "-")
        aliases = {
            "final-layer-only": cls.FINAL_LAYER_ONLY,
            "final": cls.FINAL_LAYER_ONLY,
            "finallayeronly": cls.FINAL_LAYER_ONLY,
            "baseline": cls.FINAL_LAYER_ONLY,
            "token-fusion": cls.TOKEN_FUSION,
            "tokenfusion": cls.TOKEN_FUSION,
            "dim-fusion": cls.DIM_FUSION,
            "dimfusion": cls.DIM_FUSION,
        }
        if key not in aliases:
            raise ConfigError(f"unknown fusion strategy {name!r}")
        return aliases[key]


ALL_STRATEGIES = (
    FusionStrategy.FINAL_LAYER_ONLY,
    FusionStrategy.TOKEN_FUSION,
    FusionStrategy.DIM_FUSION,
)


@dataclass(frozen=True)
class ModelConfig:
    n_dual: int
    n_single: int
    d_model: int
    ffn_dim: int
    n_heads: int
    head_dim: int
    rope_dims: tuple[int, int, int]
    patch: int = 1
    fusion: FusionStrategy = FusionStrategy.DIM_FUSION
    llm: StubConfig = field(default_factory=StubConfig)
    latent_channels: int = 4
    t_emb_dim: int = 0  # 0 means d_model
    norm: str = "rms"

    def __post_init__(self):
        if self.t_emb_dim == 0:
            object.__setattr__(self, "t_emb_dim", self.d_model)
        if self.t_emb_dim % 2:
            raise ConfigError("t_emb_dim must be even (half cos, half sin)")
        if self.norm not in ("rms", "layer"):
            raise ConfigError(f"unknown norm {self.norm!r}; use 'rms' or 'layer'")
        if self.n_heads * self.head_dim != self.d_model:
            raise ConfigError(
                f"n_heads*head_dim = {self.n_heads * self.head_dim} "
                f"must equal d_model = {self.d_model}"
            )
        if self.d_model % 2:
            raise ConfigError("d_model must be even (the text encoding carries D/2)")
        if sum(self.rope_dims) != self.head_dim:
            raise ConfigError(
                f"rope dims {self.rope_dims} do not partition head_dim {self.head_dim}"
            )
        if any(d % 2 for d in self.rope_dims):
            raise ConfigError(f"rope dims {self.rope_dims} must all be even")
        if self.n_dual < 0 or self.n_single < 0 or self.patch < 1:
            raise ConfigError("block counts must be >= 0 and patch >= 1")

    @property
    def n_blocks(self) -> int:
        return self.n_dual + self.n_single

    @property
    def token_dim(self) -> int:
        return self.latent_channels * self.patch * self.patch


def table4_config(llm: StubConfig | None = None, **overrides) -> ModelConfig:
    """The published full-scale architecture row (instantiable only at toy scale)."""
    kwargs = dict(
        n_dual=8,
        n_single=38,
        d_model=24 * 128,
        ffn_dim=12288,
        n_heads=24,
        head_dim=128,
        rope_dims=(16, 56, 56),
        patch=1,
        llm=llm or StubConfig(),
    )
    kwargs.update(overrides)
    return ModelConfig(**kwargs)


def table5_config(llm: StubConfig | None = None, **overrides) -> ModelConfig:
    """The published ablation architecture row."""
    kwargs = dict(
        n_dual=8,
        n_single=20,
        d_model=24 * 64,
        ffn_dim=6144,
        n_heads=24,
        head_dim=64,
        rope_dims=(4, 30, 30),
        patch=1,
        llm=llm or StubConfig(),
    )
    kwargs.update(overrides)
    return ModelConfig(**kwargs)


PRESETS = {"table4": table4_config, "table5": table5_config}


def _stream_shapes(prefix: str, d: int, f: int, dt: int) -> Iterator[tuple[str, tuple[int, ...]]]:
    yield f"{prefix}.norm1", (d,)
    yield f"{prefix}.wqkv", (d, 3 * d)
    yield f"{prefix}.bqkv", (3 * d,)
    yield f"{prefix}.wo", (d, d)
    yield f"{prefix}.bo", (d,)
    yield f"{prefix}.norm2", (d,)
    yield f"{prefix}.ffn.w1", (d, f)
    yield f"{prefix}.ffn.b1", (f,)
    yield f"{prefix}.ffn.w2", (f, d)
    yield f"{prefix}.ffn.b2", (d,)
    yield f"{prefix}.mod.w", (dt, 6 * d)
    yield f"{prefix}.mod.b", (6 * d,)


def param_shapes(cfg: ModelConfig) -> Iterator[tuple[str, tuple[int, ...]]]:
    """Every learned parameter as (name, shape), in a stable order."""
    d, f = cfg.d_model, cfg.ffn_dim
    dt = cfg.t_emb_dim
    tok = cfg.token_dim
    d_llm = cfg.llm.d_llm
    yield "patch.w", (tok, d)
    yield "patch.b", (d,)
    yield "time.w1", (dt, dt)
    yield "time.b1", (dt,)
    yield "time.w2", (dt, dt)
    yield "time.b2", (dt,)
    if cfg.fusion is FusionStrategy.DIM_FUSION:
        yield "bridge.w", (2 * d_llm, d // 2)
        yield "bridge.b", (d // 2,)
        for i in range(cfg.n_blocks):
            yield f"fuse.{i}.w", (d_llm, d // 2)
            yield f"fuse.{i}.b", (d // 2,)
    else:
        yield "bridge.w", (d_llm, d)
        yield "bridge.b", (d,)
        if cfg.fusion is FusionStrategy.TOKEN_FUSION:
            for i in range(cfg.n_blocks):
                yield f"fuse.{i}.w", (d_llm, d)
                yield f"fuse.{i}.b", (d,)
    for i in range(cfg.n_dual):
        yield from _stream_shapes(f"blocks.{i}.text", d, f, dt)
        yield from _stream_shapes(f"blocks.{i}.img", d, f, dt)
    for i in range(cfg.n_dual, cfg.n_blocks):
        yield from _stream_shapes(f"blocks.{i}.uni", d, f, dt)
    yield "final.norm", (d,)
    yield "final.mod.w", (dt, 2 * d)
    yield "final.mod.b", (2 * d,)
    yield "final.w", (d, tok)
    yield "final.b", (tok,)


def param_count(cfg: ModelConfig) -> int:
    """Exact learned-parameter count; the frozen text stub is excluded."""
    return sum(math.prod(shape) for _, shape in param_shapes(cfg))


def init_params(cfg: ModelConfig, rng: np.random.Generator, scheme: str = "train"):
    """Allocate parameters.

    ``train``: normal(0, 0.02) weights, zero biases, unit norm gains, and a
    zeroed final projection so the predicted velocity starts at zero.
    Modulation weights start small-random rather than zero: fully gated-off
    blocks leave cross-token routing to gate-growth luck at toy step budgets.
    ``random``: every tensor drawn from normal(0, 0.2); used by gradient and
    degeneracy tests that need fully generic weights.
    """
    from ..tensor import Tensor

    if scheme not in ("train", "random"):
        raise ConfigError(f"unknown init scheme {scheme!r}")
    params: dict[str, Tensor] = {}
    for name, shape in param_shapes(cfg):
        if scheme == "random":
            data = rng.normal(0.0, 0.2, size=shape)
        elif name.endswith((".norm1", ".norm2", "final.norm")):
            data = np.ones(shape)
        elif name in ("final.w", "final.b"):
            data = np.zeros(shape)
        elif name.endswith((".b", ".b1", ".b2", ".bqkv", ".bo", ".mod.b")):
            data = np.zeros(shape)
        elif name.startswith(("bridge.", "fuse.")):
            # Stub hidden states are ~0.02*sqrt(d_llm) in scale, far below
            # the unit-scale latent tokens; a larger init keeps the text
            # path's features comparable to the image path's from step one.
            data = rng.normal(0.0, 0.1, size=shape)
        else:
            data = rng.normal(0.0, 0.02, size=shape)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params
