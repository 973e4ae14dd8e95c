"""End-to-end velocity prediction: latent grid in, latent grid out."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..llmstub import HiddenStack
from ..tensor import Tensor, concat, linear, narrow, reshape, silu, split, transpose
from .blocks import ForwardTrace, dual_stream_block, modulation, norm_fn, single_stream_block
from .config import ConfigError, FusionStrategy, ModelConfig, param_shapes
from .fusion import block_fuse, block_unfuse, init_text_encoding, layer_map


class LatentGrid:
    """A [T, H, W, C] latent tensor with its patch-token view and positions."""

    def __init__(self, array: np.ndarray, patch: int = 1):
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 4:
            raise ConfigError(f"latent grid must be [T, H, W, C], got {array.shape}")
        t, h, w, _c = array.shape
        if h % patch or w % patch:
            raise ConfigError(f"H, W of {array.shape} must divide patch {patch}")
        self.array = array
        self.patch = patch
        self.grid = (t, h // patch, w // patch)
        self._positions: np.ndarray | None = None

    @property
    def n_tokens(self) -> int:
        t, hp, wp = self.grid
        return t * hp * wp

    def tokens(self) -> np.ndarray:
        t, hp, wp = self.grid
        p = self.patch
        _, h, w, c = self.array.shape
        x = self.array.reshape(t, hp, p, wp, p, c)
        return x.transpose(0, 1, 3, 2, 4, 5).reshape(self.n_tokens, p * p * c)

    def positions(self) -> np.ndarray:
        if self._positions is None:
            t, hp, wp = self.grid
            ts, hs, ws = np.meshgrid(
                np.arange(t), np.arange(hp), np.arange(wp), indexing="ij"
            )
            self._positions = np.stack([ts.ravel(), hs.ravel(), ws.ravel()], axis=1)
        return self._positions


def text_positions(l_txt: int) -> np.ndarray:
    """Text tokens ride the t axis: (index, 0, 0)."""
    pos = np.zeros((l_txt, 3), dtype=np.int64)
    pos[:, 0] = np.arange(l_txt)
    return pos


def time_embedding(t: float, d: int) -> np.ndarray:
    half = d // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    ang = float(t) * 1000.0 * freqs
    return np.concatenate([np.cos(ang), np.sin(ang)])


def _unpatchify(tokens: Tensor, grid, patch: int, channels: int) -> Tensor:
    t, hp, wp = grid
    x = reshape(tokens, (t, hp, wp, patch, patch, channels))
    x = transpose(x, (0, 1, 3, 2, 4, 5))
    return reshape(x, (t, hp * patch, wp * patch, channels))


class _TextState:
    """Carries the strategy-specific text representation between blocks."""

    def __init__(self, cfg: ModelConfig, params: dict, hs: HiddenStack):
        self.cfg = cfg
        self.params = params
        self.hs = hs
        self.l_txt = hs.seq
        self.base_pos = text_positions(self.l_txt)
        self.lmap = layer_map(cfg.n_blocks, len(hs.layers))
        if cfg.fusion is FusionStrategy.DIM_FUSION:
            self.enc = init_text_encoding(hs, params["bridge.w"], params["bridge.b"])
        else:
            self.enc = linear(Tensor(hs.layers[-1]), params["bridge.w"], params["bridge.b"])

    def enter_block(self, index: int):
        """Text tokens and positions fed to block ``index``."""
        cfg, p = self.cfg, self.params
        if cfg.fusion is FusionStrategy.DIM_FUSION:
            layer = Tensor(self.hs.layers[self.lmap[index]])
            fused = block_fuse(self.enc, layer, p[f"fuse.{index}.w"], p[f"fuse.{index}.b"])
            return fused, self.base_pos
        if cfg.fusion is FusionStrategy.TOKEN_FUSION:
            layer = Tensor(self.hs.layers[self.lmap[index]])
            extra = linear(layer, p[f"fuse.{index}.w"], p[f"fuse.{index}.b"])
            fused = concat([self.enc, extra], axis=0)
            # Appended intermediate-layer tokens continue the text position
            # range, so attention can tell the two segments apart.
            extra_pos = self.base_pos.copy()
            extra_pos[:, 0] += self.l_txt
            return fused, np.concatenate([self.base_pos, extra_pos])
        return self.enc, self.base_pos

    def exit_block(self, text_out: Tensor):
        cfg = self.cfg
        if cfg.fusion is FusionStrategy.DIM_FUSION:
            self.enc = block_unfuse(text_out)
        elif cfg.fusion is FusionStrategy.TOKEN_FUSION:
            self.enc = narrow(text_out, axis=0, start=0, length=self.l_txt)
        else:
            self.enc = text_out


def forward(
    cfg: ModelConfig,
    params: dict,
    noisy_latents,
    hs: HiddenStack,
    t: float,
    trace: ForwardTrace | None = None,
) -> Tensor:
    """Predict the velocity field for ``noisy_latents`` at time ``t``.

    Output shape equals the latent grid shape for every fusion strategy.
    """
    grid = noisy_latents if isinstance(noisy_latents, LatentGrid) else LatentGrid(
        np.asarray(noisy_latents), cfg.patch
    )
    if grid.patch != cfg.patch:
        raise ConfigError(f"latent grid patch {grid.patch} != config patch {cfg.patch}")
    if grid.array.shape[-1] != cfg.latent_channels:
        raise ConfigError(
            f"latent channels {grid.array.shape[-1]} != config {cfg.latent_channels}"
        )
    if hs.seq > cfg.llm.max_seq:
        raise ConfigError(f"text length {hs.seq} exceeds stub max_seq {cfg.llm.max_seq}")

    image = linear(Tensor(grid.tokens()), params["patch.w"], params["patch.b"])
    pos_img = grid.positions()
    t_emb = linear(
        silu(linear(Tensor(time_embedding(t, cfg.t_emb_dim)), params["time.w1"], params["time.b1"])),
        params["time.w2"],
        params["time.b2"],
    )
    text = _TextState(cfg, params, hs)

    for i in range(cfg.n_dual):
        text_in, pos_t = text.enter_block(i)
        text_out, image = dual_stream_block(
            text_in, image, t_emb, params, i, cfg, pos_t, pos_img, trace
        )
        text.exit_block(text_out)
        if trace is not None and trace.tap_block == i:
            trace.tapped = image

    l_img = grid.n_tokens
    for i in range(cfg.n_dual, cfg.n_blocks):
        text_in, pos_t = text.enter_block(i)
        l_text = text_in.shape[0]
        tokens = concat([text_in, image], axis=0)
        positions = np.concatenate([pos_t, pos_img])
        out = single_stream_block(tokens, t_emb, params, i, cfg, positions, trace)
        text_out, image = split(out, 0, [l_text, l_img])
        text.exit_block(text_out)
        if trace is not None and trace.tap_block == i:
            trace.tapped = image

    scale, shift = modulation(t_emb, params["final.mod.w"], params["final.mod.b"], 2)
    pre = norm_fn(cfg)(image, -1, params["final.norm"])
    out_tokens = linear(
        pre * (scale + 1.0) + shift, params["final.w"], params["final.b"]
    )
    return _unpatchify(out_tokens, grid.grid, cfg.patch, cfg.latent_channels)


def save_checkpoint(path, cfg: ModelConfig, params: dict) -> None:
    """Flat archive: raw little-endian tensors plus a config manifest."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    index = []
    offset = 0
    with open(root / "params.bin", "wb") as fh:
        for name, shape in param_shapes(cfg):
            arr = np.ascontiguousarray(params[name].data, dtype="<f8")
            if arr.shape != shape:
                raise ConfigError(f"parameter {name} has shape {arr.shape}, expected {shape}")
            raw = arr.tobytes()
            index.append(
                {
                    "name": name,
                    "shape": list(shape),
                    "dtype": "<f8",
                    "offset": offset,
                    "nbytes": len(raw),
                }
            )
            fh.write(raw)
            offset += len(raw)
    manifest = {
        "config": {
            "n_dual": cfg.n_dual,
            "n_single": cfg.n_single,
            "d_model": cfg.d_model,
            "ffn_dim": cfg.ffn_dim,
            "n_heads": cfg.n_heads,
            "head_dim": cfg.head_dim,
            "rope_dims": list(cfg.rope_dims),
            "patch": cfg.patch,
            "fusion": cfg.fusion.value,
            "latent_channels": cfg.latent_channels,
            "t_emb_dim": cfg.t_emb_dim,
            "norm": cfg.norm,
            "llm": {
                "n_layers": cfg.llm.n_layers,
                "d_llm": cfg.llm.d_llm,
                "n_heads": cfg.llm.n_heads,
                "vocab_size": cfg.llm.vocab_size,
                "max_seq": cfg.llm.max_seq,
                "seed": cfg.llm.seed,
            },
        },
        "params": index,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2), "utf-8")


def load_checkpoint(path):
    """Returns (cfg, params) from a checkpoint directory."""
    from ..llmstub import StubConfig
    from ..tensor import Tensor

    root = Path(path)
    manifest = json.loads((root / "manifest.json").read_text("utf-8"))
    c = manifest["config"]
    cfg = ModelConfig(
        n_dual=c["n_dual"],
        n_single=c["n_single"],
        d_model=c["d_model"],
        ffn_dim=c["ffn_dim"],
        n_heads=c["n_heads"],
        head_dim=c["head_dim"],
        rope_dims=tuple(c["rope_dims"]),
        patch=c["patch"],
        fusion=FusionStrategy(c["fusion"]),
        llm=StubConfig(**c["llm"]),
        latent_channels=c["latent_channels"],
        t_emb_dim=c.get("t_emb_dim", 0),
        norm=c.get("norm", "rms"),
    )
    raw = (root / "params.bin").read_bytes()
    params = {}
    for entry in manifest["params"]:
        arr = np.frombuffer(
            raw, dtype=entry["dtype"], count=int(np.prod(entry["shape"])),
            offset=entry["offset"],
        ).reshape(entry["shape"])
        params[entry["name"]] = Tensor(arr.copy(), requires_grad=True, name=entry["name"])
    return cfg, params
