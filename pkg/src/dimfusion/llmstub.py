"""Small frozen causal transformer used as the text encoder.

Random-initialized stand-in for a pretrained decoder-only LLM: it exposes
the per-layer hidden states that the fusion strategies consume. Weights are
plain numpy arrays and never participate in gradient graphs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigError(ValueError):
    pass


class EmptySequence(ValueError):
    pass


class SeqTooLong(ValueError):
    pass


class IdOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class StubConfig:
    n_layers: int = 4
    d_llm: int = 32
    n_heads: int = 4
    vocab_size: int = 256
    max_seq: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.d_llm % self.n_heads != 0:
            raise ConfigError(
                f"d_llm {self.d_llm} not divisible by n_heads {self.n_heads}"
            )
        for name in ("n_layers", "d_llm", "n_heads", "vocab_size", "max_seq"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")


@dataclass
class HiddenStack:
    """Per-layer hidden states: embedding output plus each block's output.

    ``layers`` has n_layers + 1 entries, each [seq, d_llm].
    """

    layers: list = field(default_factory=list)

    @property
    def seq(self) -> int:
        return self.layers[0].shape[0]

    @property
    def width(self) -> int:
        return self.layers[0].shape[1]


def _rms(x):
    return x / np.sqrt((x * x).mean(axis=-1, keepdims=True) + 1e-6)


def _posenc(max_seq: int, d: int) -> np.ndarray:
    # Scaled to the embedding std so position does not drown token identity.
    pos = np.arange(max_seq)[:, None]
    i = np.arange(d // 2)[None, :]
    ang = pos / (10000.0 ** (2 * i / d))
    enc = np.zeros((max_seq, d))
    enc[:, 0::2] = np.sin(ang)
    enc[:, 1::2] = np.cos(ang)
    return 0.02 * enc


class Stub:
    """Frozen causal transformer; immutable after construction."""

    def __init__(self, cfg: StubConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        d = cfg.d_llm
        std = 0.02
        self.embedding = rng.normal(0.0, std, size=(cfg.vocab_size, d))
        self.posenc = _posenc(cfg.max_seq, d)
        self.blocks = []
        for _ in range(cfg.n_layers):
            self.blocks.append(
                {
                    "wqkv": rng.normal(0.0, std, size=(d, 3 * d)),
                    "wo": rng.normal(0.0, std, size=(d, d)),
                    "w1": rng.normal(0.0, std, size=(d, 4 * d)),
                    "w2": rng.normal(0.0, std, size=(4 * d, d)),
                }
            )

    def weight_fingerprint(self) -> bytes:
        import hashlib

        h = hashlib.sha256()
        h.update(self.embedding.tobytes())
        for blk in self.blocks:
            for key in sorted(blk):
                h.update(blk[key].tobytes())
        return h.digest()


def init_stub(cfg: StubConfig) -> Stub:
    return Stub(cfg)


def encode(stub: Stub, token_ids) -> HiddenStack:
    """Run the frozen stub, returning every layer's hidden states.

    Causal self-attention throughout; no gradients touch stub weights.
    """
    ids = np.asarray(token_ids, dtype=np.int64)
    cfg = stub.cfg
    if ids.size == 0:
        raise EmptySequence("cannot encode an empty token sequence")
    if ids.shape[0] > cfg.max_seq:
        raise SeqTooLong(f"sequence length {ids.shape[0]} exceeds max_seq {cfg.max_seq}")
    if ids.min() < 0 or ids.max() >= cfg.vocab_size:
        raise IdOutOfRange(f"token ids must be in [0, {cfg.vocab_size})")

    seq = ids.shape[0]
    d = cfg.d_llm
    n_heads = cfg.n_heads
    hd = d // n_heads
    mask = np.triu(np.full((seq, seq), -np.inf), k=1)

    x = stub.embedding[ids] + stub.posenc[:seq]
    layers = [x.copy()]
    for blk in stub.blocks:
        qkv = _rms(x) @ blk["wqkv"]
        q, k, v = np.split(qkv, 3, axis=-1)
        q = q.reshape(seq, n_heads, hd).transpose(1, 0, 2)
        k = k.reshape(seq, n_heads, hd).transpose(1, 0, 2)
        v = v.reshape(seq, n_heads, hd).transpose(1, 0, 2)
        scores = q @ k.transpose(0, 2, 1) / np.sqrt(hd) + mask
        scores -= scores.max(axis=-1, keepdims=True)
        w = np.exp(scores)
        w /= w.sum(axis=-1, keepdims=True)
        attn = (w @ v).transpose(1, 0, 2).reshape(seq, d)
        x = x + attn @ blk["wo"]
        h = _rms(x) @ blk["w1"]
        h = h * (h > 0)
        x = x + h @ blk["w2"]
        layers.append(x.copy())
    return HiddenStack(layers)


def tokenize(text: str, vocab_size: int = 256) -> list[int]:
    """Byte-level hashing tokenizer; injective per byte when vocab >= 256."""
    raw = text.encode("utf-8")
    if vocab_size >= 256:
        return list(raw)
    return [b % vocab_size for b in raw]
