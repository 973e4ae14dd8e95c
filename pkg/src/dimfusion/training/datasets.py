"""Procedural caption-conditioned toy datasets.

Each example pairs a deterministic structured caption with a latent derived
from the frozen text encoder's intermediate representations of that caption.
Because the latent mixes several layers, strategies that can read the whole
hidden stack have strictly more usable conditioning than a final-layer-only
bridge, which is the property the training comparisons probe.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..captions import (
    Aesthetics,
    Lighting,
    ObjectEntry,
    StructuredCaption,
    flatten,
)
from ..llmstub import Stub, encode, tokenize
from .loop import TrainExample

_COLORS = ["black", "white", "crimson", "teal", "golden", "violet", "amber", "jade"]
_NOUNS = ["mug", "apple", "kite", "lantern", "violin", "teapot", "bicycle", "sign"]
_LIGHTS = ["bright daylight", "dim indoor", "studio lighting", "golden hour"]
_MOODS = ["serene", "energetic", "mysterious", "joyful"]


def indexed_caption(i: int) -> StructuredCaption:
    """Deterministic caption #i; discriminative words appear early."""
    color = _COLORS[i % len(_COLORS)]
    noun = _NOUNS[(i // len(_COLORS)) % len(_NOUNS)]
    return StructuredCaption(
        short_description=f"{color} {noun} study {i:03d}",
        objects=(
            ObjectEntry(
                description=f"a {color} {noun}",
                location="center",
                relationship="alone on a plain surface",
                relative_size="medium",
                shape_and_color=f"{color}, simple silhouette",
            ),
        ),
        background_setting="plain seamless backdrop",
        lighting=Lighting(
            conditions=_LIGHTS[i % len(_LIGHTS)],
            direction="front-lit",
        ),
        aesthetics=Aesthetics(
            composition="centered",
            color_scheme=f"{color} on gray",
            mood_atmosphere=_MOODS[(i // 3) % len(_MOODS)],
        ),
        photographic_characteristics=None,
        style_medium="photograph",
        text_render=(),
        context=f"procedural toy example number {i}",
        artistic_style="minimalism",
    )


def caption_token_ids(caption: StructuredCaption, stub: Stub) -> list[int]:
    """Flatten, tokenize, and truncate to the stub's context window."""
    ids = tokenize(flatten(caption), stub.cfg.vocab_size)
    return ids[: stub.cfg.max_seq]


@dataclass
class LatentSynth:
    """Frozen map from a corpus of hidden stacks to latent grids.

    Each latent is a fixed random readout of the pooled embedding-output
    layer plus a smaller readout of the pooled final layer. Pooled features
    are z-scored ACROSS the corpus before the readout: captions share long
    common substrings, so raw pooled features barely vary between examples
    and would otherwise collapse every latent onto one point. The embedding
    layer is directly visible only to the per-block fusion paths (every
    strategy sees the final layer through the bridge), so the two weights
    control how much of the signal a final-layer-only model can reach.
    Deterministic in (seed, corpus).
    """

    latent_shape: tuple[int, int, int, int]
    d_llm: int
    first_weight: float = 1.0
    last_weight: float = 0.5
    seed: int = 0

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        size = int(np.prod(self.latent_shape))
        self.mix_first = rng.normal(0.0, 1.0, size=(self.d_llm, size))
        self.mix_last = rng.normal(0.0, 1.0, size=(self.d_llm, size))

    @staticmethod
    def _zscore_columns(rows: np.ndarray) -> np.ndarray:
        mu = rows.mean(axis=0)
        sd = rows.std(axis=0)
        sd[sd < 1e-12] = 1.0
        return (rows - mu) / sd

    def build(self, hiddens) -> np.ndarray:
        first = self._zscore_columns(np.stack([h.layers[0].mean(axis=0) for h in hiddens]))
        last = self._zscore_columns(np.stack([h.layers[-1].mean(axis=0) for h in hiddens]))
        acc = self.first_weight * (first @ self.mix_first)
        acc = acc + self.last_weight * (last @ self.mix_last)
        acc -= acc.mean()
        std = acc.std()
        if std > 0:
            acc /= std
        return acc.reshape((len(hiddens),) + tuple(self.latent_shape))


def procedural_dataset(
    n: int,
    stub: Stub,
    latent_shape: tuple[int, int, int, int],
    seed: int = 0,
) -> list[TrainExample]:
    """n deterministic caption-conditioned examples with derived latents."""
    synth = LatentSynth(
        latent_shape=latent_shape,
        d_llm=stub.cfg.d_llm,
        seed=seed,
    )
    hiddens = [
        encode(stub, caption_token_ids(indexed_caption(i), stub)) for i in range(n)
    ]
    latents = synth.build(hiddens)
    return [TrainExample(latent=latents[i], hidden=hiddens[i]) for i in range(n)]


def point_mass_dataset(stub: Stub, latent_shape, seed: int = 0) -> list[TrainExample]:
    """A single fixed (caption, latent) pair for convergence checks."""
    rng = np.random.default_rng(seed)
    caption = indexed_caption(0)
    hidden = encode(stub, caption_token_ids(caption, stub))
    return [TrainExample(latent=rng.normal(size=latent_shape), hidden=hidden)]
