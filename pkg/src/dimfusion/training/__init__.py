"""Flow-matching training and sampling at toy scale."""

from .datasets import (
    LatentSynth,
    caption_token_ids,
    indexed_caption,
    point_mass_dataset,
    procedural_dataset,
)
from .loop import NaNLossError, TrainExample, TrainState, euler_sample, eval_fm_loss, init_state, train_step
from .optim import AdamW
from .repa import FrozenFeatures, RepaProbe, repa_loss
from .schedule import TrainConfig, make_pair, sample_timestep, shift_time

__all__ = [
    "AdamW",
    "FrozenFeatures",
    "LatentSynth",
    "NaNLossError",
    "RepaProbe",
    "TrainConfig",
    "TrainExample",
    "TrainState",
    "caption_token_ids",
    "euler_sample",
    "eval_fm_loss",
    "indexed_caption",
    "init_state",
    "make_pair",
    "point_mass_dataset",
    "procedural_dataset",
    "repa_loss",
    "sample_timestep",
    "shift_time",
    "train_step",
]
