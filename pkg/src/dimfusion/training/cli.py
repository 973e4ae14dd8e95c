"""Command-line training and sampling.

The training config is a flat key=value file ('#' starts a comment). Keys
and defaults are documented in the README; metrics stream as one JSON
object per step on stdout.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..captions import parse_caption
from ..llmstub import StubConfig, encode, init_stub
from ..model import FusionStrategy, ModelConfig, load_checkpoint, save_checkpoint
from .datasets import caption_token_ids, point_mass_dataset, procedural_dataset
from .loop import NaNLossError, euler_sample, init_state, train_step
from .repa import RepaProbe
from .schedule import TrainConfig


def parse_kv_file(path) -> dict[str, str]:
    out = {}
    for raw_line in Path(path).read_text("utf-8").splitlines():
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (expected key = value): {raw_line!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _get(kv, key, default, cast):
    if key not in kv:
        return default
    return cast(kv[key])


def _ints(text):
    return tuple(int(x) for x in text.replace("x", ",").split(","))


def _floats(text):
    return tuple(float(x) for x in text.split(","))


def build_configs(kv: dict[str, str]):
    stub_cfg = StubConfig(
        n_layers=_get(kv, "llm_layers", 4, int),
        d_llm=_get(kv, "d_llm", 32, int),
        n_heads=_get(kv, "llm_heads", 4, int),
        vocab_size=_get(kv, "vocab_size", 256, int),
        max_seq=_get(kv, "max_seq", 48, int),
        seed=_get(kv, "llm_seed", 7, int),
    )
    model_cfg = ModelConfig(
        n_dual=_get(kv, "n_dual", 1, int),
        n_single=_get(kv, "n_single", 1, int),
        d_model=_get(kv, "d_model", 32, int),
        ffn_dim=_get(kv, "ffn_dim", 64, int),
        n_heads=_get(kv, "n_heads", 4, int),
        head_dim=_get(kv, "head_dim", 8, int),
        rope_dims=_get(kv, "rope_dims", (2, 4, 2), _ints),
        patch=_get(kv, "patch", 2, int),
        fusion=FusionStrategy.parse(kv.get("fusion", "dim-fusion")),
        llm=stub_cfg,
        latent_channels=_get(kv, "latent_channels", 4, int),
        t_emb_dim=_get(kv, "t_emb_dim", 16, int),
        norm=kv.get("norm", "rms"),
    )
    steps = _get(kv, "steps", 2000, int)
    train_cfg = TrainConfig(
        lr=_get(kv, "lr", 1.5e-3, float),
        betas=_get(kv, "betas", (0.9, 0.999), _floats),
        eps=_get(kv, "eps", 1e-15, float),
        weight_decay=_get(kv, "weight_decay", 1e-4, float),
        warmup_steps=_get(kv, "warmup_steps", 100, int),
        logit_normal=_get(kv, "logit_normal", (0.0, 1.0), _floats),
        time_shift=_get(kv, "time_shift", 1.0, float),
        repa_coeff=_get(kv, "repa_coeff", 0.0, float),
        repa_until_step=_get(kv, "repa_until_step", 0, int),
        batch=_get(kv, "batch", 8, int),
        seed=_get(kv, "seed", 0, int),
        grad_clip=_get(kv, "grad_clip", 1.0, float),
        lr_schedule=kv.get("lr_schedule", "constant"),
        total_steps=_get(kv, "total_steps", steps, int)
        if kv.get("lr_schedule", "constant") == "cosine"
        else 0,
    )
    data_spec = {
        "dataset": kv.get("dataset", "procedural"),
        "n_examples": _get(kv, "n_examples", 64, int),
        "latent_shape": _get(kv, "latent_shape", (1, 8, 8, 4), _ints),
        "data_seed": _get(kv, "data_seed", 3, int),
        "steps": steps,
        "repa_tap_block": _get(kv, "repa_tap_block", 0, int),
        "repa_feat_dim": _get(kv, "repa_feat_dim", 16, int),
    }
    return model_cfg, train_cfg, data_spec


def train_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="train", description=__doc__)
    parser.add_argument("--config", required=True, help="key=value config file")
    parser.add_argument("--out", required=True, help="checkpoint directory")
    args = parser.parse_args(argv)

    kv = parse_kv_file(args.config)
    cfg, tcfg, data_spec = build_configs(kv)
    stub = init_stub(cfg.llm)
    shape = data_spec["latent_shape"]
    if data_spec["dataset"] == "point-mass":
        data = point_mass_dataset(stub, shape, seed=data_spec["data_seed"])
    elif data_spec["dataset"] == "procedural":
        data = procedural_dataset(data_spec["n_examples"], stub, shape, seed=data_spec["data_seed"])
    else:
        print(f"error: unknown dataset {data_spec['dataset']!r}", file=sys.stderr)
        return 2

    probe = None
    if tcfg.repa_coeff > 0:
        probe = RepaProbe.create(
            cfg,
            data_spec["repa_tap_block"],
            data_spec["repa_feat_dim"],
            np.random.default_rng(tcfg.seed + 1),
        )
    state = init_state(cfg, tcfg, probe=probe)
    try:
        for _ in range(data_spec["steps"]):
            idx = state.rng.integers(0, len(data), size=tcfg.batch)
            metrics = train_step(state, [data[i] for i in idx])
            print(json.dumps(metrics), flush=True)
    except NaNLossError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    save_checkpoint(args.out, cfg, state.params)
    (Path(args.out) / "train_config.json").write_text(
        json.dumps({"kv": kv, "latent_shape": list(shape)}, indent=2), "utf-8"
    )
    return 0


def sample_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sample", description="Euler-sample a latent from a caption")
    parser.add_argument("--ckpt", required=True)
    parser.add_argument("--caption", required=True, help="structured caption JSON file")
    parser.add_argument("--steps", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True, help="output .npy latent file")
    parser.add_argument("--shift", type=float, default=1.0)
    parser.add_argument("--guidance", type=float, default=None)
    parser.add_argument("--latent-shape", default=None, help="t,h,w,c when not recorded")
    args = parser.parse_args(argv)

    cfg, params = load_checkpoint(args.ckpt)
    if args.latent_shape:
        shape = _ints(args.latent_shape)
    else:
        echo = Path(args.ckpt) / "train_config.json"
        if not echo.exists():
            print("error: no recorded latent shape; pass --latent-shape", file=sys.stderr)
            return 2
        shape = tuple(json.loads(echo.read_text())["latent_shape"])

    caption = parse_caption(Path(args.caption).read_bytes())
    stub = init_stub(cfg.llm)
    hidden = encode(stub, caption_token_ids(caption, stub))
    latent = euler_sample(
        cfg,
        params,
        hidden,
        shape,
        steps=args.steps,
        shift=args.shift,
        seed=args.seed,
        guidance_scale=args.guidance,
    )
    np.save(args.out, latent)
    print(json.dumps({"out": args.out, "shape": list(shape), "steps": args.steps}))
    return 0


if __name__ == "__main__":
    sys.exit(train_main())
