"""Closed-form matmul cost accounting across text-fusion strategies.

Exact integer arithmetic; one multiply-accumulate counts as 2 FLOPs. The
model covers attention (scores, values, QKV and output projections), the
feed-forward, and the per-block text-fusion projection. Softmax and
normalization are ignored: matmuls dominate and the structural claim under
test is how cost scales with the attended token count.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .llmstub import StubConfig
from .model import FusionStrategy, ModelConfig, PRESETS


@dataclass(frozen=True)
class BlockCost:
    index: int
    kind: str
    seq_len: int
    attn_flops: int
    proj_flops: int
    ffn_flops: int

    @property
    def total(self) -> int:
        return self.attn_flops + self.proj_flops + self.ffn_flops


@dataclass
class CostReport:
    strategy: FusionStrategy
    l_img: int
    l_txt: int
    per_block: list = field(default_factory=list)

    @property
    def totals(self) -> dict:
        attn = sum(b.attn_flops for b in self.per_block)
        proj = sum(b.proj_flops for b in self.per_block)
        ffn = sum(b.ffn_flops for b in self.per_block)
        return {
            "attn_flops": attn,
            "proj_flops": proj,
            "ffn_flops": ffn,
            "total": attn + proj + ffn,
        }


def seq_len(strategy: FusionStrategy, l_img: int, l_txt: int) -> int:
    """Attended token count per block under the given strategy."""
    if l_img < 0 or l_txt < 0:
        raise ValueError("token counts must be non-negative")
    if strategy is FusionStrategy.TOKEN_FUSION:
        return l_img + 2 * l_txt
    return l_img + l_txt


def _fusion_proj_flops(strategy: FusionStrategy, l_txt: int, d_llm: int, d_model: int) -> int:
    if strategy is FusionStrategy.DIM_FUSION:
        return 2 * l_txt * d_llm * (d_model // 2)
    if strategy is FusionStrategy.TOKEN_FUSION:
        return 2 * l_txt * d_llm * d_model
    return 0


def count_flops(
    cfg: ModelConfig, strategy: FusionStrategy, l_img: int, l_txt: int
) -> CostReport:
    """Per-block and total matmul FLOPs for one forward pass."""
    d = cfg.d_model
    seq = seq_len(strategy, l_img, l_txt)
    attn = 2 * seq * seq * d + 2 * seq * seq * d + 4 * seq * d * d
    ffn = 4 * seq * d * cfg.ffn_dim
    proj = _fusion_proj_flops(strategy, l_txt, cfg.llm.d_llm, d)
    report = CostReport(strategy=strategy, l_img=l_img, l_txt=l_txt)
    for i in range(cfg.n_blocks):
        kind = "dual" if i < cfg.n_dual else "single"
        report.per_block.append(
            BlockCost(
                index=i,
                kind=kind,
                seq_len=seq,
                attn_flops=attn,
                proj_flops=proj,
                ffn_flops=ffn,
            )
        )
    return report


def sweep(cfg: ModelConfig, strategies, l_imgs, l_txts) -> list[dict]:
    """Cartesian product of cost reports as flat machine-readable rows."""
    if not strategies or not l_imgs or not l_txts:
        raise ValueError("sweep needs non-empty strategy and length lists")
    rows = []
    for strategy in strategies:
        for l_img in l_imgs:
            for l_txt in l_txts:
                report = count_flops(cfg, strategy, l_img, l_txt)
                totals = report.totals
                rows.append(
                    {
                        "strategy": strategy.value,
                        "l_img": l_img,
                        "l_txt": l_txt,
                        "seq_len": report.per_block[0].seq_len if report.per_block else 0,
                        "n_blocks": len(report.per_block),
                        **totals,
                    }
                )
    return rows


def _preset_config(name: str, d_llm: int) -> ModelConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    llm = StubConfig(d_llm=d_llm, n_heads=max(1, d_llm // 128))
    return PRESETS[name](llm=llm)


def load_config(spec: str, d_llm: int = 2048) -> ModelConfig:
    """Resolve a preset name or a JSON config file into a ModelConfig."""
    if spec in PRESETS:
        return _preset_config(spec, d_llm)
    raw = json.loads(Path(spec).read_text("utf-8"))
    llm_raw = raw.pop("llm", {"d_llm": d_llm, "n_heads": max(1, d_llm // 128)})
    raw["llm"] = StubConfig(**llm_raw)
    raw["fusion"] = FusionStrategy.parse(raw.get("fusion", "dim-fusion"))
    raw["rope_dims"] = tuple(raw["rope_dims"])
    return ModelConfig(**raw)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="flops", description="attention/FFN cost accounting per fusion strategy"
    )
    parser.add_argument("--config", required=True, help="preset (table4, table5) or JSON file")
    parser.add_argument("--strategy", default="all", help="fusion strategy name, or 'all'")
    parser.add_argument("--limg", type=int, required=True, help="image token count")
    parser.add_argument("--ltxt", type=int, required=True, help="text token count")
    parser.add_argument("--dllm", type=int, default=2048, help="LLM hidden width for presets")
    parser.add_argument("--csv", action="store_true", help="emit CSV instead of JSON rows")
    args = parser.parse_args(argv)

    cfg = load_config(args.config, args.dllm)
    if args.strategy == "all":
        strategies = list(FusionStrategy)
    else:
        strategies = [FusionStrategy.parse(args.strategy)]
    rows = sweep(cfg, strategies, [args.limg], [args.ltxt])
    if args.csv:
        cols = list(rows[0].keys())
        print(",".join(cols))
        for row in rows:
            print(",".join(str(row[c]) for c in cols))
    else:
        for row in rows:
            print(json.dumps(row))
    return 0


if __name__ == "__main__":
    sys.exit(main())
