"""Dimension-wise LLM fusion for diffusion transformers, with caption tooling
and a reconstruction-based pairwise evaluation harness."""

__version__ = "0.1.0"
