"""Finite-difference verification of reverse-mode gradients."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .core import Tensor, backward, no_grad


def grad_check(
    f: Callable[[Sequence[Tensor]], Tensor],
    leaves: Sequence[Tensor],
    eps: float,
    coords_per_leaf: int | None = None,
    rng_seed: int = 0,
) -> float:
    """Max relative error between backward gradients and central differences.

    Evaluates f twice per checked coordinate with the coordinate nudged by
    +/- eps, compares (f+ - f-)/(2 eps) against the reverse-mode gradient,
    and returns the worst relative error, where the error denominator is
    floored at 1 so near-zero gradients are compared absolutely.

    ``coords_per_leaf`` caps how many coordinates of each leaf are probed
    (a deterministic random subset); None checks every coordinate.
    """
    if not (0.0 < eps <= 1e-2):
        raise ValueError(f"eps must be in (0, 1e-2], got {eps}")
    for leaf in leaves:
        leaf.zero_grad()
    root = f(leaves)
    backward(root)
    analytic = [
        np.zeros(leaf.shape) if leaf.grad is None else leaf.grad for leaf in leaves
    ]

    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for leaf, ad in zip(leaves, analytic):
        flat = leaf.data.reshape(-1)
        ad_flat = np.asarray(ad).reshape(-1)
        n = flat.size
        if coords_per_leaf is not None and coords_per_leaf < n:
            coords = rng.choice(n, size=coords_per_leaf, replace=False)
        else:
            coords = range(n)
        for i in coords:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + eps
                f_plus = float(f(leaves).data)
                flat[i] = orig - eps
                f_minus = float(f(leaves).data)
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * eps)
            err = abs(fd - ad_flat[i]) / max(1.0, abs(fd), abs(ad_flat[i]))
            if err > worst:
                worst = err
    return worst
