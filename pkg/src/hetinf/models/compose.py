"""Merge per-variable one-hidden-layer nets into a single net with a block-diagonal output layer."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..nn import NetSpec, Params


def compose_block_diagonal(members: Sequence[tuple[NetSpec, Params]]) -> tuple[NetSpec, Params]:
    """Hidden units are the members' hidden units side by side; member ``i`` writes output block ``i``.

    Every off-block weight is an exact zero, so each output coordinate sums
    the same products as its member (plus exact zeros).
    """
    if not members:
        raise ValueError("need at least one member net")
    specs = [s for s, _ in members]
    d_in = specs[0].d_in
    acts = specs[0].activations
    for s in specs:
        if s.n_layers != 2:
            raise ValueError("members must have exactly one hidden layer")
        if s.d_in != d_in:
            raise ValueError(f"member input width {s.d_in} != {d_in}")
        if s.activations != acts:
            raise ValueError("members must share activations")
    hs = [s.sizes[1] for s in specs]
    ks = [s.sizes[2] for s in specs]
    w1 = np.hstack([p.weights[0] for _, p in members])
    b1 = np.concatenate([p.biases[0] for _, p in members])
    w2 = np.zeros((sum(hs), sum(ks)))
    r = c = 0
    for (_, p), h, k in zip(members, hs, ks):
        w2[r:r + h, c:c + k] = p.weights[1]
        r, c = r + h, c + k
    b2 = np.concatenate([p.biases[1] for _, p in members])
    return NetSpec((d_in, sum(hs), sum(ks)), acts), Params([w1, w2], [b1, b2])
