"""Fixed-width one-hot encoding of samples, observations and latent masks.

Every variable owns a contiguous block of width ``K_j``. Unobserved variables
are an all-zero block in the observation vector; the mask is 1 on latent
(unobserved) blocks and 0 on observed ones. With ``extra_state=True`` each
block of the *observation* vector gets one additional slot flagging
"unobserved" instead of staying all-zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .bn import BayesianNetwork


@dataclass(frozen=True)
class OneHotLayout:
    cards: tuple[int, ...]
    extra_state: bool = False

    @property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(x) for x in np.concatenate([[0], np.cumsum(self.cards)[:-1]]))

    @property
    def width(self) -> int:
        return int(sum(self.cards))

    @property
    def obs_width(self) -> int:
        return self.width + (len(self.cards) if self.extra_state else 0)

    @property
    def n_vars(self) -> int:
        return len(self.cards)

    def block(self, j: int) -> slice:
        off = self.offsets[j]
        return slice(off, off + self.cards[j])

    @property
    def block_index(self) -> np.ndarray:
        """Variable index of every one of the ``width`` columns."""
        return np.repeat(np.arange(self.n_vars), self.cards)


def build_layout(net: BayesianNetwork, extra_state: bool = False) -> OneHotLayout:
    return OneHotLayout(net.cards, extra_state)


def encode_assignments(layout: OneHotLayout, states: np.ndarray) -> np.ndarray:
    """``(n, M)`` integer states -> ``(n, D)`` one-hot rows."""
    states = np.atleast_2d(np.asarray(states, dtype=np.int64))
    if states.shape[1] != layout.n_vars:
        raise ValueError(f"expected {layout.n_vars} variables, got {states.shape[1]}")
    if (states < 0).any() or (states >= np.asarray(layout.cards)).any():
        raise ValueError("state index out of range")
    out = np.zeros((len(states), layout.width))
    cols = states + np.asarray(layout.offsets)
    out[np.arange(len(states))[:, None], cols] = 1.0
    return out


def encode_assignment(layout: OneHotLayout, assignment) -> np.ndarray:
    return encode_assignments(layout, np.asarray(assignment)[None, :])[0]


def decode_assignment(layout: OneHotLayout, x: np.ndarray) -> np.ndarray:
    return np.asarray([int(np.argmax(x[layout.block(j)])) for j in range(layout.n_vars)])


def latent_mask(layout: OneHotLayout, observed: np.ndarray) -> np.ndarray:
    """Boolean ``(n, M)`` observed indicators -> ``(n, D)`` float mask, 1 on latent blocks."""
    observed = np.atleast_2d(observed)
    return np.repeat(~observed, layout.cards, axis=1).astype(np.float64)


def observe(layout: OneHotLayout, x: np.ndarray, observed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch version of :func:`encode_observation` from one-hot rows and indicators.

    Returns ``(o, mask)``; ``o`` has ``layout.obs_width`` columns.
    """
    observed = np.atleast_2d(observed)
    mask = latent_mask(layout, observed)
    o = x * (1.0 - mask)
    if layout.extra_state:
        o = _insert_unobserved_slots(layout, o, ~observed)
    return o, mask


def _insert_unobserved_slots(layout: OneHotLayout, o: np.ndarray, unobserved: np.ndarray) -> np.ndarray:
    parts = []
    for j in range(layout.n_vars):
        parts += [o[:, layout.block(j)], unobserved[:, j:j + 1].astype(np.float64)]
    return np.concatenate(parts, axis=1)


def encode_observation(layout: OneHotLayout, evidence: Mapping[int, int]) -> tuple[np.ndarray, np.ndarray]:
    observed = np.zeros(layout.n_vars, dtype=bool)
    states = np.zeros(layout.n_vars, dtype=np.int64)
    for j, s in evidence.items():
        if not 0 <= s < layout.cards[j]:
            raise ValueError(f"state {s} out of range for variable {j}")
        observed[j] = True
        states[j] = s
    o, mask = observe(layout, encode_assignments(layout, states[None, :]), observed[None, :])
    return o[0], mask[0]


def decode_distribution(layout: OneHotLayout, y: np.ndarray) -> list[np.ndarray]:
    """Raw per-variable slices of a length-D prediction."""
    y = np.asarray(y, dtype=float)
    if y.shape != (layout.width,):
        raise ValueError(f"expected a vector of length {layout.width}, got shape {y.shape}")
    return [y[layout.block(j)].copy() for j in range(layout.n_vars)]


def normalized_view(block: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and renormalize; an all-zero block becomes uniform."""
    b = np.clip(np.asarray(block, dtype=float), 0.0, 1.0)
    s = b.sum()
    return b / s if s > 0 else np.full(len(b), 1.0 / len(b))
