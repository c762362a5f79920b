"""Bernoulli RBM over the one-hot vector, trained with CD-k from observation vectors.

Parameters are stored as a two-layer sigmoid net ``D -> H -> D`` whose second
weight matrix is the transpose of the first (tied), biases ``b`` (hidden) and
``a`` (visible).
"""
from __future__ import annotations

import numpy as np

from ..encoding import OneHotLayout
from ..nn import NetSpec, Params, make_optimizer, sigmoid, step_arrays
from ..sampling import Dataset, ObservationPolicy, TestSet
from .base import Batches, TrainedModel, fit_loop
from .config import ModelConfig


def rbm_conditionals(w: np.ndarray, bias: np.ndarray, vector: np.ndarray, direction: str) -> np.ndarray:
    """P(h=1|v) = sigmoid(b + v W) for ``"hidden"``; P(v=1|h) = sigmoid(a + h W^T) for ``"visible"``."""
    vector = np.atleast_2d(vector)
    if direction == "hidden":
        return sigmoid(bias + vector @ w)
    if direction == "visible":
        return sigmoid(bias + vector @ w.T)
    raise ValueError(f"direction must be 'hidden' or 'visible', not {direction!r}")


def cd_statistics(w, a, b, x, o, k: int, rng: np.random.Generator):
    """Ascent direction (dW, da, db) = <.>_data - <.>_model for one minibatch.

    Positive phase pairs the complete sample ``x`` with ``h ~ P(h|o)``.
    Negative phase starts the chain at ``o`` and runs ``k`` alternating Gibbs
    steps; the final hidden statistics use probabilities. Random draws happen
    in this order: h0, then per step v_t and (except the last step) h_t.
    """
    n = len(x)
    ph0 = rbm_conditionals(w, b, o, "hidden")
    h = (rng.random(ph0.shape) < ph0).astype(np.float64)
    pos_vh, pos_v, pos_h = x.T @ h / n, x.mean(axis=0), h.mean(axis=0)
    for t in range(k):
        pv = rbm_conditionals(w, a, h, "visible")
        v = (rng.random(pv.shape) < pv).astype(np.float64)
        ph = rbm_conditionals(w, b, v, "hidden")
        if t < k - 1:
            h = (rng.random(ph.shape) < ph).astype(np.float64)
    neg_vh, neg_v, neg_h = v.T @ ph / n, v.mean(axis=0), ph.mean(axis=0)
    return pos_vh - neg_vh, pos_v - neg_v, pos_h - neg_h


def _unpack(params: Params):
    return params.weights[0], params.biases[1], params.biases[0]  # W, a, b


def _pack(w, a, b) -> Params:
    return Params([w, w.T.copy()], [b, a])


class RBMModel(TrainedModel):
    kind = "rbm"
    stochastic = True

    def predict(self, o, rng=None):
        """Mean over S draws h ~ P(h|o) of P(v|h)."""
        rng = rng or np.random.default_rng(0)
        w, a, b = _unpack(self.nets["rbm"][1])
        o = np.atleast_2d(o)
        ph = rbm_conditionals(w, b, o, "hidden")
        out = np.zeros((len(o), self.layout.width))
        for _ in range(self.n_samples):
            h = (rng.random(ph.shape) < ph).astype(np.float64)
            out += rbm_conditionals(w, a, h, "visible")
        return out / self.n_samples


def train_rbm(dataset: Dataset, config: ModelConfig, layout: OneHotLayout, *,
              policy: ObservationPolicy | None = None, validation: TestSet | None = None) -> RBMModel:
    if layout.extra_state:
        raise ValueError("the RBM needs visible width == observation width (no extra-state encoding)")
    rng = np.random.default_rng(config.seed)
    d, h = layout.width, config.rbm_hidden
    w = rng.normal(0.0, 0.01, size=(d, h))
    spec = NetSpec((d, h, d), ("sigmoid", "sigmoid"))
    model = RBMModel(config, layout, {"rbm": (spec, _pack(w, np.zeros(d), np.zeros(h)))},
                     network_hash=dataset.network_hash)
    batches = Batches(dataset, layout, policy, config.batch_size)
    opt = make_optimizer(config.optimizer_kind, config.learning_rate, momentum=config.momentum, rho=config.rho)

    def epoch_fn(epoch):
        err, count = 0.0, 0
        for x, o, _ in batches.epoch(rng):
            w, a, b = _unpack(model.nets["rbm"][1])
            dw, da, db = cd_statistics(w, a, b, x, o, config.cd_k, rng)
            # the optimizer descends, so feed the negated ascent direction
            w, a, b = step_arrays(opt, [w, a, b], [-dw, -da, -db])
            model.nets["rbm"] = (spec, _pack(w, a, b))
            recon = rbm_conditionals(w, a, rbm_conditionals(w, b, o, "hidden"), "visible")
            err += float(np.sum((x - recon) ** 2))
            count += len(x)
        return err / count

    return fit_loop(model, validation, epoch_fn)
