"""Shared pieces: trained-model container, checkpoints, minibatching, early stopping."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Iterator

import numpy as np

from ..encoding import OneHotLayout, encode_assignments, observe
from ..nn import NetSpec, Params, forward, params_from_dict, params_to_dict
from ..sampling import Dataset, ObservationPolicy, TestSet
from .config import ModelConfig

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "hetinf-model"
_REGISTRY: dict[str, type["TrainedModel"]] = {}


class DivergenceError(FloatingPointError):
    pass


@dataclass
class TrainingLog:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "best_epoch": self.best_epoch, "notes": self.notes}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingLog":
        return cls(d.get("epochs", []), d.get("best_epoch"), d.get("notes", []))


class TrainedModel:
    """A trained model: named networks plus the layout it was trained on.

    ``predict(o, rng)`` maps a batch of observation vectors to ``(n, D)``
    raw outputs. Deterministic kinds ignore ``rng``.
    """

    kind: ClassVar[str] = ""
    stochastic: ClassVar[bool] = False
    sample_override: int | None = None

    def __init__(self, config: ModelConfig, layout: OneHotLayout, nets: dict[str, tuple[NetSpec, Params]],
                 log: TrainingLog | None = None, network_hash: str | None = None):
        self.config = config
        self.layout = layout
        self.nets = nets
        self.log = log or TrainingLog()
        self.network_hash = network_hash

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if cls.kind:
            _REGISTRY[cls.kind] = cls

    def run(self, name: str, x: np.ndarray) -> np.ndarray:
        spec, params = self.nets[name]
        return forward(spec, params, x)[0]

    def predict(self, o: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    @property
    def n_samples(self) -> int:
        return self.sample_override or self.config.n_samples

    def predict_one(self, o: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        return self.predict(np.asarray(o)[None, :], rng)[0]

    # checkpoints -------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "kind": self.kind,
            "config": self.config.to_dict(),
            "layout": {"cards": list(self.layout.cards), "extra_state": self.layout.extra_state},
            "network_hash": self.network_hash,
            "nets": {name: params_to_dict(spec, p) for name, (spec, p) in sorted(self.nets.items())},
            "training_log": self.log.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())


def model_from_dict(d: dict) -> TrainedModel:
    if d.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a model checkpoint")
    cls = _REGISTRY[d["kind"]]
    layout = OneHotLayout(tuple(d["layout"]["cards"]), d["layout"]["extra_state"])
    nets = {name: params_from_dict(p) for name, p in d["nets"].items()}
    return cls(ModelConfig.from_dict(d["config"]), layout, nets, TrainingLog.from_dict(d["training_log"]),
               d.get("network_hash"))


def load_model(path) -> TrainedModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


# --------------------------------------------------------------------------- #
# Training helpers


class Batches:
    """Encoded training data plus per-minibatch observation masks."""

    def __init__(self, dataset: Dataset, layout: OneHotLayout, policy: ObservationPolicy | None,
                 batch_size: int):
        if len(dataset) == 0:
            raise ValueError("empty dataset")
        self.layout = layout
        self.x = encode_assignments(layout, dataset.samples)
        self.policy = policy or ObservationPolicy(tuple(range(layout.n_vars)))
        self.batch_size = batch_size

    def __len__(self):
        return len(self.x)

    def make(self, idx: np.ndarray, rng: np.random.Generator):
        x = self.x[idx]
        observed = self.policy.draw(rng, len(idx), self.layout.n_vars)
        o, mask = observe(self.layout, x, observed)
        return x, o, mask

    def epoch(self, rng: np.random.Generator) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        perm = rng.permutation(len(self.x))
        for start in range(0, len(perm), self.batch_size):
            yield self.make(perm[start:start + self.batch_size], rng)

    def sample(self, rng: np.random.Generator):
        return self.make(rng.integers(0, len(self.x), size=min(self.batch_size, len(self.x))), rng)


class EarlyStopping:
    """Tracks the best validation AD and a snapshot of the nets that produced it."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = None
        self.snapshot = None
        self.bad = 0

    def update(self, epoch: int, score: float, snapshot: Callable[[], object]) -> bool:
        """Record a score; returns True when training should stop."""
        if score < self.best - 1e-12:
            self.best, self.best_epoch, self.snapshot, self.bad = score, epoch, snapshot(), 0
            return False
        self.bad += 1
        return self.bad > self.patience


def validation_ad(model: TrainedModel, validation: TestSet | None, seed: int) -> float | None:
    if validation is None or len(validation) == 0:
        return None
    from ..metrics import EmptySelection, absolute_deviation, predict_testset
    model.sample_override = model.config.val_samples
    try:
        preds = predict_testset(model, validation, model.layout, seed)
        return absolute_deviation(preds, validation, model.layout)
    except EmptySelection:
        return None
    finally:
        model.sample_override = None


def check_finite(value: float, what: str, epoch: int):
    if not np.isfinite(value):
        raise DivergenceError(f"{what} became non-finite at epoch {epoch}")


def copy_nets(nets: dict[str, tuple[NetSpec, Params]]) -> dict[str, tuple[NetSpec, Params]]:
    return {k: (s, p.copy()) for k, (s, p) in nets.items()}


def fit_loop(model: TrainedModel, validation: TestSet | None, epoch_fn: Callable[[int], float]) -> TrainedModel:
    """Run ``epoch_fn(epoch) -> mean loss`` with validation-AD early stopping.

    ``epoch_fn`` mutates ``model.nets``; the best snapshot is restored at the end.
    """
    cfg = model.config
    stopper = EarlyStopping(cfg.patience)
    for epoch in range(cfg.epochs):
        loss = epoch_fn(epoch)
        check_finite(loss, "training loss", epoch)
        val = validation_ad(model, validation, seed=cfg.seed + 1)
        model.log.epochs.append({"epoch": epoch, "loss": loss, "val_ad": val})
        if val is not None and stopper.update(epoch, val, lambda: copy_nets(model.nets)):
            log.debug("%s: early stop at epoch %d (best %d)", model.kind, epoch, stopper.best_epoch)
            break
    if stopper.snapshot is not None:
        model.nets = stopper.snapshot
        model.log.best_epoch = stopper.best_epoch
    return model
