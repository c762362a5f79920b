"""Model zoo: every kind trains from a Dataset and predicts raw length-D vectors."""
from __future__ import annotations

from ..encoding import OneHotLayout
from ..sampling import Dataset, ObservationPolicy, TestSet
from .base import DivergenceError, TrainedModel, TrainingLog, load_model, model_from_dict
from .compose import compose_block_diagonal
from .config import KINDS, STANDARD_HIDDEN, SYNTH_HIDDEN, ModelConfig
from .ear import EARAModel, EARModel, NCModel, train_ear, train_eara, train_nc
from .gan import CGANModel, WGANModel, train_cgan, train_wgan
from .rbm import RBMModel, train_rbm
from .vae import CVAEModel, VAEModel, train_cvae, train_vae

TRAINERS = {
    "ear": train_ear,
    "eara": train_eara,
    "nc": train_nc,
    "rbm": train_rbm,
    "wgan": train_wgan,
    "cgan": train_cgan,
    "vae": train_vae,
    "cvae": train_cvae,
}


def train(dataset: Dataset, config: ModelConfig, layout: OneHotLayout, *,
          policy: ObservationPolicy | None = None, validation: TestSet | None = None) -> TrainedModel:
    """Dispatch on ``config.kind``."""
    return TRAINERS[config.kind](dataset, config, layout, policy=policy, validation=validation)


__all__ = [
    "KINDS", "STANDARD_HIDDEN", "SYNTH_HIDDEN", "TRAINERS",
    "CGANModel", "CVAEModel", "DivergenceError", "EARAModel", "EARModel", "ModelConfig", "NCModel",
    "RBMModel", "TrainedModel", "TrainingLog", "VAEModel", "WGANModel",
    "compose_block_diagonal", "load_model", "model_from_dict", "train",
    "train_cgan", "train_cvae", "train_ear", "train_eara", "train_nc", "train_rbm", "train_vae", "train_wgan",
]
