from __future__ import annotations

import dataclasses
from dataclasses import dataclass

KINDS = ("ear", "eara", "nc", "rbm", "wgan", "cgan", "vae", "cvae")

STANDARD_HIDDEN = (64, 128, 128, 64)
SYNTH_HIDDEN = (10, 10)


@dataclass(frozen=True)
class ModelConfig:
    """Hyperparameters for every model kind; fields a kind does not use are ignored.

    ``optimizer=None`` and ``lr=None`` pick the per-kind defaults (momentum
    0.9 / lr 0.01 for EAR-family, VAE, CVAE and RBM; RMSProp / lr 0.001 for
    the GANs).
    """

    kind: str = "ear"
    hidden: tuple[int, ...] = STANDARD_HIDDEN
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.005
    optimizer: str | None = None
    lr: float | None = None
    momentum: float = 0.9
    rho: float = 0.9
    epochs: int = 200
    batch_size: int = 64
    patience: int = 20
    seed: int = 0
    # EARA / GANs
    disc_hidden: int = 128
    adv_weight: float = 1.0
    clip: float = 0.01
    n_critic: int = 5
    freeze_discriminator: bool = False
    # VAE / CVAE / CGAN
    latent_dim: int = 32
    vae_hidden: int = 128
    # RBM
    rbm_hidden: int = 36
    cd_k: int = 10
    # stochastic prediction
    n_samples: int = 100
    val_samples: int = 10
    # NC
    target: int | None = None
    # encoding
    extra_state: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("loss weights must be >= 0")
        if self.cd_k < 1 or self.n_samples < 1 or self.batch_size < 1:
            raise ValueError("cd_k, n_samples and batch_size must be >= 1")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def optimizer_kind(self) -> str:
        if self.optimizer is not None:
            return self.optimizer
        return "rmsprop" if self.kind in ("wgan", "cgan") else "momentum"

    @property
    def learning_rate(self) -> float:
        if self.lr is not None:
            return self.lr
        return 0.001 if self.optimizer_kind == "rmsprop" else 0.01

    def replace(self, **kw) -> "ModelConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        kw = {k: v for k, v in d.items() if k in names}
        if "hidden" in kw:
            kw["hidden"] = tuple(kw["hidden"])
        return cls(**kw)
