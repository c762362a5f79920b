"""Denoising VAE (encoder sees o, decoder reconstructs X) and conditional VAE."""
from __future__ import annotations

import numpy as np

from ..encoding import OneHotLayout
from ..nn import NetSpec, Params, backward, forward, init_params, make_optimizer, step
from ..sampling import Dataset, ObservationPolicy, TestSet
from .base import Batches, TrainedModel, fit_loop
from .config import ModelConfig
from .losses import kl_std_normal

CVAE_NOTE = "log p(o) term of the conditional bound dropped (no parameters depend on it)"


def encoder_spec(d_in: int, hidden: int, latent: int) -> NetSpec:
    return NetSpec.mlp(d_in, (hidden,), 2 * latent, "relu", "linear")


def decoder_spec(d_in: int, hidden: int, d_out: int) -> NetSpec:
    return NetSpec.mlp(d_in, (hidden,), d_out, "relu", "sigmoid")


def bound_objective(espec: NetSpec, eparams: Params, dspec: NetSpec, dparams: Params,
                    enc_in, x, eps, cond=None):
    """Squared reconstruction error + KL(q || N(0, I)) with pinned noise ``eps``.

    The encoder reads ``enc_in``; the decoder reads ``z`` (concatenated with
    ``cond`` when given). Returns ``(value, encoder grads, decoder grads)``.
    """
    h, ecache = forward(espec, eparams, enc_in)
    latent = h.shape[1] // 2
    mu, logvar = h[:, :latent], h[:, latent:]
    sd = np.exp(0.5 * logvar)
    z = mu + sd * eps
    dec_in = z if cond is None else np.hstack([z, cond])
    x_hat, dcache = forward(dspec, dparams, dec_in)
    n = len(x)
    r = x - x_hat
    rec = float(np.sum(r * r)) / n
    dgrads, d_in = backward(dspec, dparams, dcache, -2.0 * r / n)
    dz = d_in[:, :latent]
    kl, dmu, dlv = kl_std_normal(mu, logvar)
    dh = np.hstack([dz + dmu, dz * eps * 0.5 * sd + dlv])
    egrads, _ = backward(espec, eparams, ecache, dh)
    return rec + kl, egrads, dgrads


class VAEModel(TrainedModel):
    kind = "vae"
    stochastic = True

    def predict(self, o, rng=None):
        """Mean over S draws z ~ q(z | o) of the decoder output."""
        rng = rng or np.random.default_rng(0)
        h = self.run("enc", np.atleast_2d(o))
        latent = h.shape[1] // 2
        mu, sd = h[:, :latent], np.exp(0.5 * h[:, latent:])
        out = np.zeros((len(h), self.layout.width))
        for _ in range(self.n_samples):
            out += self.run("dec", mu + sd * rng.standard_normal(mu.shape))
        return out / self.n_samples


class CVAEModel(TrainedModel):
    kind = "cvae"
    stochastic = True

    def predict(self, o, rng=None):
        """Mean over S prior draws z ~ N(0, I) of the decoder output on concat(z, o)."""
        rng = rng or np.random.default_rng(0)
        o = np.atleast_2d(o)
        out = np.zeros((len(o), self.layout.width))
        for _ in range(self.n_samples):
            z = rng.standard_normal((len(o), self.config.latent_dim))
            out += self.run("dec", np.hstack([z, o]))
        return out / self.n_samples


def _train(model_cls, dataset, config, layout, policy, validation, conditional: bool):
    rng = np.random.default_rng(config.seed)
    latent, hid = config.latent_dim, config.vae_hidden
    if latent < 1:
        raise ValueError("latent_dim must be >= 1")
    e_in = layout.width + layout.obs_width if conditional else layout.obs_width
    d_in = latent + layout.obs_width if conditional else latent
    espec, dspec = encoder_spec(e_in, hid, latent), decoder_spec(d_in, hid, layout.width)
    model = model_cls(config, layout, {"enc": (espec, init_params(espec, rng)),
                                       "dec": (dspec, init_params(dspec, rng))},
                      network_hash=dataset.network_hash)
    if conditional:
        model.log.notes.append(CVAE_NOTE)
    batches = Batches(dataset, layout, policy, config.batch_size)
    mk = lambda: make_optimizer(config.optimizer_kind, config.learning_rate, momentum=config.momentum,
                                rho=config.rho)
    opt_e, opt_d = mk(), mk()

    def epoch_fn(epoch):
        total, count = 0.0, 0
        for x, o, _ in batches.epoch(rng):
            eps = rng.standard_normal((len(x), latent))
            ep, dp = model.nets["enc"][1], model.nets["dec"][1]
            enc_in = np.hstack([x, o]) if conditional else o
            value, eg, dg = bound_objective(espec, ep, dspec, dp, enc_in, x, eps, o if conditional else None)
            model.nets["enc"] = (espec, step(opt_e, ep, eg))
            model.nets["dec"] = (dspec, step(opt_d, dp, dg))
            total += value * len(x)
            count += len(x)
        return total / count

    return fit_loop(model, validation, epoch_fn)


def train_vae(dataset: Dataset, config: ModelConfig, layout: OneHotLayout, *,
              policy: ObservationPolicy | None = None, validation: TestSet | None = None) -> VAEModel:
    return _train(VAEModel, dataset, config, layout, policy, validation, conditional=False)


def train_cvae(dataset: Dataset, config: ModelConfig, layout: OneHotLayout, *,
               policy: ObservationPolicy | None = None, validation: TestSet | None = None) -> CVAEModel:
    return _train(CVAEModel, dataset, config, layout, policy, validation, conditional=True)
