"""WGAN with a deterministic generator G(o), and a conditional GAN G(z, o)."""
from __future__ import annotations

import numpy as np

from ..encoding import OneHotLayout
from ..nn import NetSpec, Params, add_grads, backward, forward, init_params, make_optimizer, step
from ..sampling import Dataset, ObservationPolicy, TestSet
from .base import Batches, TrainedModel, fit_loop
from .config import ModelConfig
from .ear import disc_spec
from .losses import bce_logits


def generator_spec(d_in: int, layout: OneHotLayout, hidden) -> NetSpec:
    return NetSpec.mlp(d_in, hidden, layout.width, "relu", "sigmoid")


# --------------------------------------------------------------------------- #
# WGAN


def wgan_critic_objective(dspec: NetSpec, dparams: Params, real, fake):
    """mean f(fake) - mean f(real); minimizing it widens the critic's gap."""
    fr, cr = forward(dspec, dparams, real)
    ff, cf = forward(dspec, dparams, fake)
    gr, _ = backward(dspec, dparams, cr, np.full_like(fr, -1.0 / len(fr)))
    gf, _ = backward(dspec, dparams, cf, np.full_like(ff, 1.0 / len(ff)))
    return float(ff.mean() - fr.mean()), add_grads(gr, gf)


def wgan_generator_objective(spec: NetSpec, params: Params, dspec: NetSpec, dparams: Params, o):
    """-mean f(G(o)), gradient wrt the generator parameters."""
    g, cache = forward(spec, params, o)
    f, dcache = forward(dspec, dparams, g)
    _, d_g = backward(dspec, dparams, dcache, np.full_like(f, -1.0 / len(f)))
    grads, _ = backward(spec, params, cache, d_g)
    return -float(f.mean()), grads


def clip_params(params: Params, c: float) -> Params:
    return Params.from_arrays([np.clip(a, -c, c) for a in params.arrays()])


class WGANModel(TrainedModel):
    kind = "wgan"

    def predict(self, o, rng=None):
        return self.run("gen", np.atleast_2d(o))


def train_wgan(dataset: Dataset, config: ModelConfig, layout: OneHotLayout, *,
               policy: ObservationPolicy | None = None, validation: TestSet | None = None) -> WGANModel:
    """``n_critic`` clipped critic updates per generator update, RMSProp by default."""
    rng = np.random.default_rng(config.seed)
    rng_d = np.random.default_rng([config.seed, 1])
    spec = generator_spec(layout.obs_width, layout, config.hidden)
    dspec = disc_spec(layout.width, config.disc_hidden)
    dparams = clip_params(init_params(dspec, rng_d), config.clip)
    model = WGANModel(config, layout, {"gen": (spec, init_params(spec, rng)), "critic": (dspec, dparams)},
                      network_hash=dataset.network_hash)
    batches = Batches(dataset, layout, policy, config.batch_size)
    mk = lambda: make_optimizer(config.optimizer_kind, config.learning_rate, momentum=config.momentum,
                                rho=config.rho)
    opt_g, opt_d = mk(), mk()

    def epoch_fn(epoch):
        total, count = 0.0, 0
        for _, o, _ in batches.epoch(rng):
            for _ in range(config.n_critic):
                xd, od, _ = batches.sample(rng_d)
                dp = model.nets["critic"][1]
                fake = forward(spec, model.nets["gen"][1], od)[0]
                _, dg = wgan_critic_objective(dspec, dp, xd, fake)
                model.nets["critic"] = (dspec, clip_params(step(opt_d, dp, dg), config.clip))
            params = model.nets["gen"][1]
            value, grads = wgan_generator_objective(spec, params, dspec, model.nets["critic"][1], o)
            model.nets["gen"] = (spec, step(opt_g, params, grads))
            total += value * len(o)
            count += len(o)
        return total / count

    return fit_loop(model, validation, epoch_fn)


# --------------------------------------------------------------------------- #
# CGAN


def _noise(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return rng.standard_normal((n, dim)) if dim > 0 else np.zeros((n, 0))


def cgan_disc_objective(spec: NetSpec, params: Params, dspec: NetSpec, dparams: Params, x, o, z):
    """BCE of D on concat(X, o) labelled real and concat(G(z, o), o) labelled fake; grads wrt D."""
    fake = forward(spec, params, np.hstack([z, o]))[0]
    lr_, cr = forward(dspec, dparams, np.hstack([x, o]))
    vr, g_r = bce_logits(lr_, 1.0)
    lf, cf = forward(dspec, dparams, np.hstack([fake, o]))
    vf, g_f = bce_logits(lf, 0.0)
    gw_r, _ = backward(dspec, dparams, cr, g_r)
    gw_f, _ = backward(dspec, dparams, cf, g_f)
    return vr + vf, add_grads(gw_r, gw_f)


def cgan_generator_objective(spec: NetSpec, params: Params, dspec: NetSpec, dparams: Params, o, z):
    """Non-saturating -mean log D(G(z, o), o); grads wrt G."""
    g, cache = forward(spec, params, np.hstack([z, o]))
    logits, dcache = forward(dspec, dparams, np.hstack([g, o]))
    value, g_logit = bce_logits(logits, 1.0)
    _, d_in = backward(dspec, dparams, dcache, g_logit)
    grads, _ = backward(spec, params, cache, d_in[:, :g.shape[1]])
    return value, grads


class CGANModel(TrainedModel):
    kind = "cgan"
    stochastic = True

    def predict(self, o, rng=None):
        """Mean of S generator samples G(z, o), z ~ N(0, I)."""
        rng = rng or np.random.default_rng(0)
        o = np.atleast_2d(o)
        dim = self.config.latent_dim
        if dim == 0:
            return self.run("gen", np.hstack([np.zeros((len(o), 0)), o]))
        out = np.zeros((len(o), self.layout.width))
        for _ in range(self.n_samples):
            out += self.run("gen", np.hstack([_noise(rng, len(o), dim), o]))
        return out / self.n_samples


def train_cgan(dataset: Dataset, config: ModelConfig, layout: OneHotLayout, *,
               policy: ObservationPolicy | None = None, validation: TestSet | None = None) -> CGANModel:
    """Alternating discriminator and generator updates, one each per minibatch."""
    rng = np.random.default_rng(config.seed)
    rng_d = np.random.default_rng([config.seed, 1])
    dim = config.latent_dim
    spec = generator_spec(dim + layout.obs_width, layout, config.hidden)
    dspec = disc_spec(layout.width + layout.obs_width, config.disc_hidden)
    model = CGANModel(config, layout, {"gen": (spec, init_params(spec, rng)),
                                       "disc": (dspec, init_params(dspec, rng_d))},
                      network_hash=dataset.network_hash)
    batches = Batches(dataset, layout, policy, config.batch_size)
    mk = lambda: make_optimizer(config.optimizer_kind, config.learning_rate, momentum=config.momentum,
                                rho=config.rho)
    opt_g, opt_d = mk(), mk()

    def epoch_fn(epoch):
        total, count = 0.0, 0
        for _, o, _ in batches.epoch(rng):
            xd, od, _ = batches.sample(rng_d)
            dp = model.nets["disc"][1]
            _, dg = cgan_disc_objective(spec, model.nets["gen"][1], dspec, dp, xd, od,
                                        _noise(rng_d, len(xd), dim))
            model.nets["disc"] = (dspec, step(opt_d, dp, dg))
            params = model.nets["gen"][1]
            value, grads = cgan_generator_objective(spec, params, dspec, model.nets["disc"][1], o,
                                                    _noise(rng, len(o), dim))
            model.nets["gen"] = (spec, step(opt_g, params, grads))
            total += value * len(o)
            count += len(o)
        return total / count

    return fit_loop(model, validation, epoch_fn)
