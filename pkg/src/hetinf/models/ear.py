"""EAR (one regression net o -> X^), EARA (EAR plus an adversarial discriminator) and NC."""
from __future__ import annotations

import numpy as np

from ..encoding import OneHotLayout
from ..nn import NetSpec, Params, add_grads, backward, forward, init_params, make_optimizer, step
from ..sampling import Dataset, ObservationPolicy, TestSet
from .base import Batches, TrainedModel, fit_loop
from .config import ModelConfig
from .losses import bce_logits, l1_penalty, log_one_minus_d


def ear_spec(layout: OneHotLayout, hidden) -> NetSpec:
    return NetSpec.mlp(layout.obs_width, hidden, layout.width, "relu", "linear")


def disc_spec(d_in: int, hidden: int) -> NetSpec:
    # sigmoid is applied inside the log-loss on the logit output
    return NetSpec.mlp(d_in, (hidden,), 1, "relu", "linear")


def ear_objective(spec: NetSpec, params: Params, x, o, mask, cfg: ModelConfig, region: np.ndarray | None = None):
    """EAR loss and its parameter gradient on one minibatch.

    ``region`` (length D, 0/1) restricts the squared error to some blocks; NC
    passes the target variable's block.
    """
    x_hat, cache = forward(spec, params, o)
    w = cfg.alpha * mask + cfg.beta * (1.0 - mask)
    if region is not None:
        w = w * region
    r = x - x_hat
    n = len(x)
    value = float(np.sum(w * r * r)) / n
    grads, _ = backward(spec, params, cache, -2.0 * w * r / n)
    reg, greg = l1_penalty(params, cfg.gamma)
    return value + reg, add_grads(grads, greg)


def disc_objective(dspec: NetSpec, dparams: Params, real, fake):
    """-mean[log D(real)] - mean[log(1 - D(fake))]; minimizing it ascends the discriminator objective."""
    lr_, cr = forward(dspec, dparams, real)
    vr, gr = bce_logits(lr_, 1.0)
    gw_r, _ = backward(dspec, dparams, cr, gr)
    lf, cf = forward(dspec, dparams, fake)
    vf, gf = bce_logits(lf, 0.0)
    gw_f, _ = backward(dspec, dparams, cf, gf)
    return vr + vf, add_grads(gw_r, gw_f)


def eara_generator_objective(spec, params, dspec, dparams, x, o, mask, cfg: ModelConfig):
    """adv_weight * mean log(1 - D(EAR(o))) + EAR loss, gradient wrt the EAR params."""
    x_hat, cache = forward(spec, params, o)
    logits, dcache = forward(dspec, dparams, x_hat)
    adv, g_logit = log_one_minus_d(logits)
    _, d_xhat = backward(dspec, dparams, dcache, g_logit)
    w = cfg.alpha * mask + cfg.beta * (1.0 - mask)
    r = x - x_hat
    n = len(x)
    rec = float(np.sum(w * r * r)) / n
    grads, _ = backward(spec, params, cache, cfg.adv_weight * d_xhat - 2.0 * w * r / n)
    reg, greg = l1_penalty(params, cfg.gamma)
    return cfg.adv_weight * adv + rec + reg, add_grads(grads, greg)


class EARModel(TrainedModel):
    kind = "ear"

    def predict(self, o, rng=None):
        return self.run("ear", np.atleast_2d(o))


class EARAModel(EARModel):
    kind = "eara"


class NCModel(EARModel):
    kind = "nc"


def _region(layout: OneHotLayout, target: int) -> np.ndarray:
    region = np.zeros(layout.width)
    region[layout.block(target)] = 1.0
    return region


def train_ear(dataset: Dataset, config: ModelConfig, layout: OneHotLayout, *,
              policy: ObservationPolicy | None = None, validation: TestSet | None = None,
              _kind: type[EARModel] = EARModel, _region_vec: np.ndarray | None = None) -> EARModel:
    """Minibatch momentum-SGD on the EAR loss with fresh observation masks every minibatch."""
    rng = np.random.default_rng(config.seed)
    spec = ear_spec(layout, config.hidden)
    model = _kind(config, layout, {"ear": (spec, init_params(spec, rng))}, network_hash=dataset.network_hash)
    batches = Batches(dataset, layout, policy, config.batch_size)
    opt = make_optimizer(config.optimizer_kind, config.learning_rate, momentum=config.momentum, rho=config.rho)

    def epoch_fn(epoch):
        total, count = 0.0, 0
        for x, o, mask in batches.epoch(rng):
            params = model.nets["ear"][1]
            value, grads = ear_objective(spec, params, x, o, mask, config, _region_vec)
            model.nets["ear"] = (spec, step(opt, params, grads))
            total += value * len(x)
            count += len(x)
        return total / count

    return fit_loop(model, validation, epoch_fn)


def train_nc(dataset: Dataset, config: ModelConfig, layout: OneHotLayout, target: int | None = None, *,
             policy: ObservationPolicy | None = None, validation: TestSet | None = None) -> NCModel:
    """EAR's network with the loss restricted to one target variable's block."""
    target = config.target if target is None else target
    if target is None or not 0 <= target < layout.n_vars:
        raise ValueError(f"invalid NC target {target!r}")
    config = config.replace(kind="nc", target=int(target))
    return train_ear(dataset, config, layout, policy=policy, validation=validation,
                     _kind=NCModel, _region_vec=_region(layout, target))


def train_eara(dataset: Dataset, config: ModelConfig, layout: OneHotLayout, *,
               policy: ObservationPolicy | None = None, validation: TestSet | None = None) -> EARAModel:
    """Alternate one discriminator step and one EAR step per minibatch.

    The EAR minibatches (and their masks) come from the same random stream as
    :func:`train_ear`; the discriminator draws its minibatches from a separate
    stream, so a frozen discriminator reproduces the EAR trajectory.
    """
    rng = np.random.default_rng(config.seed)
    rng_d = np.random.default_rng([config.seed, 1])
    spec = ear_spec(layout, config.hidden)
    dspec = disc_spec(layout.width, config.disc_hidden)
    model = EARAModel(config, layout, {"ear": (spec, init_params(spec, rng)),
                                       "disc": (dspec, init_params(dspec, rng_d))},
                      network_hash=dataset.network_hash)
    if config.freeze_discriminator:
        _, dp = model.nets["disc"]
        dp.weights[-1][:] = 0.0
        dp.biases[-1][:] = 0.0
        model.log.notes.append("discriminator frozen at D = 0.5")
    batches = Batches(dataset, layout, policy, config.batch_size)
    mk = lambda: make_optimizer(config.optimizer_kind, config.learning_rate, momentum=config.momentum,
                                rho=config.rho)
    opt_g, opt_d = mk(), mk()
    saturated = [0]

    def epoch_fn(epoch):
        total, count = 0.0, 0
        for x, o, mask in batches.epoch(rng):
            if not config.freeze_discriminator:
                xd, od, _ = batches.sample(rng_d)
                dparams = model.nets["disc"][1]
                fake = forward(spec, model.nets["ear"][1], od)[0]
                dval, dgrads = disc_objective(dspec, dparams, xd, fake)
                if dval < 1e-3:
                    saturated[0] += 1
                model.nets["disc"] = (dspec, step(opt_d, dparams, dgrads))
            params = model.nets["ear"][1]
            value, grads = eara_generator_objective(spec, params, dspec, model.nets["disc"][1],
                                                    x, o, mask, config)
            model.nets["ear"] = (spec, step(opt_g, params, grads))
            total += value * len(x)
            count += len(x)
        return total / count

    fit_loop(model, validation, epoch_fn)
    if saturated[0]:
        model.log.notes.append(f"discriminator saturated (loss < 1e-3) on {saturated[0]} steps")
    return model
