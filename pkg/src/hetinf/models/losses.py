"""Loss functions returning ``(value, gradient wrt prediction)``; batch reduction is the mean."""
from __future__ import annotations

import numpy as np

from ..nn import Params, sigmoid


def masked_sq_error(x: np.ndarray, x_hat: np.ndarray, mask: np.ndarray, alpha: float, beta: float):
    """alpha*||mask*(X-X^)||^2 + beta*||(1-mask)*(X-X^)||^2, averaged over rows."""
    if x.shape != x_hat.shape or x.shape != mask.shape:
        raise ValueError("X, X^ and mask must share a shape")
    n = len(x)
    w = alpha * mask + beta * (1.0 - mask)
    r = x - x_hat
    value = float(np.sum(w * r * r)) / n
    return value, -2.0 * w * r / n


def l1_penalty(params: Params, gamma: float) -> tuple[float, Params]:
    """gamma*||theta||_1 with subgradient sign(theta), sign(0) = 0."""
    if gamma == 0.0:
        return 0.0, params.zeros_like()
    return gamma * params.l1(), Params.from_arrays([gamma * np.sign(a) for a in params.arrays()])


def ear_loss(x: np.ndarray, x_hat: np.ndarray, mask: np.ndarray, params: Params,
             alpha: float, beta: float, gamma: float):
    """Latent error + stability term + L1 regularizer.

    Returns ``(value, dL/dX^, dL1/dtheta)``; the network part of dL/dtheta
    comes from backpropagating dL/dX^.
    """
    v, g = masked_sq_error(x, x_hat, mask, alpha, beta)
    r, gr = l1_penalty(params, gamma)
    return v + r, g, gr


def _log_sigmoid(z):
    return -np.logaddexp(0.0, -z)


def bce_logits(logits: np.ndarray, target: float):
    """Mean binary cross-entropy -[t log D + (1-t) log(1-D)] with D = sigmoid(logits)."""
    z = logits.ravel()
    n = len(z)
    value = -float(np.sum(target * _log_sigmoid(z) + (1.0 - target) * _log_sigmoid(-z))) / n
    grad = (sigmoid(z) - target) / n
    return value, grad.reshape(logits.shape)


def log_one_minus_d(logits: np.ndarray):
    """Mean log(1 - D) with D = sigmoid(logits); the saturating generator term."""
    z = logits.ravel()
    n = len(z)
    value = float(np.sum(_log_sigmoid(-z))) / n
    grad = -sigmoid(z) / n
    return value, grad.reshape(logits.shape)


def kl_std_normal(mu: np.ndarray, logvar: np.ndarray):
    """Mean over rows of KL(N(mu, exp(logvar)) || N(0, I)); returns value, d/dmu, d/dlogvar."""
    n = len(mu)
    var = np.exp(logvar)
    value = 0.5 * float(np.sum(mu * mu + var - 1.0 - logvar)) / n
    return value, mu / n, 0.5 * (var - 1.0) / n
