"""Minimal dense network engine with hand-written backprop (float64 throughout)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "linear", "tanh")
CHECKPOINT_VERSION = 1


class NonFiniteError(FloatingPointError):
    pass


@dataclass(frozen=True)
class NetSpec:
    sizes: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        object.__setattr__(self, "activations", tuple(self.activations))
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError("need >= 1 layer and positive widths")
        if len(self.activations) != len(self.sizes) - 1:
            raise ValueError("one activation per layer")
        bad = set(self.activations) - set(ACTIVATIONS)
        if bad:
            raise ValueError(f"unknown activations {bad}")

    @classmethod
    def mlp(cls, d_in: int, hidden: Sequence[int], d_out: int, hidden_act: str = "relu",
            out_act: str = "linear") -> "NetSpec":
        sizes = (d_in, *hidden, d_out)
        return cls(sizes, (hidden_act,) * len(hidden) + (out_act,))

    @property
    def n_layers(self) -> int:
        return len(self.activations)

    @property
    def d_in(self) -> int:
        return self.sizes[0]

    @property
    def d_out(self) -> int:
        return self.sizes[-1]

    def to_dict(self) -> dict:
        return {"sizes": list(self.sizes), "activations": list(self.activations)}

    @classmethod
    def from_dict(cls, d: dict) -> "NetSpec":
        return cls(tuple(d["sizes"]), tuple(d["activations"]))


@dataclass
class Params:
    """Per-layer weights ``(fan_in, fan_out)`` and biases ``(fan_out,)``."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "Params":
        return cls(list(arrays[0::2]), list(arrays[1::2]))

    def copy(self) -> "Params":
        return Params([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> "Params":
        out, pos = [], 0
        for a in self.arrays():
            out.append(vec[pos:pos + a.size].reshape(a.shape).copy())
            pos += a.size
        return Params.from_arrays(out)

    def zeros_like(self) -> "Params":
        return Params([np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases])

    def l1(self) -> float:
        return float(sum(np.abs(a).sum() for a in self.arrays()))

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays())


Grads = Params


def add_grads(a: Grads, b: Grads, scale: float = 1.0) -> Grads:
    return Params.from_arrays([x + scale * y for x, y in zip(a.arrays(), b.arrays())])


def init_params(spec: NetSpec, rng: np.random.Generator) -> Params:
    """Normal init with std sqrt(2/fan_in) for relu layers, sqrt(1/fan_in) otherwise; zero biases."""
    weights, biases = [], []
    for fan_in, fan_out, act in zip(spec.sizes[:-1], spec.sizes[1:], spec.activations):
        std = np.sqrt((2.0 if act == "relu" else 1.0) / fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Params(weights, biases)


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign to avoid overflow in exp
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Cache:
    inputs: list[np.ndarray] = field(default_factory=list)
    preacts: list[np.ndarray] = field(default_factory=list)
    outputs: list[np.ndarray] = field(default_factory=list)


def forward(spec: NetSpec, params: Params, x: np.ndarray) -> tuple[np.ndarray, Cache]:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != spec.d_in:
        raise ValueError(f"input width {x.shape[1]} does not match spec {spec.d_in}")
    cache = Cache()
    a = x
    for w, b, act in zip(params.weights, params.biases, spec.activations):
        cache.inputs.append(a)
        z = a @ w + b
        a = _act(act, z)
        cache.preacts.append(z)
        cache.outputs.append(a)
    if not np.isfinite(a).all():
        raise NonFiniteError("non-finite network output")
    return a, cache


def predict(spec: NetSpec, params: Params, x: np.ndarray) -> np.ndarray:
    return forward(spec, params, x)[0]


def backward(spec: NetSpec, params: Params, cache: Cache, d_out: np.ndarray) -> tuple[Grads, np.ndarray]:
    """Gradients of a scalar loss given dL/d(output); also returns dL/d(input)."""
    d = np.asarray(d_out, dtype=np.float64)
    if d.shape != cache.outputs[-1].shape:
        raise ValueError(f"output gradient shape {d.shape} != output shape {cache.outputs[-1].shape}")
    gw: list[np.ndarray] = [None] * spec.n_layers
    gb: list[np.ndarray] = [None] * spec.n_layers
    for i in reversed(range(spec.n_layers)):
        dz = d * _act_grad(spec.activations[i], cache.preacts[i], cache.outputs[i])
        gw[i] = cache.inputs[i].T @ dz
        gb[i] = dz.sum(axis=0)
        d = dz @ params.weights[i].T
    return Params(gw, gb), d


# --------------------------------------------------------------------------- #
# Optimizers


@dataclass
class OptState:
    kind: str  # "momentum" | "rmsprop"
    lr: float
    momentum: float = 0.9
    rho: float = 0.9
    eps: float = 1e-8
    acc: list[np.ndarray] | None = None

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lr": self.lr, "momentum": self.momentum, "rho": self.rho, "eps": self.eps}


def make_optimizer(kind: str, lr: float | None = None, **kw) -> OptState:
    defaults = {"momentum": 0.01, "rmsprop": 0.001}
    if kind not in defaults:
        raise ValueError(f"unknown optimizer {kind!r}")
    return OptState(kind, defaults[kind] if lr is None else lr, **kw)


def step(state: OptState, params: Params, grads: Grads) -> Params:
    """One update. Accumulators in ``state`` are updated in place; returns new params.

    momentum: v <- mu v - lr g ; theta <- theta + v
    rmsprop:  s <- rho s + (1 - rho) g^2 ; theta <- theta - lr g / sqrt(s + eps)
    """
    return Params.from_arrays(step_arrays(state, params.arrays(), grads.arrays()))


def step_arrays(state: OptState, ps: Sequence[np.ndarray], gs: Sequence[np.ndarray]) -> list[np.ndarray]:
    if state.acc is None:
        state.acc = [np.zeros_like(p) for p in ps]
    if len(state.acc) != len(ps) or any(a.shape != p.shape for a, p in zip(state.acc, ps)):
        raise ValueError("optimizer state does not match parameter shapes")
    new = []
    for i, (p, g) in enumerate(zip(ps, gs)):
        if state.kind == "momentum":
            state.acc[i] = state.momentum * state.acc[i] - state.lr * g
            new.append(p + state.acc[i])
        elif state.kind == "rmsprop":
            state.acc[i] = state.rho * state.acc[i] + (1.0 - state.rho) * g * g
            new.append(p - state.lr * g / np.sqrt(state.acc[i] + state.eps))
        else:
            raise ValueError(f"unknown optimizer {state.kind!r}")
        if not np.isfinite(new[-1]).all():
            raise NonFiniteError("non-finite parameter update")
    return new


# --------------------------------------------------------------------------- #
# Gradient checking


@dataclass
class GradCheckReport:
    max_rel_error: float
    checked: int
    skipped_kinks: int
    tolerance: float
    worst_index: int | None = None

    @property
    def ok(self) -> bool:
        return self.max_rel_error <= self.tolerance and self.checked > 0


LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def gradient_check_flat(loss_fn: LossFn, theta: np.ndarray, tolerance: float = 1e-4, *,
                        h: float = 1e-5, n_checks: int | None = 200, rng: np.random.Generator | None = None,
                        floor: float = 1e-7) -> GradCheckReport:
    """Compare analytic gradients against central differences on a random coordinate subset.

    ``loss_fn(theta) -> (loss, grad)``. Relative error is
    ``|a - n| / max(|a|, |n|, floor)``. A coordinate whose central differences at
    ``h`` and ``h/2`` disagree by more than ``tolerance`` (relative) sits on a
    kink (relu, |x|) and is skipped.
    """
    rng = rng or np.random.default_rng(0)
    theta = np.asarray(theta, dtype=np.float64)
    _, grad = loss_fn(theta)
    idx = np.arange(theta.size)
    if n_checks is not None and n_checks < theta.size:
        idx = np.sort(rng.choice(theta.size, size=n_checks, replace=False))

    def fd(i, step):
        t = theta.copy()
        t[i] += step
        up = loss_fn(t)[0]
        t[i] -= 2 * step
        return (up - loss_fn(t)[0]) / (2 * step)

    worst, worst_i, skipped, checked = 0.0, None, 0, 0
    for i in idx:
        n1 = fd(i, h)
        a = grad[i]
        rel = abs(a - n1) / max(abs(a), abs(n1), floor)
        if rel > tolerance:
            n2 = fd(i, h / 2)
            if abs(n1 - n2) / max(abs(n1), abs(n2), floor) > tolerance:
                skipped += 1
                continue
        checked += 1
        if rel > worst:
            worst, worst_i = rel, int(i)
    return GradCheckReport(worst, checked, skipped, tolerance, worst_i)


def gradient_check(spec: NetSpec, params: Params, loss_fn: Callable[[Params], tuple[float, Grads]],
                   tolerance: float = 1e-4, **kw) -> GradCheckReport:
    """``loss_fn(params) -> (loss, grads)`` checked over a random parameter subset."""

    def flat_fn(vec):
        loss, grads = loss_fn(params.with_flat(vec))
        return loss, grads.flat()

    return gradient_check_flat(flat_fn, params.flat(), tolerance, **kw)


# --------------------------------------------------------------------------- #
# Checkpoint payloads


def params_to_dict(spec: NetSpec, params: Params) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "spec": spec.to_dict(),
        "layers": [{"shape": list(w.shape), "weight": w.ravel().tolist(), "bias": b.tolist()}
                   for w, b in zip(params.weights, params.biases)],
    }


def params_from_dict(d: dict) -> tuple[NetSpec, Params]:
    if d.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {d.get('version')}")
    spec = NetSpec.from_dict(d["spec"])
    ws = [np.asarray(l["weight"], dtype=np.float64).reshape(l["shape"]) for l in d["layers"]]
    bs = [np.asarray(l["bias"], dtype=np.float64) for l in d["layers"]]
    return spec, Params(ws, bs)
