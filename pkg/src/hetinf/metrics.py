"""AD / KL / ACC over posterior-marginal predictions, threshold filtering, model evaluation.

A scoring unit is one (case, variable) pair. Metrics average over the units of
a case first, then over cases, matching the per-sample / per-variable nesting
of the metric definitions. By default only unobserved variables (or the test
set's targets) are scored; ``score_all=True`` also scores observed variables
against their point-mass posteriors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .encoding import OneHotLayout, encode_observation
from .sampling import TestSet

KL_FLOOR = float(np.exp(-6.0))


class EmptySelection(ValueError):
    """No scoring unit survived filtering."""


@dataclass
class ScoredUnits:
    case: np.ndarray            # (U,) case index of each unit
    var: np.ndarray             # (U,) variable index
    pred: list[np.ndarray]      # raw predicted block per unit
    truth: list[np.ndarray]     # exact posterior per unit

    def __len__(self):
        return len(self.var)

    def subset(self, keep: np.ndarray) -> "ScoredUnits":
        keep = np.flatnonzero(keep)
        return ScoredUnits(self.case[keep], self.var[keep],
                           [self.pred[i] for i in keep], [self.truth[i] for i in keep])


def scoring_units(predictions: np.ndarray, testset: TestSet, layout: OneHotLayout,
                  score_all: bool = False) -> ScoredUnits:
    predictions = np.asarray(predictions, dtype=float)
    if predictions.shape != (len(testset), layout.width):
        raise ValueError(f"predictions of shape {predictions.shape} are not aligned with "
                         f"{len(testset)} cases of width {layout.width}")
    cases, vars_, preds, truths = [], [], [], []
    for i, tc in enumerate(testset.cases):
        scored = testset.targets if testset.targets is not None else range(layout.n_vars)
        for j in scored:
            if j in tc.truth:
                truth = tc.truth[j]
            elif score_all:
                truth = np.zeros(layout.cards[j])
                truth[tc.evidence[j]] = 1.0
            else:
                continue
            cases.append(i)
            vars_.append(j)
            preds.append(predictions[i, layout.block(j)])
            truths.append(np.asarray(truth, dtype=float))
    return ScoredUnits(np.asarray(cases, dtype=np.int64), np.asarray(vars_, dtype=np.int64), preds, truths)


def _nested_mean(units: ScoredUnits, values: np.ndarray) -> float:
    if len(units) == 0:
        raise EmptySelection("no scoring units")
    cases, inv = np.unique(units.case, return_inverse=True)
    per_case = np.bincount(inv, weights=values) / np.bincount(inv)
    return float(per_case.mean())


def unit_ad(units: ScoredUnits) -> np.ndarray:
    return np.asarray([np.mean(np.abs(np.clip(p, 0.0, 1.0) - t)) for p, t in zip(units.pred, units.truth)])


def unit_kl(units: ScoredUnits) -> np.ndarray:
    out = []
    for p, t in zip(units.pred, units.truth):
        q = np.clip(p, KL_FLOOR, 1.0)
        nz = t > 0
        out.append(-float(np.sum(t[nz] * np.log(q[nz] / t[nz]))))
    return np.asarray(out)


def unit_acc(units: ScoredUnits) -> np.ndarray:
    # np.argmax picks the lowest index among ties, on both sides
    return np.asarray([float(np.argmax(p) == np.argmax(t)) for p, t in zip(units.pred, units.truth)])


def absolute_deviation(predictions, testset: TestSet, layout: OneHotLayout, score_all: bool = False) -> float:
    u = scoring_units(predictions, testset, layout, score_all)
    return _nested_mean(u, unit_ad(u))


def kl_divergence(predictions, testset: TestSet, layout: OneHotLayout, score_all: bool = False) -> float:
    u = scoring_units(predictions, testset, layout, score_all)
    return _nested_mean(u, unit_kl(u))


def classification_accuracy(predictions, testset: TestSet, layout: OneHotLayout, score_all: bool = False) -> float:
    u = scoring_units(predictions, testset, layout, score_all)
    return _nested_mean(u, unit_acc(u))


def threshold_filter(units: ScoredUnits, t: float) -> ScoredUnits:
    """Keep units whose true posterior has a dominant probability >= t."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    keep = np.asarray([t_vec.max() >= t for t_vec in units.truth], dtype=bool)
    return units.subset(keep)


@dataclass
class MetricsReport:
    ad: float | None
    kl: float | None
    acc: float | None
    n_cases: int
    n_units: int
    threshold: float | None = None
    per_case: list[dict] = field(default_factory=list, repr=False)

    @property
    def empty(self) -> bool:
        return self.n_units == 0

    def to_dict(self, per_case: bool = False) -> dict:
        d = {"ad": self.ad, "kl": self.kl, "acc": self.acc, "n_cases": self.n_cases,
             "n_units": self.n_units, "threshold": self.threshold}
        if per_case:
            d["per_case"] = self.per_case
        return d


def report_from_units(units: ScoredUnits, threshold: float | None = None) -> MetricsReport:
    if len(units) == 0:
        return MetricsReport(None, None, None, 0, 0, threshold)
    ad, kl, acc = unit_ad(units), unit_kl(units), unit_acc(units)
    cases, inv = np.unique(units.case, return_inverse=True)
    counts = np.bincount(inv)
    per = np.stack([np.bincount(inv, weights=v) / counts for v in (ad, kl, acc)], axis=1)
    per_case = [{"case": int(c), "ad": float(a), "kl": float(k), "acc": float(x), "units": int(n)}
                for c, (a, k, x), n in zip(cases, per, counts)]
    m = per.mean(axis=0)
    return MetricsReport(float(m[0]), float(m[1]), float(m[2]), len(cases), len(units), threshold, per_case)


class Predictor(Protocol):
    def predict(self, o: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray: ...


def observation_matrix(testset: TestSet, layout: OneHotLayout) -> np.ndarray:
    if not testset.cases:
        return np.zeros((0, layout.obs_width))
    return np.stack([encode_observation(layout, tc.evidence)[0] for tc in testset.cases])


def predict_testset(model: Predictor, testset: TestSet, layout: OneHotLayout, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.asarray(model.predict(observation_matrix(testset, layout), rng), dtype=float)


def evaluate_predictions(predictions, testset: TestSet, layout: OneHotLayout, *, threshold: float | None = None,
                         score_all: bool = False) -> MetricsReport:
    units = scoring_units(predictions, testset, layout, score_all)
    if threshold is not None:
        units = threshold_filter(units, threshold)
    return report_from_units(units, threshold)


def evaluate_model(model: Predictor, testset: TestSet, layout: OneHotLayout, seed: int = 0, *,
                   threshold: float | None = None, score_all: bool = False) -> MetricsReport:
    preds = predict_testset(model, testset, layout, seed)
    return evaluate_predictions(preds, testset, layout, threshold=threshold, score_all=score_all)


class OracleModel:
    """Pseudo-model that returns the exact posteriors (observed blocks as one-hot)."""

    kind = "oracle"

    def __init__(self, net, layout: OneHotLayout, oracle=None):
        from .exact import posterior_marginals_ve
        self.net = net
        self.layout = layout
        self.oracle = oracle or posterior_marginals_ve

    def predict(self, o: np.ndarray, rng=None) -> np.ndarray:
        out = np.zeros((len(o), self.layout.width))
        for i, row in enumerate(np.atleast_2d(o)):
            ev = {}
            for j in range(self.layout.n_vars):
                block = row[self.layout.block(j)]
                if block.sum() > 0:
                    ev[j] = int(np.argmax(block))
                    out[i, self.layout.block(j)] = block
            post = self.oracle(self.net, ev)
            for j, p in post.marginals.items():
                out[i, self.layout.block(j)] = p
        return out


class ConstantModel:
    """Predicts the same vector for every observation (e.g. uniform baseline)."""

    kind = "constant"

    def __init__(self, vector: np.ndarray):
        self.vector = np.asarray(vector, dtype=float)

    def predict(self, o: np.ndarray, rng=None) -> np.ndarray:
        return np.tile(self.vector, (len(np.atleast_2d(o)), 1))
