"""Training/test data generation, synthesized Markov-border networks, hyperprior variance study."""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .bn import BayesianNetwork, make_network, topological_order
from .exact import PosteriorMarginals, posterior_marginals_ve

GIBBS_BURN_IN = 5000
GIBBS_THINNING = 10


class ZeroSupportError(ValueError):
    pass


def _draw_categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One draw per row of ``probs`` (rows need not be normalized)."""
    cum = np.cumsum(probs, axis=1)
    u = rng.random(len(probs)) * cum[:, -1]
    out = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(out, probs.shape[1] - 1)


def _parent_rows(net: BayesianNetwork, j: int, states: np.ndarray) -> np.ndarray:
    par = net.parents(j)
    if not par:
        return np.zeros(len(states), dtype=np.int64)
    return np.ravel_multi_index(tuple(states[:, p] for p in par), [net.variables[p].card for p in par])


def ancestral_samples(net: BayesianNetwork, rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` exact joint draws, shape ``(n, M)``, integer state indices."""
    states = np.zeros((n, net.n_vars), dtype=np.int64)
    for j in topological_order(net):
        probs = net.cpt(j).table[_parent_rows(net, j, states)]
        states[:, j] = _draw_categorical(rng, probs)
    return states


def ancestral_sample(net: BayesianNetwork, rng: np.random.Generator) -> np.ndarray:
    return ancestral_samples(net, rng, 1)[0]


def gibbs_sample(net: BayesianNetwork, rng: np.random.Generator, burn_in: int = GIBBS_BURN_IN,
                 thinning: int = GIBBS_THINNING, n: int = 1, *, chains: int = 1,
                 allow_zeros: bool = False) -> np.ndarray:
    """Systematic-scan Gibbs sampling, shape ``(n, M)``.

    ``chains`` independent chains advance in lockstep (vectorized); after
    ``burn_in`` sweeps every ``thinning``-th sweep contributes one state per
    chain. Chains start uniformly at random when every CPT entry is positive,
    otherwise from an ancestral draw so the start has nonzero probability.
    Networks with zero CPT entries require ``allow_zeros=True``.
    """
    positive = all(bool((c.table > 0).all()) for c in net.cpts)
    if not positive and not allow_zeros:
        raise ZeroSupportError("network has zero CPT entries; Gibbs may not be ergodic (pass allow_zeros=True)")
    cards = net.cards
    if positive:
        states = np.stack([rng.integers(0, k, size=chains) for k in cards], axis=1).astype(np.int64)
    else:
        states = ancestral_samples(net, rng, chains)

    # per variable: (variable, table) for itself and each child
    blankets = [[(j, net.cpt(j).table)] + [(c, net.cpt(c).table) for c in net.children(j)]
                for j in range(net.n_vars)]
    rows_idx = np.arange(chains)

    def sweep():
        for j in range(net.n_vars):
            k = cards[j]
            cond = np.ones((chains, k))
            for s in range(k):
                states[:, j] = s
                for v, table in blankets[j]:
                    cond[:, s] *= table[_parent_rows(net, v, states), states[:, v]]
            if (cond.sum(axis=1) <= 0).any():
                raise ZeroSupportError(f"zero-support full conditional for variable {j}")
            states[rows_idx, j] = _draw_categorical(rng, cond)

    for _ in range(burn_in):
        sweep()
    per_chain = -(-n // chains)
    out = np.empty((per_chain, chains, net.n_vars), dtype=np.int64)
    for t in range(per_chain):
        for _ in range(thinning):
            sweep()
        out[t] = states
    return out.reshape(-1, net.n_vars)[:n]


# --------------------------------------------------------------------------- #
# Evidence policies


@dataclass(frozen=True)
class ObservationPolicy:
    """How evidence subsets are drawn.

    ``uniform_count``: m ~ U{0..M-1} over the observable variables, then a uniform
    size-m subset. ``bernoulli``: each observable variable independently with
    probability ``p``.
    """

    observable: tuple[int, ...]
    kind: str = "uniform_count"
    p: float = 0.5

    @classmethod
    def all_variables(cls, net: BayesianNetwork) -> "ObservationPolicy":
        return cls(tuple(range(net.n_vars)))

    def draw(self, rng: np.random.Generator, n: int, n_vars: int) -> np.ndarray:
        """Boolean ``(n, n_vars)`` observed-indicator matrix."""
        obs = np.zeros((n, n_vars), dtype=bool)
        cols = np.asarray(self.observable, dtype=np.int64)
        if len(cols) == 0:
            return obs
        if self.kind == "uniform_count":
            m = rng.integers(0, len(cols), size=n) if len(cols) > 1 else np.zeros(n, np.int64)
            ranks = np.argsort(rng.random((n, len(cols))), axis=1).argsort(axis=1)
            obs[:, cols] = ranks < m[:, None]
        elif self.kind == "bernoulli":
            obs[:, cols] = rng.random((n, len(cols))) < self.p
        else:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        return obs

    def to_dict(self) -> dict:
        return {"observable": list(self.observable), "kind": self.kind, "p": self.p}

    @classmethod
    def from_dict(cls, d: dict) -> "ObservationPolicy":
        return cls(tuple(d["observable"]), d["kind"], d["p"])


# --------------------------------------------------------------------------- #
# Datasets


@dataclass
class Dataset:
    network: str
    network_hash: str
    samples: np.ndarray
    sampler: str
    seed: int
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples)


def build_training_set(net: BayesianNetwork, n: int, sampler: str = "ancestral", seed: int = 0,
                       **gibbs_kwargs) -> Dataset:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if sampler == "ancestral":
        samples = ancestral_samples(net, rng, n)
        params = {}
    elif sampler == "gibbs":
        params = {"burn_in": GIBBS_BURN_IN, "thinning": GIBBS_THINNING, **gibbs_kwargs}
        samples = gibbs_sample(net, rng, n=n, **params)
    else:
        raise ValueError(f"unknown sampler {sampler!r}")
    return Dataset(net.name, net.sha256(), samples, sampler, seed, params)


@dataclass
class TestCase:
    evidence: dict[int, int]
    truth: dict[int, np.ndarray]

    __test__ = False  # not a pytest class


@dataclass
class TestSet:
    network: str
    network_hash: str
    cases: list[TestCase]
    seed: int
    targets: tuple[int, ...] | None = None  # scored variables; None = every unobserved one
    policy: ObservationPolicy | None = None

    __test__ = False

    def __len__(self):
        return len(self.cases)

    def split(self, fraction: float) -> tuple["TestSet", "TestSet"]:
        """First ``fraction`` of cases (rounded) and the remainder; cases are already shuffled."""
        k = int(round(fraction * len(self.cases)))
        mk = lambda cs: TestSet(self.network, self.network_hash, cs, self.seed, self.targets, self.policy)
        return mk(self.cases[:k]), mk(self.cases[k:])


Oracle = Callable[[BayesianNetwork, dict], PosteriorMarginals]


def build_test_set(net: BayesianNetwork, max_n: int = 1000, seed: int = 0,
                   oracle: Oracle = posterior_marginals_ve, policy: ObservationPolicy | None = None,
                   targets: Sequence[int] | None = None) -> TestSet:
    """Distinct random evidence sets labelled with exact posteriors.

    Evidence values come from a joint ancestral draw. Duplicate evidence is
    rejected; after ``100 * max_n`` attempts the set is returned as is.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    policy = policy or ObservationPolicy.all_variables(net)
    rng = np.random.default_rng(seed)
    seen: set[tuple] = set()
    cases: list[TestCase] = []
    attempts, cap = 0, 100 * max_n
    while len(cases) < max_n and attempts < cap:
        batch = min(cap - attempts, max(64, 2 * (max_n - len(cases))))
        samples = ancestral_samples(net, rng, batch)
        observed = policy.draw(rng, batch, net.n_vars)
        for x, obs in zip(samples, observed):
            attempts += 1
            key = tuple(int(x[j]) if obs[j] else -1 for j in range(net.n_vars))
            if key in seen:
                if attempts >= cap:
                    break
                continue
            seen.add(key)
            ev = {j: int(x[j]) for j in range(net.n_vars) if obs[j]}
            post = oracle(net, ev)
            cases.append(TestCase(ev, {j: np.asarray(p, dtype=float) for j, p in post.marginals.items()}))
            if len(cases) >= max_n or attempts >= cap:
                break
    tgt = tuple(int(t) for t in targets) if targets is not None else None
    return TestSet(net.name, net.sha256(), cases, seed, tgt, policy)


# --------------------------------------------------------------------------- #
# Persistence: JSON metadata + CSV bodies


def _fmt(x: float) -> str:
    return repr(float(x))


def dataset_csv(ds: Dataset, net: BayesianNetwork) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(net.names)
    w.writerows(ds.samples.tolist())
    return buf.getvalue()


def save_dataset(ds: Dataset, net: BayesianNetwork, path: str | Path) -> tuple[Path, Path]:
    """Write ``<path>.csv`` and ``<path>.json``."""
    path = Path(path)
    meta = {"network": ds.network, "network_hash": ds.network_hash, "sampler": ds.sampler,
            "seed": ds.seed, "params": ds.params, "n": len(ds)}
    csv_path, json_path = path.with_suffix(".csv"), path.with_suffix(".json")
    csv_path.write_text(dataset_csv(ds, net))
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    rows = list(csv.reader(path.with_suffix(".csv").read_text().splitlines()))
    samples = np.asarray([[int(v) for v in r] for r in rows[1:]], dtype=np.int64).reshape(-1, len(rows[0]))
    return Dataset(meta["network"], meta["network_hash"], samples, meta["sampler"], meta["seed"], meta["params"])


def testset_csv(ts: TestSet, net: BayesianNetwork) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(net.names) + [f"p_{v.name}_{s}" for v in net.variables for s in v.states])
    for case in ts.cases:
        row = [str(case.evidence[j]) if j in case.evidence else "" for j in range(net.n_vars)]
        for v in net.variables:
            t = case.truth.get(v.index)
            row += [_fmt(x) for x in t] if t is not None else [""] * v.card
        w.writerow(row)
    return buf.getvalue()


def save_testset(ts: TestSet, net: BayesianNetwork, path: str | Path) -> tuple[Path, Path]:
    path = Path(path)
    meta = {"network": ts.network, "network_hash": ts.network_hash, "seed": ts.seed, "n": len(ts),
            "targets": list(ts.targets) if ts.targets is not None else None,
            "policy": ts.policy.to_dict() if ts.policy else None}
    csv_path, json_path = path.with_suffix(".csv"), path.with_suffix(".json")
    csv_path.write_text(testset_csv(ts, net))
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def load_testset(path: str | Path, net: BayesianNetwork) -> TestSet:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta["network_hash"] != net.sha256():
        raise ValueError("test set was generated for a different network")
    rows = list(csv.reader(path.with_suffix(".csv").read_text().splitlines()))[1:]
    m = net.n_vars
    cases = []
    for r in rows:
        ev = {j: int(r[j]) for j in range(m) if r[j] != ""}
        truth, col = {}, m
        for v in net.variables:
            cells = r[col:col + v.card]
            col += v.card
            if cells[0] != "":
                truth[v.index] = np.asarray([float(c) for c in cells])
        cases.append(TestCase(ev, truth))
    policy = ObservationPolicy.from_dict(meta["policy"]) if meta.get("policy") else None
    targets = tuple(meta["targets"]) if meta.get("targets") is not None else None
    return TestSet(meta["network"], meta["network_hash"], cases, meta["seed"], targets, policy)


# --------------------------------------------------------------------------- #
# Synthesized Markov-border networks


class SynthKind(str, enum.Enum):
    A = "A"  # parent -> target; observe the parent
    B = "B"  # target -> child <- uncle; observe the uncle only
    C = "C"  # target -> child; observe the child


@dataclass(frozen=True)
class SynthNetwork:
    network: BayesianNetwork
    target: int
    policy: ObservationPolicy
    kind: SynthKind

    def metadata(self) -> dict:
        return {"kind": self.kind.value, "target": self.target, "policy": self.policy.to_dict(),
                "edges": [[self.network.names[a], self.network.names[b]] for a, b in self.network.edges]}


_BIN = ("0", "1")


def synth_markov_border(kind: SynthKind | str, seed: int) -> SynthNetwork:
    """Binary network with CPT rows drawn uniformly from the simplex."""
    kind = SynthKind(kind)
    rng = np.random.default_rng(seed)
    row = lambda n: rng.dirichlet(np.ones(2), size=n)
    if kind is SynthKind.A:
        net = make_network({"P": _BIN, "T": _BIN}, {"T": ["P"]}, {"P": row(1), "T": row(2)}, "synth_A")
        target, observable = 1, (0,)
    elif kind is SynthKind.B:
        net = make_network({"T": _BIN, "U": _BIN, "C": _BIN}, {"C": ["T", "U"]},
                           {"T": row(1), "U": row(1), "C": row(4)}, "synth_B")
        target, observable = 0, (1,)
    else:
        net = make_network({"T": _BIN, "C": _BIN}, {"C": ["T"]}, {"T": row(1), "C": row(2)}, "synth_C")
        target, observable = 0, (1,)
    return SynthNetwork(net, target, ObservationPolicy(observable, "bernoulli", 0.5), kind)


# --------------------------------------------------------------------------- #
# Hyperprior variance study: child success probability delta = a*b + g - a*g


@dataclass(frozen=True)
class Hyperprior:
    kind: str = "uniform"  # uniform(low, high) | beta(a, b) | point(value)
    a: float = 0.0
    b: float = 1.0

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size)
        if self.kind == "beta":
            return rng.beta(self.a, self.b, size)
        if self.kind == "point":
            return np.full(size, self.a)
        raise ValueError(f"unknown hyperprior {self.kind!r}")


@dataclass(frozen=True)
class VarianceReport:
    hyperprior: Hyperprior
    n_draws: int
    mean_delta: float
    var_delta: float
    mean_alpha: float
    var_alpha: float

    @property
    def child_variance_not_smaller(self) -> bool:
        return self.var_delta >= self.var_alpha

    def to_dict(self) -> dict:
        return {"hyperprior": self.hyperprior.kind, "a": self.hyperprior.a, "b": self.hyperprior.b,
                "n_draws": self.n_draws, "mean_delta": self.mean_delta, "var_delta": self.var_delta,
                "mean_alpha": self.mean_alpha, "var_alpha": self.var_alpha,
                "var_delta_ge_var_alpha": self.child_variance_not_smaller}


def hyperprior_variance_report(hyperprior: Hyperprior, n_draws: int = 100_000, seed: int = 0) -> VarianceReport:
    if n_draws < 1000:
        raise ValueError("n_draws must be >= 1000")
    rng = np.random.default_rng(seed)
    alpha, beta, gamma = hyperprior.draw(rng, (3, n_draws))
    delta = alpha * beta + gamma - alpha * gamma
    return VarianceReport(hyperprior, n_draws, float(delta.mean()), float(delta.var()),
                          float(alpha.mean()), float(alpha.var()))
