"""Exact posterior marginals: variable elimination plus a brute-force enumeration oracle."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .bn import BayesianNetwork, topological_order

DEFAULT_FACTOR_CAP = 10**7
ENUM_CAP = 2**24
MAX_OPERANDS = 16


class ZeroProbabilityEvidence(ValueError):
    """P(evidence) == 0, so the posterior is undefined."""


class FactorTooLarge(RuntimeError):
    pass


@dataclass(frozen=True)
class Factor:
    scope: tuple[int, ...]
    values: np.ndarray  # axis i <-> scope[i]

    def __post_init__(self):
        if self.values.ndim != len(self.scope):
            raise ValueError("factor rank does not match scope")


@dataclass(frozen=True)
class PosteriorMarginals:
    evidence: dict[int, int]
    marginals: dict[int, np.ndarray]
    evidence_prob: float

    def __getitem__(self, j: int) -> np.ndarray:
        return self.marginals[j]

    def max_abs_diff(self, other: "PosteriorMarginals") -> float:
        if self.marginals.keys() != other.marginals.keys():
            raise ValueError("marginals cover different variables")
        return max((float(np.max(np.abs(self[j] - other[j]))) for j in self.marginals), default=0.0)


def _check_evidence(net: BayesianNetwork, evidence: Mapping[int, int]) -> dict[int, int]:
    ev = {int(k): int(v) for k, v in evidence.items()}
    for j, s in ev.items():
        if not 0 <= j < net.n_vars:
            raise ValueError(f"evidence variable {j} out of range")
        if not 0 <= s < net.variables[j].card:
            raise ValueError(f"evidence state {s} out of range for variable {j}")
    return ev


def _cpt_factors(net: BayesianNetwork, evidence: Mapping[int, int]) -> list[Factor]:
    """CPT factors with evidence variables sliced out."""
    factors = []
    for j in range(net.n_vars):
        scope = net.parents(j) + (j,)
        vals = net.cpt_array(j)
        index = tuple(evidence[v] if v in evidence else slice(None) for v in scope)
        kept = tuple(v for v in scope if v not in evidence)
        factors.append(Factor(kept, np.asarray(vals[index], dtype=np.float64)))
    return factors


def _product_sum(factors: Sequence[Factor], keep: Sequence[int], cards: Sequence[int], cap: int) -> Factor:
    """Multiply factors and sum out everything not in ``keep`` (einsum, fixed operand order)."""
    factors = list(factors)
    # einsum accepts a bounded number of operands; fold leading chunks first
    while len(factors) > MAX_OPERANDS:
        head, tail = factors[:MAX_OPERANDS], factors[MAX_OPERANDS:]
        needed = set(keep).union(*(f.scope for f in tail))
        head_vars = sorted(set().union(*(f.scope for f in head)))
        factors = [_product_sum(head, [v for v in head_vars if v in needed], cards, cap)] + tail
    letters = {}
    operands = []
    for f in factors:
        for v in f.scope:
            letters.setdefault(v, len(letters))
        operands += [f.values, [letters[v] for v in f.scope]]
    keep = [v for v in keep if v in letters]
    size = int(np.prod([cards[v] for v in letters])) if letters else 1
    if size > cap:
        raise FactorTooLarge(f"intermediate factor of {size} entries exceeds cap {cap}")
    out = np.einsum(*operands, [letters[v] for v in keep]) if operands else np.ones(())
    return Factor(tuple(keep), np.asarray(out, dtype=np.float64))


def moral_graph(net: BayesianNetwork) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {j: set() for j in range(net.n_vars)}
    for j in range(net.n_vars):
        fam = net.parents(j) + (j,)
        for a, b in itertools.combinations(fam, 2):
            adj[a].add(b)
            adj[b].add(a)
    return adj


def elimination_order_minfill(net: BayesianNetwork, evidence: Mapping[int, int] = ()) -> list[int]:
    """Greedy min-fill over the moral graph minus evidence; ties go to the lowest index."""
    evidence = dict(evidence)
    adj = {j: nb - evidence.keys() for j, nb in moral_graph(net).items() if j not in evidence}
    order = []
    while adj:
        best, best_fill = None, None
        for v in sorted(adj):
            nb = sorted(adj[v])
            fill = sum(1 for a, b in itertools.combinations(nb, 2) if b not in adj[a])
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
        nb = adj.pop(best)
        for a, b in itertools.combinations(nb, 2):
            adj[a].add(b)
            adj[b].add(a)
        for a in nb:
            adj[a].discard(best)
        order.append(best)
    return order


def max_factor_scope(net: BayesianNetwork, order: Sequence[int], evidence: Mapping[int, int] = ()) -> int:
    """Largest scope (variable count) created when eliminating in ``order``."""
    evidence = dict(evidence)
    scopes = [frozenset(v for v in net.parents(j) + (j,) if v not in evidence) for j in range(net.n_vars)]
    worst = 0
    for v in order:
        touching = [s for s in scopes if v in s]
        merged = frozenset().union(*touching) if touching else frozenset({v})
        worst = max(worst, len(merged))
        scopes = [s for s in scopes if v not in s] + [merged - {v}]
    return worst


def _ancestors(net: BayesianNetwork, nodes) -> set[int]:
    """``nodes`` together with all their ancestors."""
    seen = set()
    stack = list(nodes)
    while stack:
        v = stack.pop()
        if v not in seen:
            seen.add(v)
            stack.extend(net.parents(v))
    return seen


def _eliminate(factors: list[Factor], order: Sequence[int], cards, cap: int) -> list[Factor]:
    for v in order:
        touching = [f for f in factors if v in f.scope]
        if not touching:
            continue
        rest = [f for f in factors if v not in f.scope]
        scope = sorted(set().union(*(f.scope for f in touching)) - {v})
        rest.append(_product_sum(touching, scope, cards, cap))
        factors = rest
    return factors


def posterior_marginals_ve(net: BayesianNetwork, evidence: Mapping[int, int] = (), *,
                           order: Sequence[int] | None = None,
                           factor_cap: int = DEFAULT_FACTOR_CAP) -> PosteriorMarginals:
    """Exact P(X_j | evidence) for every unobserved j by variable elimination.

    One elimination pass per query variable; each pass keeps only that variable.
    ``order`` overrides the min-fill order (it must list every unobserved variable).
    """
    ev = _check_evidence(net, dict(evidence))
    cards = net.cards
    base = _cpt_factors(net, ev)
    full_order = list(order) if order is not None else elimination_order_minfill(net, ev)
    ev_anc = _ancestors(net, ev)
    marginals = {}
    z = None
    for q in range(net.n_vars):
        if q in ev:
            continue
        # CPTs of variables outside ancestors(evidence + q) sum out to 1
        relevant = ev_anc | _ancestors(net, [q])
        factors = [base[j] for j in sorted(relevant)]
        remaining = _eliminate(factors, [v for v in full_order if v != q and v in relevant], cards, factor_cap)
        joint = _product_sum(remaining, [q], cards, factor_cap).values
        total = float(joint.sum())
        if not total > 0.0:
            raise ZeroProbabilityEvidence(f"evidence {ev} has probability zero")
        marginals[q] = joint / total
        z = total
    if z is None:
        z = float(_product_sum(base, [], cards, factor_cap).values)
        if not z > 0.0:
            raise ZeroProbabilityEvidence(f"evidence {ev} has probability zero")
    return PosteriorMarginals(ev, marginals, z)


def evidence_probability(net: BayesianNetwork, evidence: Mapping[int, int] = (), *,
                         factor_cap: int = DEFAULT_FACTOR_CAP) -> float:
    ev = _check_evidence(net, dict(evidence))
    factors = _eliminate(_cpt_factors(net, ev), elimination_order_minfill(net, ev), net.cards, factor_cap)
    return float(_product_sum(factors, [], net.cards, factor_cap).values)


def joint_table(net: BayesianNetwork, cap: int = ENUM_CAP) -> np.ndarray:
    """Full joint P(x_1..x_M) as an M-dimensional array, built by explicit products."""
    cards = net.cards
    size = int(np.prod(cards))
    if size > cap:
        raise FactorTooLarge(f"joint state space {size} exceeds enumeration guard {cap}")
    states = np.indices(cards).reshape(net.n_vars, -1)
    p = np.ones(size)
    for j in topological_order(net):
        par = net.parents(j)
        rows = np.ravel_multi_index(states[list(par)], [cards[i] for i in par]) if par else np.zeros(size, int)
        p *= net.cpt(j).table[rows, states[j]]
    return p.reshape(cards)


def posterior_marginals_enum(net: BayesianNetwork, evidence: Mapping[int, int] = (), *,
                             cap: int = ENUM_CAP) -> PosteriorMarginals:
    """Brute-force oracle: enumerate the joint, condition, and sum."""
    ev = _check_evidence(net, dict(evidence))
    joint = joint_table(net, cap)
    index = tuple(ev.get(j, slice(None)) for j in range(net.n_vars))
    sliced = joint[index]
    free = [j for j in range(net.n_vars) if j not in ev]
    z = float(sliced.sum())
    if not z > 0.0:
        raise ZeroProbabilityEvidence(f"evidence {ev} has probability zero")
    marginals = {}
    for ax, j in enumerate(free):
        other = tuple(a for a in range(len(free)) if a != ax)
        marginals[j] = sliced.sum(axis=other) / z
    return PosteriorMarginals(ev, marginals, z)
