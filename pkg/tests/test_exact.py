import numpy as np
import pytest
from hypothesis import given, strategies as st

from hetinf.bn import make_network, topological_order
from hetinf.exact import (FactorTooLarge, ZeroProbabilityEvidence, elimination_order_minfill, evidence_probability,
                          max_factor_scope, posterior_marginals_enum, posterior_marginals_ve)
from hetinf.sampling import ancestral_samples, synth_markov_border

from oracles import CHAIN_POSTERIOR_A1_GIVEN_B1, loop_posteriors, random_evidence


def test_chain_bayes_rule(chain_ab):
    post = posterior_marginals_ve(chain_ab, {1: 1})
    assert post[0][1] == pytest.approx(CHAIN_POSTERIOR_A1_GIVEN_B1, abs=1e-12)
    assert post.evidence_prob == pytest.approx(0.41)


def test_root_marginal_without_evidence_is_prior(asia):
    j = asia.index("asia")
    np.testing.assert_allclose(posterior_marginals_ve(asia)[j], asia.cpt(j).table[0], atol=1e-15)


@pytest.mark.parametrize("name", ["asia", "survey"])
def test_ve_matches_loop_oracle(name, request, rng):
    net = request.getfixturevalue(name)
    samples = ancestral_samples(net, rng, 25)
    for x in samples:
        ev = random_evidence(net, rng, x)
        ve = posterior_marginals_ve(net, ev)
        ref, z = loop_posteriors(net, ev)
        assert ve.evidence_prob == pytest.approx(z, rel=1e-10)
        for j, p in ref.items():
            np.testing.assert_allclose(ve[j], p, atol=1e-12)


def test_enum_matches_ve_on_asia(asia, rng):
    for x in ancestral_samples(asia, rng, 50):
        ev = random_evidence(asia, rng, x)
        assert posterior_marginals_ve(asia, ev).max_abs_diff(posterior_marginals_enum(asia, ev)) <= 1e-12


def test_order_invariance(asia, rng):
    for x in ancestral_samples(asia, rng, 20):
        ev = random_evidence(asia, rng, x)
        rev = [j for j in reversed(topological_order(asia)) if j not in ev]
        a = posterior_marginals_ve(asia, ev)
        b = posterior_marginals_ve(asia, ev, order=rev)
        assert a.max_abs_diff(b) <= 1e-12


def test_evidence_probability_matches_enumeration(survey, rng):
    for x in ancestral_samples(survey, rng, 20):
        ev = random_evidence(survey, rng, x)
        assert evidence_probability(survey, ev) == pytest.approx(posterior_marginals_enum(survey, ev).evidence_prob,
                                                                 rel=1e-12)


def _deterministic():
    # C = A xor B
    tab = [[1, 0], [0, 1], [0, 1], [1, 0]]
    return make_network({"A": ("0", "1"), "B": ("0", "1"), "C": ("0", "1")}, {"C": ["A", "B"]},
                        {"A": [0.5, 0.5], "B": [0.5, 0.5], "C": tab})


def test_deterministic_child_given_parents():
    net = _deterministic()
    np.testing.assert_array_equal(posterior_marginals_enum(net, {0: 1, 1: 0})[2], [0, 1])
    np.testing.assert_array_equal(posterior_marginals_ve(net, {0: 1, 1: 0})[2], [0, 1])


@pytest.mark.parametrize("fn", [posterior_marginals_ve, posterior_marginals_enum])
def test_zero_probability_evidence(fn):
    with pytest.raises(ZeroProbabilityEvidence):
        fn(_deterministic(), {0: 1, 1: 1, 2: 1})


def test_evidence_out_of_range(asia):
    with pytest.raises(ValueError):
        posterior_marginals_ve(asia, {0: 5})


def test_enumeration_guard(alarm):
    with pytest.raises(FactorTooLarge):
        posterior_marginals_enum(alarm, {})


def test_factor_cap(alarm):
    with pytest.raises(FactorTooLarge):
        posterior_marginals_ve(alarm, {}, factor_cap=4)


def _chain(n):
    spec = {f"X{i}": ("0", "1") for i in range(n)}
    par = {f"X{i}": [f"X{i-1}"] for i in range(1, n)}
    tabs = {f"X{i}": ([0.5, 0.5] if i == 0 else [[0.9, 0.1], [0.2, 0.8]]) for i in range(n)}
    return make_network(spec, par, tabs)


def test_minfill_chain_starts_at_an_endpoint():
    order = elimination_order_minfill(_chain(5))
    assert order[0] in (0, 4)
    assert sorted(order) == list(range(5))


def test_minfill_skips_evidence():
    assert 2 not in elimination_order_minfill(_chain(5), {2: 0})


def test_alarm_minfill_scope(alarm):
    assert max_factor_scope(alarm, elimination_order_minfill(alarm)) <= 6


def test_complete_moral_graph_scope():
    spec = {k: ("0", "1") for k in "ABCD"}
    par = {"B": ["A"], "C": ["A", "B"], "D": ["A", "B", "C"]}
    rng = np.random.default_rng(0)
    tabs = {k: rng.dirichlet([1, 1], size=2 ** len(par.get(k, []))) for k in "ABCD"}
    net = make_network(spec, par, tabs)
    assert max_factor_scope(net, elimination_order_minfill(net)) == 4


@given(st.sampled_from("ABC"), st.integers(0, 10_000), st.integers(0, 10_000))
def test_synth_ve_matches_enum(kind, net_seed, ev_seed):
    net = synth_markov_border(kind, net_seed).network
    rng = np.random.default_rng(ev_seed)
    ev = random_evidence(net, rng, ancestral_samples(net, rng, 1)[0])
    assert posterior_marginals_ve(net, ev).max_abs_diff(posterior_marginals_enum(net, ev)) <= 1e-12


@given(st.integers(0, 10_000))
def test_marginals_are_distributions(seed):
    from hetinf import networks
    net = networks.load("survey")
    rng = np.random.default_rng(seed)
    post = posterior_marginals_ve(net, random_evidence(net, rng, ancestral_samples(net, rng, 1)[0]))
    for p in post.marginals.values():
        assert abs(p.sum() - 1) <= 1e-9 and (p >= 0).all() and (p <= 1 + 1e-12).all()


def test_many_operand_products_match_enumeration():
    # 40 independent roots: the final product has more operands than einsum accepts at once
    n = 40
    rng = np.random.default_rng(0)
    net = make_network({f"X{i}": ("0", "1") for i in range(n)}, {},
                       {f"X{i}": rng.dirichlet([1, 1]) for i in range(n)})
    post = posterior_marginals_ve(net, {0: 1})
    for j in range(1, n):
        np.testing.assert_allclose(post[j], net.cpt(j).table[0], atol=1e-15)
    assert post.evidence_prob == pytest.approx(net.cpt(0).table[0][1], rel=1e-12)
