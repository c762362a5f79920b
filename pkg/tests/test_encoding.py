import numpy as np
import pytest
from hypothesis import given, strategies as st

from hetinf.bn import make_network
from hetinf.encoding import (OneHotLayout, build_layout, decode_assignment, decode_distribution, encode_assignment,
                             encode_assignments, encode_observation, latent_mask, normalized_view, observe)

TWO_BIN = OneHotLayout((2, 2))


def test_asia_width(asia):
    lay = build_layout(asia)
    assert lay.width == 16 and lay.offsets[0] == 0


def test_survey_width(survey):
    assert build_layout(survey).width == sum(survey.cards)


def test_single_three_state():
    net = make_network({"A": ("a", "b", "c")}, {}, {"A": [0.2, 0.3, 0.5]})
    lay = build_layout(net)
    assert lay.width == 3 and lay.offsets == (0,)
    np.testing.assert_array_equal(encode_assignment(lay, [2]), [0, 0, 1])


def test_encode_two_binary():
    np.testing.assert_array_equal(encode_assignment(TWO_BIN, [1, 0]), [0, 1, 1, 0])


@given(st.lists(st.integers(2, 5), min_size=1, max_size=8).flatmap(
    lambda cards: st.tuples(st.just(tuple(cards)), st.tuples(*[st.integers(0, k - 1) for k in cards]))))
def test_round_trip(case):
    cards, a = case
    lay = OneHotLayout(cards)
    x = encode_assignment(lay, list(a))
    assert x.sum() == len(cards)
    np.testing.assert_array_equal(decode_assignment(lay, x), a)


@pytest.mark.parametrize("bad", [[2, 0], [0, -1]])
def test_encode_out_of_range(bad):
    with pytest.raises(ValueError):
        encode_assignment(TWO_BIN, bad)


def test_encode_wrong_width():
    with pytest.raises(ValueError):
        encode_assignments(TWO_BIN, np.zeros((1, 3), int))


def test_empty_evidence():
    o, mask = encode_observation(TWO_BIN, {})
    np.testing.assert_array_equal(o, np.zeros(4))
    np.testing.assert_array_equal(mask, np.ones(4))


def test_full_evidence():
    o, mask = encode_observation(TWO_BIN, {0: 1, 1: 0})
    np.testing.assert_array_equal(mask, np.zeros(4))
    np.testing.assert_array_equal(o, encode_assignment(TWO_BIN, [1, 0]))


def test_partial_evidence():
    o, mask = encode_observation(TWO_BIN, {0: 1})
    np.testing.assert_array_equal(o, [0, 1, 0, 0])
    np.testing.assert_array_equal(mask, [0, 0, 1, 1])


def test_evidence_out_of_range():
    with pytest.raises(ValueError):
        encode_observation(TWO_BIN, {0: 2})


@given(st.integers(0, 2 ** 31 - 1))
def test_mask_invariants(seed):
    rng = np.random.default_rng(seed)
    lay = OneHotLayout((2, 3, 4, 2))
    states = np.stack([rng.integers(0, k, 16) for k in lay.cards], axis=1)
    observed = rng.random((16, 4)) < 0.5
    o, mask = observe(lay, encode_assignments(lay, states), observed)
    np.testing.assert_array_equal(o * mask, 0)
    np.testing.assert_array_equal(mask + np.repeat(observed, lay.cards, axis=1), 1)


def test_extra_state_layout():
    lay = OneHotLayout((2, 2), extra_state=True)
    o, mask = encode_observation(lay, {0: 1})
    assert lay.obs_width == 6
    np.testing.assert_array_equal(o, [0, 1, 0, 0, 0, 1])
    np.testing.assert_array_equal(mask, [0, 0, 1, 1])


def test_latent_mask_blocks():
    np.testing.assert_array_equal(latent_mask(OneHotLayout((3, 1)), np.array([[False, True]])), [[1, 1, 1, 0]])


def test_decode_distribution_is_raw():
    blocks = decode_distribution(TWO_BIN, np.array([0.7, 0.4, 1.0, 0.0]))
    np.testing.assert_array_equal(blocks[0], [0.7, 0.4])
    np.testing.assert_array_equal(blocks[1], [1.0, 0.0])


def test_decode_distribution_length():
    with pytest.raises(ValueError):
        decode_distribution(TWO_BIN, np.zeros(5))


def test_normalized_view_examples():
    np.testing.assert_allclose(normalized_view([0.7, 0.4]), [0.636, 0.364], atol=5e-4)
    np.testing.assert_array_equal(normalized_view([-0.2, 0.1]), [0.0, 1.0])
    np.testing.assert_array_equal(normalized_view([0.0, -3.0, 0.0]), [1 / 3] * 3)


def test_layout_depends_only_on_network(asia):
    assert build_layout(asia) == build_layout(asia)
