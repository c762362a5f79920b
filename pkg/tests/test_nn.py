import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hetinf.nn import (NetSpec, NonFiniteError, Params, backward, forward, gradient_check, gradient_check_flat,
                       init_params, make_optimizer, params_from_dict, params_to_dict, step)


def test_netspec_validation():
    with pytest.raises(ValueError):
        NetSpec((3,), ())
    with pytest.raises(ValueError):
        NetSpec((3, 0), ("linear",))
    with pytest.raises(ValueError):
        NetSpec((3, 2), ("softmax",))
    with pytest.raises(ValueError):
        NetSpec((3, 2, 1), ("relu",))


def test_zero_net_outputs_zero():
    spec = NetSpec.mlp(3, (4,), 2)
    params = init_params(spec, np.random.default_rng(0)).zeros_like()
    np.testing.assert_array_equal(forward(spec, params, np.ones((5, 3)))[0], 0)


def test_identity_layer():
    spec = NetSpec((3, 3), ("linear",))
    x = np.random.default_rng(0).normal(size=(4, 3))
    np.testing.assert_array_equal(forward(spec, Params([np.eye(3)], [np.zeros(3)]), x)[0], x)


def test_hand_computed_two_layer():
    spec = NetSpec((2, 2, 1), ("relu", "linear"))
    params = Params([np.array([[1.0, -1.0], [2.0, 0.5]]), np.array([[1.0], [2.0]])],
                    [np.array([0.0, -1.0]), np.array([0.5])])
    # hidden pre-activations (5, -1) -> relu (5, 0) -> 5 + 0 + 0.5
    assert forward(spec, params, np.array([[1.0, 2.0]]))[0][0, 0] == 5.5


def test_input_width_mismatch():
    spec = NetSpec((2, 1), ("linear",))
    with pytest.raises(ValueError):
        forward(spec, init_params(spec, np.random.default_rng(0)), np.ones((1, 3)))


def test_zero_output_gradient():
    spec = NetSpec.mlp(3, (4,), 2, "tanh")
    params = init_params(spec, np.random.default_rng(0))
    out, cache = forward(spec, params, np.ones((2, 3)))
    grads, _ = backward(spec, params, cache, np.zeros_like(out))
    assert all((a == 0).all() for a in grads.arrays())


def test_scalar_squared_error_gradient():
    w, b, x, t = 0.7, -0.2, 1.5, 2.0
    spec = NetSpec((1, 1), ("linear",))
    params = Params([np.array([[w]])], [np.array([b])])
    out, cache = forward(spec, params, np.array([[x]]))
    grads, _ = backward(spec, params, cache, 2 * (out - t))
    assert grads.weights[0][0, 0] == pytest.approx(2 * (w * x + b - t) * x, rel=1e-15)
    assert grads.biases[0][0] == pytest.approx(2 * (w * x + b - t), rel=1e-15)


def _squared_loss(spec, x, t):
    def fn(params):
        out, cache = forward(spec, params, x)
        r = out - t
        grads, _ = backward(spec, params, cache, 2 * r / len(x))
        return float((r * r).sum()) / len(x), grads
    return fn


def test_gradcheck_quadratic_linear_net():
    rng = np.random.default_rng(0)
    spec = NetSpec((4, 3), ("linear",))
    x, t = rng.normal(size=(8, 4)), rng.normal(size=(8, 3))
    rep = gradient_check(spec, init_params(spec, rng), _squared_loss(spec, x, t), 1e-7, n_checks=None)
    assert rep.ok and rep.max_rel_error <= 1e-7


@pytest.mark.parametrize("seed", [0, 1, 2])
@pytest.mark.parametrize("act", ["relu", "sigmoid", "tanh", "linear"])
def test_gradcheck_deep_net(seed, act):
    rng = np.random.default_rng(seed)
    spec = NetSpec.mlp(5, (6, 4), 3, act, "sigmoid")
    x, t = rng.normal(size=(7, 5)), rng.random((7, 3))
    rep = gradient_check(spec, init_params(spec, rng), _squared_loss(spec, x, t), 1e-4, n_checks=None)
    assert rep.ok, rep


def test_gradcheck_flags_wrong_gradient():
    rep = gradient_check_flat(lambda v: (float(v @ v), 3 * v), np.array([1.0, -2.0]), n_checks=None)
    assert not rep.ok


def test_gradcheck_skips_kinks():
    rep = gradient_check_flat(lambda v: (float(np.abs(v).sum()), np.sign(v)), np.array([1e-6, 1.0]),
                              n_checks=None)
    assert rep.skipped_kinks == 1 and rep.ok


def _pair():
    return Params([np.array([[1.0, 2.0]])], [np.array([0.5, -0.5])]), Params([np.array([[0.3, -0.1]])],
                                                                                [np.array([1.0, 2.0])])


@pytest.mark.parametrize("kind", ["momentum", "rmsprop"])
def test_zero_gradient_leaves_params(kind):
    p, _ = _pair()
    q = step(make_optimizer(kind), p, p.zeros_like())
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), q.arrays()))


def test_plain_sgd_when_momentum_zero():
    p, g = _pair()
    q = step(make_optimizer("momentum", 0.1, momentum=0.0), p, g)
    for a, b, c in zip(p.arrays(), g.arrays(), q.arrays()):
        np.testing.assert_allclose(c, a - 0.1 * b, rtol=0, atol=1e-15)


def test_two_momentum_steps():
    p, g = _pair()
    lr, mu = 0.05, 0.9
    opt = make_optimizer("momentum", lr, momentum=mu)
    q = step(opt, step(opt, p, g), g)
    for a, b, c in zip(p.arrays(), g.arrays(), q.arrays()):
        np.testing.assert_allclose(a - c, lr * b * (1 + (1 + mu)), rtol=0, atol=1e-14)


def test_rmsprop_first_step():
    p, g = _pair()
    opt = make_optimizer("rmsprop", 0.01, rho=0.9, eps=1e-8)
    q = step(opt, p, g)
    for a, b, c in zip(p.arrays(), g.arrays(), q.arrays()):
        np.testing.assert_allclose(c, a - 0.01 * b / np.sqrt(0.1 * b * b + 1e-8), rtol=1e-14)


def test_optimizer_defaults():
    assert make_optimizer("momentum").lr == 0.01 and make_optimizer("rmsprop").lr == 0.001
    with pytest.raises(ValueError):
        make_optimizer("adam")


@given(st.sampled_from(["momentum", "rmsprop"]), st.integers(0, 1000))
def test_zero_learning_rate_is_identity(kind, seed):
    rng = np.random.default_rng(seed)
    spec = NetSpec.mlp(3, (4,), 2)
    p = init_params(spec, rng)
    g = init_params(spec, rng)
    q = step(make_optimizer(kind, 0.0), p, g)
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), q.arrays()))


def test_non_finite_update_raises():
    p, g = _pair()
    g.weights[0][0, 0] = np.inf
    with pytest.raises(NonFiniteError):
        step(make_optimizer("momentum"), p, g)


def test_optimizer_shape_guard():
    p, g = _pair()
    opt = make_optimizer("momentum")
    step(opt, p, g)
    spec = NetSpec((3, 1), ("linear",))
    other = init_params(spec, np.random.default_rng(0))
    with pytest.raises(ValueError):
        step(opt, other, other)


def test_init_statistics():
    spec = NetSpec((100, 100, 100), ("relu", "sigmoid"))
    a = init_params(spec, np.random.default_rng(5))
    b = init_params(spec, np.random.default_rng(5))
    assert all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))
    assert abs(a.weights[0].std() / np.sqrt(0.02) - 1) < 0.2
    assert abs(a.weights[1].std() / np.sqrt(0.01) - 1) < 0.2
    assert all((bias == 0).all() for bias in a.biases)


@given(st.integers(0, 1000))
def test_batch_order_equivariance(seed):
    rng = np.random.default_rng(seed)
    spec = NetSpec.mlp(4, (8, 8), 3)
    params = init_params(spec, rng)
    x = rng.normal(size=(10, 4))
    perm = rng.permutation(10)
    np.testing.assert_array_equal(forward(spec, params, x)[0][perm], forward(spec, params, x[perm])[0])


def test_checkpoint_round_trip():
    spec = NetSpec.mlp(3, (5,), 2, "tanh", "sigmoid")
    params = init_params(spec, np.random.default_rng(0))
    spec2, params2 = params_from_dict(json.loads(json.dumps(params_to_dict(spec, params))))
    assert spec2 == spec
    assert all(np.array_equal(a, b) for a, b in zip(params.arrays(), params2.arrays()))


def test_checkpoint_version_guard():
    spec = NetSpec((1, 1), ("linear",))
    d = params_to_dict(spec, init_params(spec, np.random.default_rng(0)))
    d["version"] = 99
    with pytest.raises(ValueError):
        params_from_dict(d)


def test_params_flat_round_trip():
    spec = NetSpec.mlp(3, (4,), 2)
    p = init_params(spec, np.random.default_rng(1))
    q = p.with_flat(p.flat())
    assert p.size == 3 * 4 + 4 + 4 * 2 + 2
    assert all(np.array_equal(a, b) for a, b in zip(p.arrays(), q.arrays()))
    assert p.l1() == pytest.approx(np.abs(p.flat()).sum())
