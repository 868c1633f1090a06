import numpy as np
import pytest

from nodulemine import model, optim
from nodulemine.model import NetworkSpec
from nodulemine.ops import ShapeError

SPEC = NetworkSpec(input_size=8, depth=2, base_channels=4, inception_levels=())


def make_params():
    return model.build_network(SPEC, seed=1)


def zero_grads(params):
    return {k: (np.zeros_like(w), np.zeros_like(b)) for k, (w, b) in params.items()}


def test_defaults_accepted():
    state = optim.adam_init(make_params())
    assert state.lr == 1e-3 and state.beta1 == 0.9
    assert state.beta2 == 0.999 and state.eps == 1e-8
    assert state.t == 0
    assert all(not m[0].any() and not m[1].any() for m in state.m.values())


def test_hyperparameter_bounds():
    params = make_params()
    with pytest.raises(ValueError):
        optim.adam_init(params, beta1=1.0)
    with pytest.raises(ValueError):
        optim.adam_init(params, lr=0.0)
    with pytest.raises(ValueError):
        optim.adam_init(params, beta2=-0.1)
    with pytest.raises(ValueError):
        optim.adam_init(params, eps=0.0)


def test_zero_gradient_is_noop_on_params():
    params = make_params()
    before = params.copy()
    state = optim.adam_init(params)
    optim.adam_step(state, params, zero_grads(params))
    assert params.value_equal(before)
    assert state.t == 1


def test_single_step_hand_example():
    # theta=1, g=0.5, defaults: bias correction makes m_hat=g, v_hat=g^2,
    # so the update is lr * g / (|g| + eps)
    params = model.ParameterSet(SPEC, {"p": (np.array([[[[1.0]]]]), np.zeros(1))})
    state = optim.adam_init(params)
    grads = {"p": (np.array([[[[0.5]]]]), np.zeros(1))}
    optim.adam_step(state, params, grads)
    expected = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8)
    assert abs(params["p"][0][0, 0, 0, 0] - expected) < 1e-12
    assert abs(params["p"][0][0, 0, 0, 0] - 0.9990) < 1e-5


def test_update_opposes_gradient_sign():
    params = model.ParameterSet(
        SPEC, {"p": (np.array([[[[1.0, -1.0]]]]), np.zeros(1))}
    )
    state = optim.adam_init(params)
    grads = {"p": (np.array([[[[0.3, -0.7]]]]), np.zeros(1))}
    optim.adam_step(state, params, grads)
    w = params["p"][0]
    assert w[0, 0, 0, 0] < 1.0
    assert w[0, 0, 0, 1] > -1.0


def test_bounded_update_under_constant_gradient():
    params = model.ParameterSet(SPEC, {"p": (np.full((1, 1, 1, 1), 5.0), np.zeros(1))})
    lr = 1e-3
    state = optim.adam_init(params, lr=lr)
    grads = {"p": (np.full((1, 1, 1, 1), 0.25), np.zeros(1))}
    prev = params["p"][0].copy()
    for _ in range(100):
        optim.adam_step(state, params, grads)
        step = abs(params["p"][0][0, 0, 0, 0] - prev[0, 0, 0, 0])
        assert step <= lr * (1.0 + 1e-9)
        prev = params["p"][0].copy()


def test_rejects_mismatched_grads():
    params = make_params()
    state = optim.adam_init(params)
    grads = zero_grads(params)
    del grads["enc1.conv1"]
    with pytest.raises(ShapeError):
        optim.adam_step(state, params, grads)


def test_trajectory_deterministic():
    rng_a = np.random.default_rng(42)
    rng_b = np.random.default_rng(42)

    def run(rng):
        params = make_params()
        state = optim.adam_init(params)
        for _ in range(5):
            grads = {
                k: (rng.standard_normal(w.shape), rng.standard_normal(b.shape))
                for k, (w, b) in params.items()
            }
            optim.adam_step(state, params, grads)
        return params

    assert run(rng_a).value_equal(run(rng_b))
