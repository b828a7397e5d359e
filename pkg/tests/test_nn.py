import numpy as np
import pytest

from revrl import nn
from revrl.core import RngState


def make_net(sizes, acts, seed=0):
    return nn.dense_net(sizes, acts, RngState(seed).fork("net"))


def test_zero_net_sigmoid_head_outputs_half():
    net = make_net([3, 1], ["sigmoid"])
    net.layers[0].W[:] = 0.0
    net.layers[0].b[:] = 0.0
    out, _ = nn.forward(net, np.array([0.3, -2.0, 5.0]))
    assert out[0] == pytest.approx(0.5)


def test_identity_single_layer_passes_input_through():
    net = make_net([4, 4], ["identity"])
    net.layers[0].W[:] = np.eye(4)
    net.layers[0].b[:] = 0.0
    x = np.array([1.0, -2.0, 3.5, 0.0])
    out, _ = nn.forward(net, x)
    assert np.array_equal(out, x)


def test_relu_clamps_negative_inputs():
    net = make_net([2, 2], ["relu"])
    net.layers[0].W[:] = np.eye(2)
    net.layers[0].b[:] = 0.0
    out, _ = nn.forward(net, np.array([-1.0, 2.0]))
    assert np.array_equal(out, np.array([0.0, 2.0]))


def test_scalar_linear_gradient():
    # f(w) = w * x with x = 3: df/dw = 3
    net = make_net([1, 1], ["identity"])
    net.layers[0].W[:] = 0.7
    net.layers[0].b[:] = 0.0
    out, cache = nn.forward(net, np.array([3.0]))
    grads, _ = nn.backward(net, cache, np.array([1.0]))
    assert grads[0][0, 0] == pytest.approx(3.0)


def test_zero_output_grad_gives_zero_param_grads():
    net = make_net([3, 5, 2], ["relu", "identity"], seed=4)
    _, cache = nn.forward(net, RngState(1).gen.normal(size=3))
    grads, gin = nn.backward(net, cache, np.zeros(2))
    assert all(np.all(g == 0.0) for g in grads)
    assert np.all(gin == 0.0)


def _quadratic_loss(out):
    out = np.atleast_2d(out)
    return 0.5 * float((out ** 2).sum()), out


@pytest.mark.parametrize("sizes,acts", [
    ([4, 64, 64, 2], ["relu", "relu", "identity"]),   # policy/value shapes
    ([4, 64, 64], ["relu", "relu"]),                  # embedder trunk
    ([128, 1], ["identity"]),                         # pair head
    ([6, 64, 4], ["relu", "identity"]),               # reversibility net
    ([3, 8, 5, 1], ["relu", "sigmoid", "identity"]),
])
def test_gradients_match_central_finite_differences(sizes, acts):
    # independent oracle: central differences at step 1e-5, relative < 1e-4
    rng = RngState(11)
    worst = 0.0
    for draw in range(3):
        net = nn.dense_net(sizes, acts, rng.fork(f"net{draw}"))
        x = rng.fork(f"x{draw}").gen.normal(size=(2, sizes[0]))
        worst = max(worst, nn.gradient_check(net, x, _quadratic_loss))
    assert worst < 1e-4


def test_forward_is_deterministic_bitwise():
    net = make_net([5, 16, 3], ["relu", "identity"], seed=9)
    x = RngState(2).gen.normal(size=(4, 5))
    a, _ = nn.forward(net, x)
    b, _ = nn.forward(net, x)
    assert np.array_equal(a, b)


def _reference_adam(w, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    # textbook recursion, kept separate from the library implementation
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        w = w - lr * m_hat / (np.sqrt(v_hat) + eps)
    return w


def test_adam_first_step_is_signed_learning_rate():
    for g in (0.3, -2.0, 100.0):
        params = [np.array([1.0])]
        state = nn.AdamState(params, lr=0.05)
        nn.adam_step(state, params, [np.array([g])])
        # first bias-corrected step is -lr * sign(g) up to the epsilon term
        assert params[0][0] == pytest.approx(1.0 - 0.05 * np.sign(g), abs=1e-6)


def test_adam_zero_gradient_leaves_params_unchanged():
    params = [np.full(3, 2.5)]
    state = nn.AdamState(params, lr=0.1)
    nn.adam_step(state, params, [np.zeros(3)])
    assert np.array_equal(params[0], np.full(3, 2.5))


def test_adam_matches_reference_recursion_and_minimizes_quadratic():
    lr = 0.01
    w = np.array([1.0])
    params = [w]
    state = nn.AdamState(params, lr=lr)
    grads_seen = []
    for _ in range(200):
        g = 2.0 * w.copy()
        grads_seen.append(float(g[0]))
        nn.adam_step(state, params, [g])
    ref = _reference_adam(1.0, grads_seen, lr)
    assert w[0] == pytest.approx(ref, abs=1e-12)
    assert abs(w[0]) < 0.5


def test_adam_rejects_non_finite_gradients():
    params = [np.array([1.0])]
    state = nn.AdamState(params, lr=0.1)
    with pytest.raises(FloatingPointError):
        nn.adam_step(state, params, [np.array([np.nan])])


def test_checkpoint_round_trip(tmp_path):
    net = make_net([7, 9, 2], ["relu", "sigmoid"], seed=5)
    path = str(tmp_path / "net.bin")
    nn.save_net(net, path)
    loaded = nn.load_net(path)
    x = RngState(3).gen.normal(size=7)
    a, _ = nn.forward(net, x)
    b, _ = nn.forward(loaded, x)
    assert np.array_equal(a, b)


def test_dimension_mismatch_raises():
    net = make_net([4, 2], ["identity"])
    with pytest.raises(ValueError):
        nn.forward(net, np.zeros(5))
