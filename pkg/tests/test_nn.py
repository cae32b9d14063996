import json

import numpy as np
import pytest

from coiabr import nn


def quad_loss(target):
    target = np.asarray(target, dtype=float)

    def loss(out):
        diff = out - target
        return np.sum(diff ** 2), 2 * diff
    return loss


def random_net(rng, dims, acts=None):
    layers = []
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        act = (acts or [nn.RELU] * (len(dims) - 2) + [nn.LINEAR])[i]
        layers.append(nn.Layer(rng.normal(size=(a, b)), rng.normal(size=b) * 0.5, act))
    return nn.Network(layers)


def kink_free(net, x, margin=1e-3):
    acts = nn.forward_trace(net, x)
    for layer, a_in in zip(net.layers, acts[:-1]):
        if layer.activation == nn.RELU:
            z = a_in @ layer.weights + layer.biases
            if np.any(np.abs(z) < margin):
                return False
    return True


def test_zero_network_outputs_zero():
    net = nn.Network([nn.Layer(np.zeros((4, 3)), np.zeros(3)), nn.Layer(np.zeros((3, 2)), np.zeros(2), nn.LINEAR)])
    np.testing.assert_array_equal(nn.forward(net, np.arange(4.0)), [0, 0])


def test_identity_layer():
    net = nn.Network([nn.Layer(np.eye(3), np.zeros(3), nn.LINEAR)])
    x = np.array([1.5, -2.0, 0.25])
    np.testing.assert_array_equal(nn.forward(net, x), x)


def test_forward_deterministic():
    net = nn.init_network([6, 8, 3], seed=5)
    x = np.linspace(-1, 1, 6)
    a, b = nn.forward(net, x), nn.forward(nn.init_network([6, 8, 3], seed=5), x)
    assert a.tobytes() == b.tobytes()


def test_batch_equals_rows(rng):
    net = nn.init_network([5, 7, 2], seed=1)
    X = rng.normal(size=(4, 5))
    np.testing.assert_allclose(nn.forward(net, X), np.stack([nn.forward(net, x) for x in X]))


def test_dimension_mismatch():
    net = nn.init_network([3, 2], seed=0)
    with pytest.raises(nn.DimensionMismatch):
        nn.forward(net, np.zeros(4))
    with pytest.raises(nn.DimensionMismatch):
        nn.backward(net, np.zeros(3), np.zeros(3))
    with pytest.raises(nn.DimensionMismatch):
        nn.Network([nn.Layer(np.zeros((3, 2)), np.zeros(2)), nn.Layer(np.zeros((4, 1)), np.zeros(1))])


def test_relu_nonnegative(rng):
    net = random_net(rng, [4, 6, 3], [nn.RELU, nn.RELU])
    assert np.all(nn.forward(net, rng.normal(size=(50, 4))) >= 0)


def test_zero_output_gradient(rng):
    net = random_net(rng, [4, 5, 2])
    for dw, db in nn.backward(net, rng.normal(size=4), np.zeros(2)):
        assert not dw.any() and not db.any()


def test_linear_scalar_gradient():
    w = np.array([[0.5], [-1.0], [2.0]])
    net = nn.Network([nn.Layer(w, np.zeros(1), nn.LINEAR)])
    x = np.array([3.0, 1.0, -2.0])
    (dw, db), = nn.backward(net, x, np.ones(1))
    np.testing.assert_array_equal(dw[:, 0], x)
    np.testing.assert_array_equal(db, [1.0])


def test_backward_matches_finite_differences(rng):
    checked = 0
    while checked < 10:
        net = random_net(rng, [5, 8, 6, 3])
        x = rng.normal(size=5)
        if not kink_free(net, x):
            continue
        assert nn.gradient_check(net, quad_loss(rng.normal(size=3)), x) < 1e-4
        checked += 1


def test_batched_backward_is_row_sum(rng):
    net = random_net(rng, [4, 6, 2])
    X, G = rng.normal(size=(3, 4)), rng.normal(size=(3, 2))
    batch = nn.backward(net, X, G)
    rows = [nn.backward(net, x, g) for x, g in zip(X, G)]
    for i, (dw, db) in enumerate(batch):
        np.testing.assert_allclose(dw, sum(r[i][0] for r in rows))
        np.testing.assert_allclose(db, sum(r[i][1] for r in rows))


def test_gradient_check_linear_quadratic(rng):
    net = random_net(rng, [4, 3], [nn.LINEAR])
    assert nn.gradient_check(net, quad_loss([1.0, -2.0, 0.5]), rng.normal(size=4)) < 1e-7


def test_gradient_check_zero_network():
    net = nn.Network([nn.Layer(np.zeros((3, 4)), np.zeros(4)), nn.Layer(np.zeros((4, 1)), np.zeros(1), nn.LINEAR)])

    def loss(out):
        return out[0] ** 2, 2 * out
    assert nn.gradient_check(net, loss, np.zeros(3)) == 0.0


def test_linear_output_homogeneous(rng):
    net = random_net(rng, [4, 5, 2])
    x = rng.normal(size=4)
    y = nn.forward(net, x)
    net.layers[-1].weights *= 3.0
    net.layers[-1].biases *= 3.0
    np.testing.assert_allclose(nn.forward(net, x), 3.0 * y)


def test_zero_gradient_fixed_point(rng):
    net = random_net(rng, [3, 4, 2])
    before = [p.copy() for p in net.params()]
    zero = [(np.zeros_like(l.weights), np.zeros_like(l.biases)) for l in net.layers]
    for method in ("adam", "sgd"):
        nn.optimizer_step(nn.OptimizerState(method, 0.1), net, zero)
    for a, b in zip(before, net.params()):
        np.testing.assert_array_equal(a, b)


def test_adam_first_step_magnitude(rng):
    net = random_net(rng, [3, 4, 2])
    before = [p.copy() for p in net.params()]
    grads = [(rng.normal(size=l.weights.shape) + 0.5, rng.normal(size=l.biases.shape) + 0.5) for l in net.layers]
    # keep every gradient component well away from eps
    grads = [(np.where(np.abs(g) < 0.05, 0.05, g), np.where(np.abs(h) < 0.05, 0.05, h)) for g, h in grads]
    lr = 0.01
    nn.optimizer_step(nn.OptimizerState("adam", lr), net, grads)
    for a, b in zip(before, net.params()):
        np.testing.assert_allclose(np.abs(b - a), lr, rtol=1e-6)


def test_sgd_arithmetic():
    net = nn.Network([nn.Layer(np.array([[1.0]]), np.zeros(1), nn.LINEAR)])
    nn.optimizer_step(nn.OptimizerState("sgd", 0.5), net, [(np.array([[2.0]]), np.zeros(1))])
    assert net.layers[0].weights[0, 0] == 0.0


def test_adam_converges_on_quadratic():
    net = nn.Network([nn.Layer(np.array([[5.0]]), np.zeros(1), nn.LINEAR)])
    opt = nn.OptimizerState("adam", 1e-2)
    target = -1.7
    for step in range(10_000):
        w = net.layers[0].weights[0, 0]
        if abs(w - target) < 1e-3 and step > 0:
            break
        nn.optimizer_step(opt, net, [(np.array([[2 * (w - target)]]), np.zeros(1))])
    assert abs(net.layers[0].weights[0, 0] - target) < 1e-3


def test_soft_update():
    a = nn.Network([nn.Layer(np.ones((2, 2)), np.ones(2), nn.LINEAR)])
    b = nn.Network([nn.Layer(np.zeros((2, 2)), np.zeros(2), nn.LINEAR)])
    nn.soft_update(b, a, 0.5)
    np.testing.assert_array_equal(b.layers[0].weights, 0.5)


def test_init_ranges():
    net = nn.init_network([100, 50, 10], seed=0)
    assert np.abs(net.layers[0].weights).max() <= np.sqrt(6 / 100)
    assert np.abs(net.layers[1].weights).max() <= np.sqrt(6 / 60)
    assert [l.activation for l in net.layers] == [nn.RELU, nn.LINEAR]


def test_checkpoint_roundtrip(tmp_path, rng):
    net = random_net(rng, [3, 4, 2])
    path = tmp_path / "net.json"
    nn.save_network(net, path)
    doc = json.loads(path.read_text())
    assert doc["format_version"] == nn.CHECKPOINT_VERSION and doc["dims"] == [3, 4, 2]
    back = nn.load_network(path)
    x = rng.normal(size=3)
    assert nn.forward(back, x).tobytes() == nn.forward(net, x).tobytes()


def test_checkpoint_version_check():
    doc = nn.network_to_dict(nn.init_network([2, 1]))
    doc["format_version"] = 99
    with pytest.raises(ValueError):
        nn.network_from_dict(doc)
