import numpy as np
import pytest

from uavee import nn

from gradcheck import SMALL_ATOL, compare_gradients, numeric_gradient, random_problem


def test_zero_network_outputs_zero():
    p = nn.zeros_like(nn.init_params(nn.QNET_SIZES, np.random.default_rng(0)))
    x = np.random.default_rng(1).random((3, 27))
    assert np.array_equal(nn.forward(p, x), np.zeros((3, 5)))


def test_affine_1x1():
    p = nn.ParameterSet([np.array([[2.0]])], [np.array([1.0])])
    assert nn.forward(p, np.array([3.0])).tolist() == [7.0]


def test_seeded_init_and_forward_are_bitwise_reproducible():
    x = np.linspace(0, 1, 27)
    a = nn.forward(nn.init_params(nn.QNET_SIZES, np.random.default_rng(5)), x)
    b = nn.forward(nn.init_params(nn.QNET_SIZES, np.random.default_rng(5)), x)
    assert a.tobytes() == b.tobytes()


def test_init_is_glorot_uniform_with_zero_bias():
    p = nn.init_params(nn.QNET_SIZES, np.random.default_rng(0))
    for w, b in zip(p.weights, p.biases):
        limit = np.sqrt(6.0 / sum(w.shape))
        assert np.all(np.abs(w) <= limit)
        assert not b.any()
    assert p.sizes == nn.QNET_SIZES


def test_forward_rejects_wrong_shape():
    p = nn.init_params(nn.QNET_SIZES, np.random.default_rng(0))
    with pytest.raises(ValueError):
        nn.forward(p, np.zeros(26))


def test_backward_at_target_is_zero():
    p = nn.init_params(nn.QNET_SIZES, np.random.default_rng(0))
    x = np.random.default_rng(1).random((4, 27))
    mask = np.eye(5)[[0, 1, 2, 3]]
    grads, loss = nn.backward(p, x, nn.forward(p, x), mask)
    assert loss == 0.0
    assert all(not g.any() for g in grads.arrays())


@pytest.mark.parametrize("w, y", [(0.5, 2.0), (-1.0, 3.0), (4.0, 4.0)])
def test_single_linear_unit_derivative(w, y):
    p = nn.ParameterSet([np.array([[w]])], [np.array([0.0])])
    grads, loss = nn.backward(p, np.array([[1.0]]), np.array([[y]]), np.array([[1.0]]))
    assert grads.weights[0][0, 0] == pytest.approx(2 * (w - y))
    assert loss == pytest.approx((w - y) ** 2)


def test_backward_only_counts_masked_action():
    p = nn.init_params((3, 4, 2), np.random.default_rng(0))
    x = np.ones((1, 3))
    q = nn.forward(p, x)
    targets = np.array([[q[0, 0], q[0, 1] + 100.0]])
    _, loss = nn.backward(p, x, targets, np.array([[1.0, 0.0]]))
    assert loss == 0.0


def test_backward_rejects_empty_batch():
    p = nn.init_params((3, 2), np.random.default_rng(0))
    with pytest.raises(ValueError):
        nn.backward(p, np.zeros((0, 3)), np.zeros((0, 2)), np.zeros((0, 2)))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradients_match_finite_differences(seed):
    params, x, targets, mask = random_problem(seed)
    grads, _ = nn.backward(params, x, targets, mask)
    rel, small = compare_gradients(grads.arrays(), numeric_gradient(params, x, targets, mask))
    assert rel < 1e-3 and small <= SMALL_ATOL


def test_rmsprop_zero_gradient_is_fixed_point():
    p = nn.init_params((3, 4, 2), np.random.default_rng(0))
    before = p.copy()
    opt = nn.RMSprop(p, 0.1)
    opt.update(p, nn.zeros_like(p))
    assert p.equals(before)


def test_rmsprop_one_scalar_step():
    p = nn.ParameterSet([np.array([[1.0]])], [np.array([0.0])])
    g = nn.ParameterSet([np.array([[1.0]])], [np.array([0.0])])
    cache = nn.zeros_like(p)
    nn.rmsprop_update(p, g, cache, learning_rate=0.1, decay=0.0, eps=1e-8)
    assert p.weights[0][0, 0] == pytest.approx(1.0 - 0.1 / (1.0 + 1e-8), rel=1e-15)
    assert cache.weights[0][0, 0] == 1.0


def test_rmsprop_step_tends_to_learning_rate():
    p = nn.ParameterSet([np.array([[0.0]])], [np.array([0.0])])
    g = nn.ParameterSet([np.array([[0.3]])], [np.array([0.0])])
    opt = nn.RMSprop(p, 0.01, decay=0.9)
    prev = 0.0
    for _ in range(300):
        opt.update(p, g)
        step = prev - p.weights[0][0, 0]
        prev = p.weights[0][0, 0]
    assert step == pytest.approx(0.01, rel=1e-6)


def test_rmsprop_rejects_non_finite_gradient():
    p = nn.ParameterSet([np.array([[0.0]])], [np.array([0.0])])
    g = nn.ParameterSet([np.array([[np.nan]])], [np.array([0.0])])
    with pytest.raises(FloatingPointError):
        nn.rmsprop_update(p, g, nn.zeros_like(p), 0.1)
    assert p.weights[0][0, 0] == 0.0


def test_copy_is_independent():
    p = nn.init_params(nn.QNET_SIZES, np.random.default_rng(0))
    x = np.random.default_rng(1).random(27)
    c = nn.copy_params(p)
    assert np.array_equal(nn.forward(p, x), nn.forward(c, x))
    q_before = nn.forward(c, x)
    p.weights[0] += 1.0
    p.biases[2] -= 3.0
    assert np.array_equal(nn.forward(c, x), q_before)
    assert nn.copy_params(c).equals(c)


def test_smoke_convergence_on_linear_target():
    rng = np.random.default_rng(0)
    p = nn.init_params((1, 8, 1), rng)
    opt = nn.RMSprop(p, 3e-3)
    x = np.linspace(-1, 1, 64)[:, None]
    y = 2 * x
    mask = np.ones_like(y)
    for _ in range(5000):
        grads, loss = nn.backward(p, x, y, mask)
        opt.update(p, grads)
    assert nn.backward(p, x, y, mask)[1] < 1e-3


def test_checkpoint_round_trip(tmp_path):
    p = nn.init_params(nn.QNET_SIZES, np.random.default_rng(0))
    nn.save_params(tmp_path / "a.npz", p)
    q = nn.load_params(tmp_path / "a.npz")
    assert q.equals(p) and q.sizes == p.sizes


def test_checkpoint_rejects_foreign_file(tmp_path):
    np.savez(tmp_path / "x.npz", W0=np.zeros((1, 1)))
    with pytest.raises(ValueError):
        nn.load_params(tmp_path / "x.npz")
