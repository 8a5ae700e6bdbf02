"""Forward pass oracles and backward-pass plumbing for every layer type."""

import numpy as np
import pytest

from lesionflow.errors import ShapeMismatch
from lesionflow.nn import (
    Conv2d,
    Dense,
    Flatten,
    MaxPool,
    ModelSpec,
    ReLU,
    backward,
    forward,
    init_params,
    loss_and_grad,
    softmax,
    weighted_ce_loss,
)


def zero_params_like(spec):
    params = init_params(spec, seed=0)
    return [{k: np.zeros_like(v) for k, v in entry.items()} for entry in params]


def test_all_zero_params_give_all_zero_logits():
    spec = ModelSpec(input_shape=(3, 6, 6),
                     layers=(Conv2d(4, 3, 1, 1), ReLU(), MaxPool(2), Flatten(), Dense(8)))
    params = zero_params_like(spec)
    batch = np.random.default_rng(0).random((3, 3, 6, 6))
    assert (forward(spec, params, batch) == 0.0).all()


def test_identity_dense_passes_one_hot_through():
    spec = ModelSpec(input_shape=(8,), layers=(Dense(8),))
    params = [{"w": np.eye(8), "b": np.zeros(8)}]
    x = np.zeros((1, 8))
    x[0, 3] = 1.0
    logits = forward(spec, params, x)
    assert np.array_equal(logits, x)


def test_1x1_conv_affine_map_on_constant_input():
    spec = ModelSpec(input_shape=(1, 4, 4), layers=(Conv2d(1, kernel=1),))
    params = [{"w": np.full((1, 1, 1, 1), 2.0), "b": np.array([1.0])}]
    batch = np.full((2, 1, 4, 4), 3.0)
    out = forward(spec, params, batch)
    assert out.shape == (2, 1, 4, 4)
    assert (out == 7.0).all()  # 2*3 + 1


def test_conv_stride_and_padding_shapes():
    spec = ModelSpec(input_shape=(3, 9, 9), layers=(Conv2d(5, 3, stride=2, padding=1), Flatten()))
    params = init_params(spec, seed=1)
    out = forward(spec, params, np.zeros((1, 3, 9, 9)))
    assert out.shape == (1, 5 * 5 * 5)


def test_conv_cross_correlation_no_kernel_flip():
    # asymmetric kernel: output at a single bright pixel reveals orientation
    spec = ModelSpec(input_shape=(1, 3, 3), layers=(Conv2d(1, kernel=3),))
    w = np.zeros((1, 1, 3, 3))
    w[0, 0, 0, 2] = 1.0  # reads input at (row 0, col 2)
    params = [{"w": w, "b": np.zeros(1)}]
    x = np.zeros((1, 1, 3, 3))
    x[0, 0, 0, 2] = 5.0
    out = forward(spec, params, x)
    assert out[0, 0, 0, 0] == 5.0


def test_maxpool_takes_window_maxima():
    spec = ModelSpec(input_shape=(1, 4, 4), layers=(MaxPool(2),))
    x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
    out = forward(spec, [{}], x)
    assert out.shape == (1, 1, 2, 2)
    assert out[0, 0].tolist() == [[5.0, 7.0], [13.0, 15.0]]


def test_relu_clamps_negatives():
    spec = ModelSpec(input_shape=(4,), layers=(ReLU(), Dense(2)))
    params = [{}, {"w": np.ones((2, 4)), "b": np.zeros(2)}]
    x = np.array([[-1.0, 2.0, -3.0, 4.0]])
    out = forward(spec, params, x)
    assert (out == 6.0).all()  # only the positives pass


def test_forward_rejects_wrong_batch_shape():
    spec = default_spec_small()
    params = init_params(spec, seed=0)
    with pytest.raises(ShapeMismatch):
        forward(spec, params, np.zeros((2, 3, 5, 5)))


def default_spec_small():
    return ModelSpec(input_shape=(3, 6, 6),
                     layers=(Conv2d(4, 3, 1, 1), ReLU(), MaxPool(2), Flatten(), Dense(3)))


def test_backward_returns_param_shaped_gradients():
    spec = default_spec_small()
    params = init_params(spec, seed=3)
    rng = np.random.default_rng(4)
    batch = rng.random((5, 3, 6, 6))
    labels = rng.integers(0, 3, 5)
    w = np.ones(3)
    grads = backward(spec, params, batch, labels, w)
    assert len(grads) == len(params)
    for p_entry, g_entry in zip(params, grads):
        assert set(p_entry) == set(g_entry)
        for key in p_entry:
            assert g_entry[key].shape == p_entry[key].shape


def test_loss_and_grad_agrees_with_separate_passes():
    spec = default_spec_small()
    params = init_params(spec, seed=5)
    rng = np.random.default_rng(6)
    batch = rng.random((4, 3, 6, 6))
    labels = rng.integers(0, 3, 4)
    w = np.array([1.0, 0.3, 2.0])
    loss, grads = loss_and_grad(spec, params, batch, labels, w)
    probs = softmax(forward(spec, params, batch))
    assert loss == pytest.approx(weighted_ce_loss(probs, labels, w), abs=1e-15)
    again = backward(spec, params, batch, labels, w)
    for a, b in zip(grads, again):
        for key in a:
            assert np.array_equal(a[key], b[key])


def test_forward_is_pure_and_deterministic():
    spec = default_spec_small()
    params = init_params(spec, seed=7)
    batch = np.random.default_rng(8).random((2, 3, 6, 6))
    snapshot = [{k: v.copy() for k, v in e.items()} for e in params]
    a = forward(spec, params, batch)
    b = forward(spec, params, batch)
    assert np.array_equal(a, b)
    for before, after in zip(snapshot, params):
        for key in before:
            assert np.array_equal(before[key], after[key])
