"""Forward-pass semantics: convolution, flatten, dense layers, argmax."""

import numpy as np
import pytest

from tilenet import (
    ConvFilter,
    ConvLayer,
    DenseLayer,
    DimensionError,
    ImageMatrix,
    Network,
    classify,
    classify_batch,
    conv2d_valid,
    conv_layer_forward,
    dense_forward,
    flatten,
    forward_batch,
    network_forward,
    relu,
    softmax,
    unflatten,
)
from helpers import naive_conv2d


def test_relu_basic():
    np.testing.assert_array_equal(relu([-1.0, 0.0, 2.5]), [0.0, 0.0, 2.5])
    np.testing.assert_array_equal(relu([0.0, 0.0]), [0.0, 0.0])


def test_relu_idempotent():
    rng = np.random.default_rng(0)
    for _ in range(100):
        v = rng.normal(size=rng.integers(1, 20))
        np.testing.assert_array_equal(relu(relu(v)), relu(v))


def test_conv2d_corner_selector():
    x = [[1, 2, 3], [4, 5, 6], [7, 8, 9]]
    out = conv2d_valid(x, [[1, 0], [0, 0]])
    np.testing.assert_array_equal(out, [[1, 2], [4, 5]])


def test_conv2d_zero_kernel():
    rng = np.random.default_rng(1)
    x = rng.random((5, 7))
    np.testing.assert_array_equal(conv2d_valid(x, [[0, 0], [0, 0]]), np.zeros((4, 6)))


def test_conv2d_all_ones():
    np.testing.assert_array_equal(conv2d_valid([[1, 1], [1, 1]], [[1, 1], [1, 1]]), [[4.0]])


def test_conv2d_kernel_too_large():
    with pytest.raises(DimensionError):
        conv2d_valid([[1.0, 2.0]], [[1.0], [1.0]])


def test_conv2d_matches_naive():
    rng = np.random.default_rng(2)
    for _ in range(20):
        m, n = rng.integers(2, 9, size=2)
        kh = int(rng.integers(1, m + 1))
        kw = int(rng.integers(1, n + 1))
        x = rng.random((m, n))
        w = rng.normal(size=(kh, kw))
        np.testing.assert_allclose(conv2d_valid(x, w), naive_conv2d(x, w), atol=1e-12)


def test_conv2d_output_shape_contract():
    x = np.random.default_rng(3).random((6, 5))
    for kh in range(1, 7):
        for kw in range(1, 6):
            assert conv2d_valid(x, np.ones((kh, kw))).shape == (6 - kh + 1, 5 - kw + 1)


def test_conv2d_linear_in_input():
    rng = np.random.default_rng(4)
    w = rng.normal(size=(3, 3))
    for _ in range(10):
        x, y = rng.random((2, 8, 8))
        alpha = rng.normal()
        np.testing.assert_allclose(
            conv2d_valid(x + y, w), conv2d_valid(x, w) + conv2d_valid(y, w), atol=1e-12
        )
        np.testing.assert_allclose(
            conv2d_valid(alpha * x, w), alpha * conv2d_valid(x, w), atol=1e-12
        )


def test_conv_layer_bias_clips_to_zero():
    layer = ConvLayer((ConvFilter([[1.0, 0.0], [0.0, 0.0]], bias=-2.0),))
    maps = conv_layer_forward(np.ones((3, 3)), layer)
    np.testing.assert_array_equal(maps[0], np.zeros((2, 2)))


def test_conv_layer_single_window():
    layer = ConvLayer((ConvFilter([[1.0, 0.0], [0.0, 0.0]], bias=0.0),))
    maps = conv_layer_forward([[1.0, 2.0], [3.0, 4.0]], layer)
    np.testing.assert_array_equal(maps[0], [[1.0]])


def test_conv_layer_scaled_pair_pattern():
    # bank (w, 2w) with biases (0, -2c) exposes relu(x) and relu(2x - 2c)
    c = 0.4
    w = np.array([[1.0, 0.0], [0.0, 0.0]])
    layer = ConvLayer((ConvFilter(w, 0.0), ConvFilter(2.0 * w, -2.0 * c)))
    rng = np.random.default_rng(5)
    x = rng.random((4, 4))
    maps = conv_layer_forward(x, layer)
    for a in range(3):
        for b in range(3):
            assert maps[0][a, b] == pytest.approx(max(x[a, b], 0.0), abs=1e-12)
            assert maps[1][a, b] == pytest.approx(max(2 * x[a, b] - 2 * c, 0.0), abs=1e-12)


def test_conv_layer_rejects_mixed_kernel_shapes():
    with pytest.raises(DimensionError):
        ConvLayer((ConvFilter(np.ones((2, 2))), ConvFilter(np.ones((1, 2)))))


def test_flatten_row_major_single_map():
    np.testing.assert_array_equal(flatten([np.array([[1.0, 2.0], [3.0, 4.0]])]),
                                  [1.0, 2.0, 3.0, 4.0])


def test_flatten_filter_major():
    np.testing.assert_array_equal(flatten([np.array([[1.0]]), np.array([[2.0]])]),
                                  [1.0, 2.0])


def test_flatten_unflatten_roundtrip():
    rng = np.random.default_rng(6)
    for _ in range(20):
        f = int(rng.integers(1, 5))
        h, w = rng.integers(1, 6, size=2)
        maps = [rng.random((h, w)) for _ in range(f)]
        v = flatten(maps)
        back = unflatten(v, f, (h, w))
        for a, b in zip(maps, back):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(flatten(back), v)


def test_flatten_rejects_mixed_shapes():
    with pytest.raises(DimensionError):
        flatten([np.ones((2, 2)), np.ones((2, 3))])


def test_dense_forward_identity():
    layer = DenseLayer(np.eye(2), np.zeros(2))
    np.testing.assert_array_equal(dense_forward([3.0, -1.0], layer), [3.0, 0.0])


def test_dense_forward_difference():
    layer = DenseLayer(np.array([[1.0, -1.0]]), np.zeros(1))
    np.testing.assert_array_equal(dense_forward([5.0, 3.0], layer), [2.0])


def test_dense_forward_clamps():
    layer = DenseLayer(np.array([[-1.0, -1.0]]), np.zeros(1))
    np.testing.assert_array_equal(dense_forward([1.0, 1.0], layer), [0.0])


def test_dense_forward_length_mismatch():
    layer = DenseLayer(np.eye(2), np.zeros(2))
    with pytest.raises(DimensionError):
        dense_forward([1.0, 2.0, 3.0], layer)


def test_dense_layer_bias_length_checked():
    with pytest.raises(DimensionError):
        DenseLayer(np.eye(2), np.zeros(3))


def _tiny_network(scale=1.0):
    conv = ConvLayer((ConvFilter([[1.0, 0.0], [0.0, 0.0]], 0.0),
                      ConvFilter([[0.0, 0.0], [0.0, 1.0]], 0.1)))
    d1 = DenseLayer(np.arange(16, dtype=float).reshape(2, 8) / 10.0, np.array([0.0, 0.2]))
    d2 = DenseLayer(scale * np.array([[1.0, 0.5], [0.3, 0.0], [0.0, 2.0]]), np.zeros(3))
    return Network((3, 3), conv, (d1, d2), 3)


def test_network_forward_zero_weights():
    conv = ConvLayer((ConvFilter(np.zeros((2, 2)), 0.0),))
    dense = (DenseLayer(np.zeros((2, 4)), np.zeros(2)),)
    net = Network((3, 3), conv, dense, 2)
    out = network_forward(np.random.default_rng(7).random((3, 3)), net)
    np.testing.assert_array_equal(out, np.zeros(2))


def test_network_forward_nonnegative_outputs():
    rng = np.random.default_rng(8)
    net = _tiny_network()
    for _ in range(25):
        assert (network_forward(rng.random((3, 3)), net) >= 0.0).all()


def test_scaling_last_layer_doubles_outputs():
    rng = np.random.default_rng(9)
    x = rng.random((3, 3))
    base = network_forward(x, _tiny_network(1.0))
    doubled = network_forward(x, _tiny_network(2.0))
    np.testing.assert_allclose(doubled, 2.0 * base, atol=1e-12)


def test_network_shape_chain_validated():
    conv = ConvLayer((ConvFilter(np.ones((2, 2)), 0.0),))
    with pytest.raises(DimensionError):
        Network((3, 3), conv, (DenseLayer(np.ones((1, 5)), np.zeros(1)),), 1)
    with pytest.raises(DimensionError):
        Network((3, 3), conv, (DenseLayer(np.ones((2, 4)), np.zeros(2)),), 1)


def test_network_forward_wrong_input_shape():
    net = _tiny_network()
    with pytest.raises(DimensionError):
        network_forward(np.zeros((4, 4)), net)


def test_forward_batch_matches_single():
    rng = np.random.default_rng(10)
    net = _tiny_network()
    xs = rng.random((11, 3, 3))
    batch = forward_batch(xs, net)
    for i in range(11):
        np.testing.assert_allclose(batch[i], network_forward(xs[i], net), atol=1e-12)


def test_forward_batch_chunking_consistent():
    rng = np.random.default_rng(11)
    net = _tiny_network()
    xs = rng.random((9, 3, 3))
    full = forward_batch(xs, net)
    # one-sample chunks; BLAS may associate sums differently per batch size
    tiny = forward_batch(xs, net, max_chunk_bytes=1)
    np.testing.assert_allclose(full, tiny, atol=1e-12)


def test_classify_argmax():
    conv = ConvLayer((ConvFilter(np.zeros((1, 1)), 0.0),))
    dense = (DenseLayer(np.zeros((3, 1)), np.array([0.0, 3.2, 0.0])),)
    net = Network((1, 1), conv, dense, 3)
    assert classify(np.array([[0.5]]), net) == 2


def test_classify_tie_breaks_low():
    conv = ConvLayer((ConvFilter(np.zeros((1, 1)), 0.0),))
    dense = (DenseLayer(np.zeros((3, 1)), np.zeros(3)),)
    net = Network((1, 1), conv, dense, 3)
    assert classify(np.array([[0.5]]), net) == 1
    assert classify_batch(np.zeros((4, 1, 1)), net).tolist() == [1, 1, 1, 1]


def test_classify_invariant_under_softmax():
    rng = np.random.default_rng(12)
    net = _tiny_network()
    for _ in range(25):
        out = network_forward(rng.random((3, 3)), net)
        assert int(np.argmax(out)) == int(np.argmax(softmax(out)))


def test_softmax_normalizes():
    rng = np.random.default_rng(13)
    v = rng.normal(size=7)
    s = softmax(v)
    assert s.sum() == pytest.approx(1.0, abs=1e-12)
    assert (s > 0).all()


def test_image_matrix_invariants():
    img = ImageMatrix(np.array([[0.0, 1.0], [0.5, 0.25]]))
    assert img.rows == 2 and img.cols == 2
    with pytest.raises(ValueError):
        ImageMatrix(np.array([[1.5]]))
    with pytest.raises(ValueError):
        ImageMatrix(np.array([[-0.1]]))
    with pytest.raises(DimensionError):
        ImageMatrix(np.zeros((0, 3)))
    # accepted anywhere a bare matrix is
    np.testing.assert_array_equal(conv2d_valid(img, [[1.0]]), img.values)
