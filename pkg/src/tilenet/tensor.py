"""Forward-pass semantics for small ReLU convolutional networks.

Single-channel inputs, one convolutional layer (valid padding, stride 1),
a flattening stage, and a chain of fully connected layers, each followed
by a coordinate-wise ReLU.  All arithmetic is 64-bit floating point and
every operation is a pure function of its inputs; the types are frozen
after construction.

The flattening order is a binding contract with the weight compiler:
filter-major, then row-major inside each feature map.

Contracts talk about matrix entries 1-based (top-left pixel is (1, 1));
storage is 0-based row-major numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import sparse

from .errors import DimensionError

__all__ = [
    "ImageMatrix",
    "ConvFilter",
    "ConvLayer",
    "DenseLayer",
    "Network",
    "relu",
    "softmax",
    "conv2d_valid",
    "conv_layer_forward",
    "flatten",
    "unflatten",
    "dense_forward",
    "network_forward",
    "forward_batch",
    "classify",
    "classify_batch",
    "matrix_values",
]


def matrix_values(x) -> np.ndarray:
    """Accept an ImageMatrix or any 2-D array-like; return float64 values."""
    values = getattr(x, "values", x)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-D array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ImageMatrix:
    """An m x n grid of intensities, every entry in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values, 2)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DimensionError("image must have at least one row and column")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def relu(v):
    """Coordinate-wise max(v, 0)."""
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def softmax(v):
    """exp(v_i) / sum_k exp(v_k), shifted for numerical stability."""
    v = np.asarray(v, dtype=np.float64)
    e = np.exp(v - v.max())
    return e / e.sum()


def conv2d_valid(x, w) -> np.ndarray:
    """Valid 2-D cross-correlation: stride 1, no padding, no kernel flip.

    out[a, b] = sum_{u,v} w[u, v] * x[a + u, b + v], output shape
    (m - kh + 1) x (n - kw + 1).
    """
    x = matrix_values(x)
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2:
        raise DimensionError(f"kernel must be 2-D, got shape {w.shape}")
    kh, kw = w.shape
    m, n = x.shape
    if kh > m or kw > n:
        raise DimensionError(f"kernel {kh}x{kw} does not fit input {m}x{n}")
    windows = sliding_window_view(x, (kh, kw))
    return np.einsum("abuv,uv->ab", windows, w)


@dataclass(frozen=True, eq=False)
class ConvFilter:
    """A kh x kw kernel with a scalar bias (added to every output cell)."""

    kernel: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kernel", _frozen_array(self.kernel, 2))
        object.__setattr__(self, "bias", float(self.bias))


@dataclass(frozen=True, eq=False)
class ConvLayer:
    """An ordered bank of filters sharing one kernel shape."""

    filters: tuple

    def __post_init__(self):
        filters = tuple(self.filters)
        if not filters:
            raise ValueError("convolutional layer needs at least one filter")
        shape = filters[0].kernel.shape
        if any(f.kernel.shape != shape for f in filters):
            raise DimensionError("all filters in a layer must share one kernel shape")
        object.__setattr__(self, "filters", filters)
        kernels = np.stack([f.kernel for f in filters])
        biases = np.array([f.bias for f in filters], dtype=np.float64)
        kernels.flags.writeable = False
        biases.flags.writeable = False
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "biases", biases)

    @property
    def kernel_shape(self) -> tuple:
        return self.filters[0].kernel.shape

    def __len__(self) -> int:
        return len(self.filters)


def _conv_bank(xs: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """(S, m, n) batch against (F, kh, kw) kernels -> (S, F, H, W), no bias."""
    windows = sliding_window_view(xs, kernels.shape[1:], axis=(1, 2))
    return np.einsum("sabuv,fuv->sfab", windows, kernels, optimize=True)


def conv_layer_forward(x, layer: ConvLayer) -> list:
    """Apply every filter then ReLU; returns feature maps in filter order."""
    x = matrix_values(x)
    kh, kw = layer.kernel_shape
    if kh > x.shape[0] or kw > x.shape[1]:
        raise DimensionError(
            f"kernel {kh}x{kw} does not fit input {x.shape[0]}x{x.shape[1]}"
        )
    z = _conv_bank(x[None], layer.kernels)[0]
    z = relu(z + layer.biases[:, None, None])
    return [z[i] for i in range(len(layer))]


def flatten(maps) -> np.ndarray:
    """Concatenate feature maps filter-major, row-major inside each map."""
    arrs = [np.asarray(m, dtype=np.float64) for m in maps]
    if not arrs:
        raise DimensionError("flatten needs at least one feature map")
    shape = arrs[0].shape
    if any(a.ndim != 2 or a.shape != shape for a in arrs):
        raise DimensionError("flatten requires feature maps of one shared shape")
    return np.concatenate([a.ravel() for a in arrs])


def unflatten(v, num_maps: int, map_shape: tuple) -> list:
    """Inverse of flatten for a known map count and shape."""
    v = np.asarray(v, dtype=np.float64)
    h, w = map_shape
    if v.shape != (num_maps * h * w,):
        raise DimensionError(
            f"vector of length {v.shape} cannot unflatten to {num_maps} maps of {map_shape}"
        )
    return [v[i * h * w : (i + 1) * h * w].reshape(h, w) for i in range(num_maps)]


@dataclass(frozen=True, eq=False)
class DenseLayer:
    """Weights A (n2 x n1) and biases B (n2); forward is relu(A v + B).

    A may be a scipy CSR matrix: compiled placement layers are >90% zero
    and would not fit in memory densely at canvas scale.
    """

    weights: object
    biases: np.ndarray

    def __post_init__(self):
        w = self.weights
        if sparse.issparse(w):
            w = sparse.csr_matrix(w, dtype=np.float64)
            w.sum_duplicates()
            w.sort_indices()
        else:
            w = _frozen_array(w, 2)
        b = np.array(self.biases, dtype=np.float64).reshape(-1)
        if b.shape[0] != w.shape[0]:
            raise DimensionError(
                f"bias length {b.shape[0]} != weight row count {w.shape[0]}"
            )
        b.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


def dense_forward(v, layer: DenseLayer) -> np.ndarray:
    """relu(A v + B)."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != layer.in_dim:
        raise DimensionError(f"vector length {v.shape[0]} != layer input {layer.in_dim}")
    return relu(layer.weights @ v + layer.biases)


def _dense_batch(V: np.ndarray, layer: DenseLayer) -> np.ndarray:
    W = layer.weights
    if sparse.issparse(W):
        out = (W @ V.T).T + layer.biases
    else:
        out = V @ W.T + layer.biases
    return np.maximum(out, 0.0, out=out)


@dataclass(frozen=True, eq=False)
class Network:
    """One convolutional layer, a flatten stage, and dense layers.

    The layer shapes must chain: the flattened convolution output feeds
    the first dense layer, and the last dense layer's width is the
    output dimension.
    """

    input_shape: tuple
    conv: ConvLayer
    dense: tuple
    output_dim: int

    def __post_init__(self):
        m, n = self.input_shape
        object.__setattr__(self, "input_shape", (int(m), int(n)))
        object.__setattr__(self, "dense", tuple(self.dense))
        object.__setattr__(self, "output_dim", int(self.output_dim))
        if not self.dense:
            raise ValueError("network needs at least one dense layer")
        kh, kw = self.conv.kernel_shape
        if kh > m or kw > n:
            raise DimensionError(f"kernel {kh}x{kw} does not fit input {m}x{n}")
        if self.dense[0].in_dim != self.flat_width:
            raise DimensionError(
                f"first dense layer expects {self.dense[0].in_dim} inputs, "
                f"flattened convolution provides {self.flat_width}"
            )
        for prev, nxt in zip(self.dense, self.dense[1:]):
            if nxt.in_dim != prev.out_dim:
                raise DimensionError(
                    f"dense layer chain broken: {prev.out_dim} -> {nxt.in_dim}"
                )
        if self.dense[-1].out_dim != self.output_dim:
            raise DimensionError(
                f"last dense layer has {self.dense[-1].out_dim} outputs, "
                f"expected {self.output_dim}"
            )

    @property
    def conv_output_shape(self) -> tuple:
        m, n = self.input_shape
        kh, kw = self.conv.kernel_shape
        return (m - kh + 1, n - kw + 1)

    @property
    def flat_width(self) -> int:
        h, w = self.conv_output_shape
        return len(self.conv) * h * w


def network_forward(x, net: Network) -> np.ndarray:
    """Full forward pass; output vector of length output_dim, all >= 0."""
    x = matrix_values(x)
    if x.shape != net.input_shape:
        raise DimensionError(f"input shape {x.shape} != network input {net.input_shape}")
    v = flatten(conv_layer_forward(x, net.conv))
    for layer in net.dense:
        v = dense_forward(v, layer)
    return v


def forward_batch(xs, net: Network, max_chunk_bytes: int = 1 << 25) -> np.ndarray:
    """Forward pass over a (S, m, n) batch, chunked to bound memory.

    The chunk bound keeps the convolution intermediate cache-resident;
    it changes throughput, never results (beyond float reassociation in
    the underlying matrix products).
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 2:
        xs = xs[None]
    if xs.ndim != 3 or xs.shape[1:] != net.input_shape:
        raise DimensionError(
            f"batch shape {xs.shape} incompatible with network input {net.input_shape}"
        )
    chunk = max(1, max_chunk_bytes // (8 * net.flat_width))
    outs = []
    for beg in range(0, xs.shape[0], chunk):
        part = xs[beg : beg + chunk]
        z = _conv_bank(part, net.conv.kernels)
        z += net.conv.biases[None, :, None, None]
        np.maximum(z, 0.0, out=z)
        z = z.reshape(part.shape[0], net.flat_width)
        for layer in net.dense:
            z = _dense_batch(z, layer)
        outs.append(z)
    return np.concatenate(outs)


def classify(x, net: Network) -> int:
    """1-based index of the maximal output; ties break to the lowest index."""
    return int(np.argmax(network_forward(x, net))) + 1


def classify_batch(xs, net: Network) -> np.ndarray:
    """1-based argmax labels for a batch."""
    return np.argmax(forward_batch(xs, net), axis=1) + 1
