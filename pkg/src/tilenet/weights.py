"""Inspectable JSON weight files.

Networks at this scale are small and the whole point of compiling them
is to look at the weights, so the format is structured text rather than
binary.  Floats serialize via repr and round-trip exactly; a loaded
network reproduces the original's forward outputs bit for bit.

Dense layers keep their in-memory representation: a CSR matrix is
stored as (row, col, value) triplets in row-major order, a plain matrix
as nested lists.  Preserving the representation matters because sparse
and dense matrix products associate their sums differently.

Top-level fields: format_version, compiler_version, kind, spec_digest,
input_shape, conv {kernel_shape, filters [{bias, kernel}]}, dense
[{layout, shape, biases, weights | entries}].
"""

from __future__ import annotations

import json

import numpy as np
from scipy import sparse

from .errors import FileFormatError
from .jsonutil import pretty_json
from .tensor import ConvFilter, ConvLayer, DenseLayer, Network

__all__ = ["WEIGHTS_FORMAT_VERSION", "network_to_data", "network_from_data", "save_weights", "load_weights"]

WEIGHTS_FORMAT_VERSION = 1


def _dense_to_data(layer: DenseLayer) -> dict:
    w = layer.weights
    entry = {"shape": [int(w.shape[0]), int(w.shape[1])]}
    if sparse.issparse(w):
        coo = w.tocoo()
        entry["layout"] = "sparse"
        entry["entries"] = [
            [int(r), int(c), float(v)] for r, c, v in zip(coo.row, coo.col, coo.data)
        ]
    else:
        entry["layout"] = "dense"
        entry["weights"] = [[float(v) for v in row] for row in w]
    entry["biases"] = [float(b) for b in layer.biases]
    return entry


def network_to_data(net: Network, kind: str, spec_digest: str, compiler_version: int) -> dict:
    return {
        "format_version": WEIGHTS_FORMAT_VERSION,
        "compiler_version": compiler_version,
        "kind": kind,
        "spec_digest": spec_digest,
        "input_shape": [net.input_shape[0], net.input_shape[1]],
        "output_dim": net.output_dim,
        "conv": {
            "kernel_shape": [net.conv.kernel_shape[0], net.conv.kernel_shape[1]],
            "filters": [
                {"bias": float(f.bias), "kernel": [[float(v) for v in row] for row in f.kernel]}
                for f in net.conv.filters
            ],
        },
        "dense": [_dense_to_data(layer) for layer in net.dense],
    }


def _dense_from_data(entry: dict, where: str) -> DenseLayer:
    try:
        rows, cols = (int(v) for v in entry["shape"])
        layout = entry["layout"]
        biases = np.array(entry["biases"], dtype=np.float64)
        if layout == "sparse":
            triplets = entry["entries"]
            r = np.array([t[0] for t in triplets], dtype=np.int64)
            c = np.array([t[1] for t in triplets], dtype=np.int64)
            v = np.array([t[2] for t in triplets], dtype=np.float64)
            weights = sparse.coo_matrix((v, (r, c)), shape=(rows, cols)).tocsr()
        elif layout == "dense":
            weights = np.array(entry["weights"], dtype=np.float64)
            if weights.shape != (rows, cols):
                raise FileFormatError(f"{where}: weight shape mismatch")
        else:
            raise FileFormatError(f"{where}: unknown dense layout '{layout}'")
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, FileFormatError):
            raise
        raise FileFormatError(f"{where}: malformed dense layer: {exc}") from None
    if not np.all(np.isfinite(biases)):
        raise FileFormatError(f"{where}: non-finite bias")
    return DenseLayer(weights, biases)


def network_from_data(data: dict, where: str = "weights") -> tuple:
    """Rebuild (Network, metadata dict) from the document form."""
    if not isinstance(data, dict):
        raise FileFormatError(f"{where}: weight document must be a JSON object")
    version = data.get("format_version")
    if version != WEIGHTS_FORMAT_VERSION:
        raise FileFormatError(
            f"{where}: unsupported weight format version {version!r} "
            f"(expected {WEIGHTS_FORMAT_VERSION})"
        )
    try:
        m, n = (int(v) for v in data["input_shape"])
        output_dim = int(data["output_dim"])
        conv_data = data["conv"]
        filters = tuple(
            ConvFilter(np.array(f["kernel"], dtype=np.float64), float(f["bias"]))
            for f in conv_data["filters"]
        )
        dense = tuple(
            _dense_from_data(entry, f"{where}.dense[{i}]")
            for i, entry in enumerate(data["dense"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FileFormatError):
            raise
        raise FileFormatError(f"{where}: malformed weight document: {exc}") from None
    net = Network((m, n), ConvLayer(filters), dense, output_dim)
    meta = {
        "kind": data.get("kind", ""),
        "spec_digest": data.get("spec_digest", ""),
        "compiler_version": data.get("compiler_version"),
    }
    return net, meta


def save_weights(net: Network, path, kind: str = "", spec_digest: str = "", compiler_version: int = 0) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(pretty_json(network_to_data(net, kind, spec_digest, compiler_version)))


def load_weights(path) -> tuple:
    """Load (Network, metadata) from a weight file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FileFormatError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return network_from_data(data, where=str(path))
