"""Analytic construction of network weights for tile/feature/class detectors.

Nothing here is trained: every weight is written down from the tile
values so that the network's outputs reproduce the detector scores from
`scores` exactly (up to float64 rounding).

Construction sketch for a single tile (values t, tolerance eps) on an
m x n canvas:

* The convolutional layer uses the four 2x2 corner-selector kernels
  (exactly one entry set).  With bias 0 they expose relu(x_ij) for every
  pixel; scaled by 2 with bias -2s they expose relu(2*x_ij - 2s), one
  filter group per distinct nonzero tile value s.  Four corners are
  needed because a 2x2 valid convolution output is (m-1) x (n-1): the
  last row/column of pixels only appears through the shifted selectors.
* Since |y - c| = relu(2y - 2c) - relu(y) + c for y >= 0, the distance
  at a placement is an affine combination of those conv outputs, so one
  dense-layer neuron per placement computes
  relu(eps - distance) = max(0, eps - distance).
* A final all-ones dense layer sums the placement neurons into the tile
  score.  Every activation is nonnegative, so the mandatory ReLU after
  each dense layer never clips anything.

Class scores need the minimum over feature scores.  For nonnegative a, b
the identity min(a, b) = relu(b) - relu(b - a) turns the minimum into a
binary tree of two-neuron gadgets; the subtraction is folded into the
next layer's weights, which costs one pass-through layer per tree level
and gives 2*ceil(log2(l)) - 1 hidden layers with 3*2^ceil(log2(l)) - 4
hidden neurons for an l-input minimum.

Weight layout is deterministic (filter order: identity group then one
group per distinct value ascending; tiles in feature order, features in
image order, images in spec order), so compiling the same spec twice
yields byte-identical serialized artifacts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import DimensionError
from .jsonutil import sha256_hex
from .model import Feature, FramedTile, ImageClassSpec, tile_to_data, spec_to_data
from .scores import region_index
from .tensor import ConvFilter, ConvLayer, DenseLayer, Network

__all__ = [
    "ParamReport",
    "CompiledArtifact",
    "compile_tile_network",
    "compile_feature_network",
    "compile_min_network",
    "compile_classifier",
    "compile_shallow_classifier",
    "param_report",
    "network_counts",
    "classifier_bounds",
    "COMPILER_VERSION",
]

COMPILER_VERSION = 1

# corner-selector offsets in filter order: top-left, top-right,
# bottom-left, bottom-right
_CORNERS = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class ParamReport:
    """Actual network counts next to the closed-form bounds.

    fc_layers counts hidden dense layers (the output layer excluded);
    fc_neurons counts every dense unit, output included.  For every
    compiled kind fc_layers == bound_layers holds exactly, conv_filters
    <= bound_filters (equal when all support values are distinct), and
    fc_neurons <= bound_neurons.
    """

    conv_filters: int
    fc_layers: int
    fc_neurons: int
    zero_weight_fraction: float
    bound_filters: int
    bound_neurons: int
    bound_layers: int


@dataclass(frozen=True)
class CompiledArtifact:
    network: Network
    kind: str
    spec_digest: str
    report: ParamReport


def network_counts(net: Network) -> tuple:
    """(conv_filters, fc_layers, fc_neurons, zero_weight_fraction)."""
    total = 0
    nonzero = 0
    neurons = 0
    for layer in net.dense:
        w = layer.weights
        total += w.shape[0] * w.shape[1]
        nonzero += int(w.nnz) if sparse.issparse(w) else int(np.count_nonzero(w))
        neurons += layer.out_dim
    return (len(net.conv), len(net.dense) - 1, neurons, 1.0 - nonzero / total)


def _report(net: Network, bound_filters: int, bound_neurons: int, bound_layers: int) -> ParamReport:
    conv_filters, fc_layers, fc_neurons, zero_frac = network_counts(net)
    return ParamReport(
        conv_filters=conv_filters,
        fc_layers=fc_layers,
        fc_neurons=fc_neurons,
        zero_weight_fraction=zero_frac,
        bound_filters=bound_filters,
        bound_neurons=bound_neurons,
        bound_layers=bound_layers,
    )


def classifier_bounds(spec: ImageClassSpec) -> tuple:
    """Closed-form (bound_filters, bound_neurons, bound_layers) for a spec."""
    m, n = spec.canvas
    bound_filters = sum(4 * img.c + 4 * img.s for img in spec.images)
    bound_neurons = (m * n + 7) * sum(img.s for img in spec.images)
    bound_layers = 2 * _ceil_log2(spec.r_max) + 1
    return bound_filters, bound_neurons, bound_layers


def param_report(net: Network, spec: ImageClassSpec, shallow: bool = False) -> ParamReport:
    """Report for a classifier network compiled from the given spec."""
    bound_filters, bound_neurons, bound_layers = classifier_bounds(spec)
    if shallow:
        bound_layers = 1
    return _report(net, bound_filters, bound_neurons, bound_layers)


def _ceil_log2(x: int) -> int:
    return max(0, (x - 1).bit_length())


def _require_canvas(m: int, n: int) -> None:
    if m < 2 or n < 2:
        raise DimensionError(
            f"canvas must be at least 2x2 for the 2x2 kernel construction, got {m}x{n}"
        )


def _pixel_slot(i: int, j: int, m: int, n: int) -> tuple:
    """Route 0-based pixel (i, j) to (corner index, output row, output col).

    The output grid of a 2x2 corner selector is (m-1) x (n-1); each
    pixel appears in exactly one cell of exactly one of the four
    selectors under this rule.
    """
    a = min(i, m - 2)
    b = min(j, n - 2)
    return 2 * (i - a) + (j - b), a, b


def _tile_bank(tile: FramedTile) -> tuple:
    """(kernels, biases, distinct nonzero values ascending) for one tile."""
    values = np.unique(tile.support_values)
    groups = [np.zeros((4, 2, 2))]
    for _ in values:
        groups.append(np.zeros((4, 2, 2)))
    for g, group in enumerate(groups):
        scale = 1.0 if g == 0 else 2.0
        for c, (di, dj) in enumerate(_CORNERS):
            group[c, di, dj] = scale
    kernels = np.concatenate(groups)
    biases = np.concatenate([np.zeros(4)] + [np.full(4, -2.0 * s) for s in values])
    return kernels, biases, values


def _placement_entries(
    tile: FramedTile,
    m: int,
    n: int,
    filter_base: int,
    row_base: int,
    cell: int,
    rows: list,
    cols: list,
    data: list,
    biases: list,
) -> int:
    """Emit the placement-neuron rows for one tile; returns the row count.

    Row for placement (i, j):
      bias   = eps - sum of support values
      +1 on  relu(x_{i+u, j+v})          (identity filter group)
      -1 on  relu(2 x_{i+u, j+v} - 2s)   (group of the value s = t[u, v])
    which evaluates to relu(eps - distance at (i, j)).
    """
    _, _, values = _tile_bank(tile)
    value_group = {float(s): g + 1 for g, s in enumerate(values)}
    w_out = n - 1
    supp = list(zip(tile.supp_rows.tolist(), tile.supp_cols.tolist()))
    bias = tile.epsilon - float(tile.support_values.sum())
    placements = region_index(m, n, *tile.shape)
    for p, (pi, pj) in enumerate(placements):
        row = row_base + p
        biases.append(bias)
        for u, v in supp:
            s = float(tile.values[u, v])
            corner, a, b = _pixel_slot(pi + u, pj + v, m, n)
            slot = a * w_out + b
            rows.append(row)
            cols.append((filter_base + corner) * cell + slot)
            data.append(1.0)
            rows.append(row)
            cols.append((filter_base + 4 * value_group[s] + corner) * cell + slot)
            data.append(-1.0)
    return len(placements)


def _conv_layer(kernels: np.ndarray, biases: np.ndarray) -> ConvLayer:
    return ConvLayer(tuple(ConvFilter(k, b) for k, b in zip(kernels, biases)))


def _placement_stage(tiles: list, m: int, n: int) -> tuple:
    """Conv layer plus the placement dense layer for an ordered tile list.

    Returns (conv, placement_layer, row_ranges) where row_ranges[i] is
    the (start, stop) slice of placement neurons belonging to tile i.
    """
    _require_canvas(m, n)
    kernel_list = []
    bias_list = []
    filter_base = 0
    bases = []
    for tile in tiles:
        k, b, _ = _tile_bank(tile)
        bases.append(filter_base)
        kernel_list.append(k)
        bias_list.append(b)
        filter_base += len(k)
    kernels = np.concatenate(kernel_list)
    conv_biases = np.concatenate(bias_list)
    cell = (m - 1) * (n - 1)
    width = filter_base * cell
    rows: list = []
    cols: list = []
    data: list = []
    neuron_biases: list = []
    row_ranges = []
    row_base = 0
    for tile, base in zip(tiles, bases):
        count = _placement_entries(
            tile, m, n, base, row_base, cell, rows, cols, data, neuron_biases
        )
        row_ranges.append((row_base, row_base + count))
        row_base += count
    weights = sparse.coo_matrix(
        (np.array(data), (np.array(rows), np.array(cols))), shape=(row_base, width)
    ).tocsr()
    placement = DenseLayer(weights, np.array(neuron_biases))
    return _conv_layer(kernels, conv_biases), placement, row_ranges


def _sum_layer(row_ranges: list, width: int) -> DenseLayer:
    """One output row per range, all-ones over that range, bias 0."""
    weights = np.zeros((len(row_ranges), width))
    for i, (start, stop) in enumerate(row_ranges):
        weights[i, start:stop] = 1.0
    return DenseLayer(weights, np.zeros(len(row_ranges)))


def compile_tile_network(tile: FramedTile, m: int, n: int) -> CompiledArtifact:
    """Network whose single output equals the tile score on every input."""
    conv, placement, _ = _placement_stage([tile], m, n)
    out = DenseLayer(np.ones((1, placement.out_dim)), np.zeros(1))
    net = Network((m, n), conv, (placement, out), 1)
    report = _report(
        net,
        bound_filters=4 * (tile.support_size + 1),
        bound_neurons=(m * n + 7),
        bound_layers=1,
    )
    digest = sha256_hex({"kind": "tile", "canvas": [m, n], "tile": tile_to_data(tile)})
    return CompiledArtifact(net, "tile", digest, report)


def compile_feature_network(feature: Feature, m: int, n: int) -> CompiledArtifact:
    """Network whose single output equals the feature score.

    The per-tile banks are concatenated; the per-tile summing layers
    merge into one all-ones output row, which adds the tile scores.
    """
    conv, placement, _ = _placement_stage(list(feature.tiles), m, n)
    out = DenseLayer(np.ones((1, placement.out_dim)), np.zeros(1))
    net = Network((m, n), conv, (placement, out), 1)
    report = _report(
        net,
        bound_filters=4 * feature.c + 4 * feature.s,
        bound_neurons=(m * n + 7) * feature.s,
        bound_layers=1,
    )
    digest = sha256_hex(
        {"kind": "feature", "canvas": [m, n], "tiles": [tile_to_data(t) for t in feature.tiles]}
    )
    return CompiledArtifact(net, "feature", digest, report)


def _parallel_min_ladder(leaves: list, width: int) -> tuple:
    """Dense layers computing one minimum per group of leaf columns.

    `leaves` holds, per group, the column indices (into the previous
    layer, of the given width) of its values; every group must be padded
    to one shared power-of-two length.  Returns (layers, final_exprs)
    where final_exprs[g] is a list of (column, coefficient) pairs over
    the last emitted layer whose affine combination equals the group
    minimum.  Inputs must be nonnegative at evaluation time.
    """
    exprs = [[((c, 1.0),) for c in cols] for cols in leaves]
    layers = []
    first = True
    while len(exprs[0]) > 1:
        if not first:
            # pass-through layer: materialize the pending pair differences
            count = sum(len(e) for e in exprs)
            weights = np.zeros((count, width))
            r = 0
            new_exprs = []
            for group in exprs:
                cur = []
                for expr in group:
                    for col, coef in expr:
                        weights[r, col] += coef
                    cur.append(((r, 1.0),))
                    r += 1
                new_exprs.append(cur)
            layers.append(DenseLayer(weights, np.zeros(count)))
            width, exprs = count, new_exprs
        # pair gadget: (a, b) -> relu(b), relu(b - a); min(a, b) = first - second
        count = sum(len(e) for e in exprs)
        weights = np.zeros((count, width))
        r = 0
        new_exprs = []
        for group in exprs:
            cur = []
            for p in range(0, len(group), 2):
                for col, coef in group[p + 1]:
                    weights[r, col] += coef
                    weights[r + 1, col] += coef
                for col, coef in group[p]:
                    weights[r + 1, col] -= coef
                cur.append(((r, 1.0), (r + 1, -1.0)))
                r += 2
            new_exprs.append(cur)
        layers.append(DenseLayer(weights, np.zeros(count)))
        width, exprs = count, new_exprs
        first = False
    return layers, [group[0] for group in exprs], width


def _expr_layer(exprs: list, width: int) -> DenseLayer:
    weights = np.zeros((len(exprs), width))
    for r, expr in enumerate(exprs):
        for col, coef in expr:
            weights[r, col] += coef
    return DenseLayer(weights, np.zeros(len(exprs)))


def compile_min_network(l: int) -> CompiledArtifact:
    """Network mapping a nonnegative 1 x l input to its exact minimum.

    Inputs pass through an identity 1x1 convolution (harmless since they
    must be nonnegative) and then the pair-gadget tree.  Widths below a
    power of two duplicate the last input into the unused leaves.
    """
    if l < 1:
        raise ValueError(f"minimum network needs at least one input, got {l}")
    conv = ConvLayer((ConvFilter(np.ones((1, 1)), 0.0),))
    if l == 1:
        dense: tuple = (DenseLayer(np.ones((1, 1)), np.zeros(1)),)
        bound_layers = 0
    else:
        padded = 1 << _ceil_log2(l)
        leaf_cols = [min(i, l - 1) for i in range(padded)]
        layers, finals, width = _parallel_min_ladder([leaf_cols], l)
        dense = (*layers, _expr_layer(finals, width))
        bound_layers = 2 * _ceil_log2(l) - 1
    net = Network((1, l), conv, dense, 1)
    report = _report(net, bound_filters=1, bound_neurons=6 * l, bound_layers=bound_layers)
    digest = sha256_hex({"kind": "min", "width": l})
    return CompiledArtifact(net, "min", digest, report)


def _classifier_stages(spec: ImageClassSpec) -> tuple:
    """(conv, placement layer, feature layer row ranges per class)."""
    tiles = []
    feature_tile_ranges = []  # per (class, feature): (first tile idx, last+1)
    class_feature_ranges = []  # per class: (first feature idx, last+1)
    for img in spec.images:
        f_start = len(feature_tile_ranges)
        for feat in img.features:
            t_start = len(tiles)
            tiles.extend(feat.tiles)
            feature_tile_ranges.append((t_start, len(tiles)))
        class_feature_ranges.append((f_start, len(feature_tile_ranges)))
    m, n = spec.canvas
    conv, placement, tile_rows = _placement_stage(tiles, m, n)
    feature_rows = [
        (tile_rows[t0][0], tile_rows[t1 - 1][1]) for t0, t1 in feature_tile_ranges
    ]
    return conv, placement, feature_rows, class_feature_ranges


def compile_classifier(spec: ImageClassSpec) -> CompiledArtifact:
    """Deep classifier: output j equals the class-j image score.

    Structure: placement layer, one feature-score neuron per feature,
    then per-class minimum trees running in parallel; classes with fewer
    features than the maximum duplicate their last feature into the
    unused leaves.  On any input whose membership is exactly one class,
    that class's output is strictly positive and all others are zero, so
    the lowest-index argmax returns the true label.
    """
    conv, placement, feature_rows, class_ranges = _classifier_stages(spec)
    feature_layer = _sum_layer(feature_rows, placement.out_dim)
    r_max = spec.r_max
    if r_max == 1:
        # each class has exactly one feature: the feature layer is the output
        dense = (placement, feature_layer)
    else:
        padded = 1 << _ceil_log2(r_max)
        leaves = []
        for f0, f1 in class_ranges:
            cols = list(range(f0, f1))
            leaves.append([cols[min(i, len(cols) - 1)] for i in range(padded)])
        layers, finals, width = _parallel_min_ladder(leaves, feature_layer.out_dim)
        dense = (placement, feature_layer, *layers, _expr_layer(finals, width))
    net = Network(spec.canvas, conv, dense, spec.num_classes)
    digest = sha256_hex(spec_to_data(spec))
    return CompiledArtifact(net, "classifier_deep", digest, param_report(net, spec))


def compile_shallow_classifier(spec: ImageClassSpec) -> CompiledArtifact:
    """Single-hidden-stage classifier: output j sums class j's feature scores.

    Zero error only when features of different classes never co-occur in
    a sample (the strict generation mode enforces this); a sample holding
    a partial feature set of another class already makes that class's
    output positive.
    """
    conv, placement, feature_rows, class_ranges = _classifier_stages(spec)
    class_rows = [
        (feature_rows[f0][0], feature_rows[f1 - 1][1]) for f0, f1 in class_ranges
    ]
    out = _sum_layer(class_rows, placement.out_dim)
    net = Network(spec.canvas, conv, (placement, out), spec.num_classes)
    digest = sha256_hex(spec_to_data(spec))
    return CompiledArtifact(
        net, "classifier_shallow", digest, param_report(net, spec, shallow=True)
    )
