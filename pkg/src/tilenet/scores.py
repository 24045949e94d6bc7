"""Piecewise-linear detector scores for tiles, features, and image specs.

Each score is a sum of hinge terms max(0, epsilon - distance) over every
tile placement; a score is strictly positive exactly when the matching
membership predicate from `model` holds.  These functions are the
semantic target the compiled networks must reproduce.

Placement sums run over the fixed row-major placement order so repeated
runs are bit-identical; comparisons against compiled networks should
still use a tolerance (1e-9 absolute is ample) because the network path
reassociates the same sums.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError
from .model import Feature, FramedTile, ImageSpec, tile_distance_map

__all__ = [
    "region_index",
    "tile_score",
    "feature_score",
    "image_score",
    "image_score_sum",
]


def region_index(m: int, n: int, k: int, l: int) -> list:
    """All 0-based offsets (i, j) where a k x l window fits an m x n grid.

    Row-major order; the count is (m-k+1)*(n-l+1).  Offset (i, j) covers
    rows i+1..i+k and columns j+1..j+l in 1-based terms.
    """
    if k < 1 or l < 1 or k > m or l > n:
        raise DimensionError(f"window {k}x{l} does not fit grid {m}x{n}")
    return [(i, j) for i in range(m - k + 1) for j in range(n - l + 1)]


def tile_score(x, tile: FramedTile) -> float:
    """Sum over all placements of max(0, epsilon - distance); >= 0."""
    dmap = tile_distance_map(x, tile)
    return float(np.maximum(0.0, tile.epsilon - dmap).sum())


def feature_score(x, feature: Feature) -> float:
    """Sum of tile scores over the feature's tiles."""
    return sum(tile_score(x, t) for t in feature.tiles)


def image_score(x, image: ImageSpec) -> float:
    """Minimum feature score over the image's features."""
    return min(feature_score(x, f) for f in image.features)


def image_score_sum(x, image: ImageSpec) -> float:
    """Sum of feature scores: the shallow variant.

    Positive whenever ANY feature is present, so unlike `image_score` it
    does not characterize membership; it still separates classes when
    features of different classes never co-occur.
    """
    return sum(feature_score(x, f) for f in image.features)
